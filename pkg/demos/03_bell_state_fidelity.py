"""Bell-state tomography of the entangling gate via a parity scan.

Applying the gate to |SS> and scanning the phase of a common analysis pi/2
pulse produces a parity fringe oscillating at twice the analysis phase.  The
Bell-state fidelity combines the fringe amplitude with the populations:
F_BST = P_amp/2 + (P0 + P2)/2.  For a purely over-rotated gate the exact
value is (1 + sin 2 theta)/2.
"""
import math

from ionqpt.analysis import bell_populations, bell_state_fidelity, simulate_parity_scan
from ionqpt.ionsim import ProcessSpec


def f_bst(theta, shots, seed=0):
    chi = ProcessSpec.ms_plus(theta=theta).ideal_chi()
    scan = simulate_parity_scan(chi, shots=shots, seed=seed)
    p0, p2 = bell_populations(chi, shots=shots, seed=seed)
    return bell_state_fidelity(p0, p2, scan), scan.p_amp


def main():
    print("Ideal gate (theta = pi/4), 10^4 sampled shots:")
    f, amp = f_bst(math.pi / 4, shots=10000)
    print(f"  parity amplitude {amp:.4f}, F_BST = {f:.4f}\n")

    print("Over-rotated gates, exact populations vs sampled parity scans:")
    print(f"  {'theta':>6}  {'exact (1+sin2t)/2':>18}  {'sampled F_BST':>14}")
    for theta in (0.9, 1.0, 1.04, 1.1):
        oracle = 0.5 * (1.0 + math.sin(2 * theta))
        f, _ = f_bst(theta, shots=10000)
        print(f"  {theta:6.2f}  {oracle:18.4f}  {f:14.4f}")

    f_p = math.cos(1.04 - math.pi / 4) ** 2
    print(f"\nAt theta+ = 1.04 the Bell-state fidelity (~0.936) tracks the "
          f"process fidelity cos^2(theta - pi/4) = {f_p:.4f}:")
    print("a single consistent over-rotation explains both numbers.")


if __name__ == "__main__":
    main()
