import math

import numpy as np
import pytest

from ionqpt.analysis import (
    FitError,
    MotionalOccupation,
    TruncationError,
    bell_populations,
    bell_state_fidelity,
    displaced_thermal_populations,
    fit_heating,
    fit_over_rotation,
    fit_ramsey_model,
    lamb_dicke_eta,
    read_series_csv,
    sideband_rabi_signal,
    simulate_parity_scan,
    thermal_gate_error,
    write_series_csv,
)
from ionqpt.ionsim import NoiseModel, ProcessSpec, ramsey_contrast_model, simulate_ramsey
from ionqpt.process import unitary_to_chi
from ionqpt.qmath import ValidationError, matrix_exponential, two_qubit_pauli_basis

_XX = two_qubit_pauli_basis()[5]


def over_rotated_chi(theta):
    return unitary_to_chi(matrix_exponential(_XX, theta))


# ---------------------------------------------------------------------------
# Bell-state tomography
# ---------------------------------------------------------------------------

def test_parity_scan_ideal_ms_exact():
    scan = simulate_parity_scan(ProcessSpec.ms().ideal_chi())
    assert scan.p_amp == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(scan.p2 + scan.p1 + scan.p0, 1.0, atol=1e-9)
    p0, p2 = bell_populations(ProcessSpec.ms().ideal_chi())
    assert p0 == pytest.approx(0.5, abs=1e-12)
    assert p2 == pytest.approx(0.5, abs=1e-12)
    assert bell_state_fidelity(p0, p2, scan) == pytest.approx(1.0, abs=1e-9)


def test_parity_scan_sampled_is_deterministic():
    chi = ProcessSpec.ms().ideal_chi()
    a = simulate_parity_scan(chi, shots=2400, seed=3)
    b = simulate_parity_scan(chi, shots=2400, seed=3)
    np.testing.assert_array_equal(a.p2, b.p2)
    assert a.p_amp == b.p_amp


def test_bell_fidelity_over_rotation_oracle():
    theta = 1.04
    chi = over_rotated_chi(theta)
    scan = simulate_parity_scan(chi)
    p0, p2 = bell_populations(chi)
    f = bell_state_fidelity(p0, p2, scan)
    assert f == pytest.approx(0.5 * (1.0 + math.sin(2 * theta)), abs=1e-6)


def test_bell_fidelity_validation_and_monotonicity():
    with pytest.raises(ValidationError):
        bell_state_fidelity(-0.1, 0.5, 1.0)
    with pytest.raises(ValidationError):
        bell_state_fidelity(0.5, 1.2, 1.0)
    f_lo = bell_state_fidelity(0.4, 0.4, 0.8)
    assert bell_state_fidelity(0.5, 0.4, 0.8) > f_lo
    assert bell_state_fidelity(0.4, 0.5, 0.8) > f_lo
    assert bell_state_fidelity(0.4, 0.4, 0.9) > f_lo


# ---------------------------------------------------------------------------
# Over-rotation fit
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("theta", [0.1, 0.45, math.pi / 4, 1.04, 1.4])
def test_fit_over_rotation_exact_on_unitaries(theta):
    fit = fit_over_rotation(over_rotated_chi(theta))
    assert abs(fit.theta - theta) < 1e-6
    assert fit.residual_error < 1e-9


# ---------------------------------------------------------------------------
# Ramsey model fit
# ---------------------------------------------------------------------------

def test_fit_ramsey_roundtrip_on_analytic_curve():
    delays = np.array([10.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0])
    contrasts = ramsey_contrast_model(delays, 0.015, 300.0)
    fit = fit_ramsey_model(delays, contrasts)
    assert fit.phase_diffusion_rad_per_sqrt_us == pytest.approx(0.015, rel=1e-4)
    assert fit.fast_freq_sigma_hz == pytest.approx(300.0, rel=1e-3)
    assert fit.residual < 1e-8


def test_fit_ramsey_on_simulated_contrasts():
    delays = [20.0, 60.0, 120.0, 240.0, 480.0]
    contrasts = simulate_ramsey(delays, NoiseModel(drift_hz_per_min=0.0),
                                shots=20000, seed=2)
    fit = fit_ramsey_model(delays, contrasts)
    assert abs(fit.phase_diffusion_rad_per_sqrt_us - 0.015) / 0.015 < 0.15
    assert abs(fit.fast_freq_sigma_hz - 300.0) / 300.0 < 0.15


def test_fit_ramsey_flat_input_fails():
    with pytest.raises(FitError):
        fit_ramsey_model([10.0, 20.0, 40.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        fit_ramsey_model([10.0, 20.0], [1.0, 0.9])


# ---------------------------------------------------------------------------
# Displaced thermal populations
# ---------------------------------------------------------------------------

def test_ground_state_populations():
    p = displaced_thermal_populations(0.0, 0.0)
    assert p[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(p[1:] < 1e-12)


def test_coherent_limit_is_poisson():
    p = displaced_thermal_populations(0.0, 2.0)
    poisson = np.array([math.exp(-2.0) * 2.0 ** k / math.factorial(k)
                        for k in range(20)])
    np.testing.assert_allclose(p[:20], poisson, atol=1e-8)


def test_mean_occupation_is_additive():
    for n_th, n_coh in [(5.5, 0.4), (3.5, 0.1), (0.2, 3.0)]:
        p = displaced_thermal_populations(n_th, n_coh)
        mean = float(np.arange(len(p)) @ p)
        assert abs(mean - (n_th + n_coh)) / (n_th + n_coh) < 1e-3
        assert p.sum() == pytest.approx(1.0, abs=1e-6)
        assert p.min() > -1e-12


def test_truncation_error_raised():
    with pytest.raises(TruncationError):
        displaced_thermal_populations(10.0, 5.0, n_max=10)
    # an adequate explicit n_max works
    p = displaced_thermal_populations(1.0, 0.5, n_max=63)
    assert p.sum() == pytest.approx(1.0, abs=1e-6)


def test_populations_validation():
    with pytest.raises(ValidationError):
        displaced_thermal_populations(-1.0, 0.0)


# ---------------------------------------------------------------------------
# Sideband signal and heating fit
# ---------------------------------------------------------------------------

def test_sideband_signal_boundaries():
    occ = MotionalOccupation(n_th=0.0, n_coh=0.0,
                             rabi_omega=2 * math.pi * 250e3, eta=0.039)
    t_pi = math.pi / (occ.rabi_omega * occ.eta) * 1e6
    sig = sideband_rabi_signal(occ, [0.0, t_pi])
    assert sig[0] == pytest.approx(0.0, abs=1e-12)
    assert sig[1] == pytest.approx(2.0, abs=1e-9)


def test_sideband_signal_range_and_dephasing():
    t = np.linspace(0.0, 400.0, 200)
    hot = MotionalOccupation(n_th=32.0, n_coh=22.0,
                             rabi_omega=2 * math.pi * 250e3, eta=0.039)
    cold = MotionalOccupation(n_th=5.5, n_coh=0.4,
                              rabi_omega=2 * math.pi * 250e3, eta=0.039)
    for occ in (hot, cold):
        sig = sideband_rabi_signal(occ, t)
        assert sig.min() >= 0.0 and sig.max() <= 2.0
    # hotter distribution dephases towards the mixed value faster
    late = t > 200.0
    assert (np.std(sideband_rabi_signal(hot, t)[late])
            < np.std(sideband_rabi_signal(cold, t)[late]))


def test_fit_heating_round_trip():
    omega = 2 * math.pi * 250e3
    t = np.linspace(2.0, 600.0, 1200)
    occ = MotionalOccupation(n_th=3.5, n_coh=0.1, rabi_omega=omega, eta=0.039)
    rng = np.random.default_rng(273)
    y = sideband_rabi_signal(occ, t) + 0.02 * rng.standard_normal(len(t))
    fit, cov = fit_heating(t, y, eta=0.039)
    assert abs(fit.n_th - 3.5) / 3.5 < 0.1
    assert abs(fit.n_coh - 0.1) / 0.1 < 0.1
    assert abs(fit.rabi_omega - omega) / omega < 0.01
    assert cov.shape == (3, 3)
    assert np.all(np.diag(cov) >= 0.0)


def test_fit_heating_rejects_degenerate_input():
    with pytest.raises(FitError):
        fit_heating(np.linspace(1, 100, 20), np.full(20, 0.7))
    with pytest.raises(ValidationError):
        fit_heating([1.0, 2.0, 3.0], [0.1, 0.2, 0.3])


def test_motional_occupation_validation():
    with pytest.raises(ValidationError):
        MotionalOccupation(n_th=-1.0, n_coh=0.0, rabi_omega=1.0, eta=0.04)


# ---------------------------------------------------------------------------
# Closed-form helpers
# ---------------------------------------------------------------------------

def test_thermal_gate_error():
    assert thermal_gate_error(0.039, 0.0) == 0.0
    val = thermal_gate_error(0.039, 0.4)
    assert val == pytest.approx((math.pi ** 2 / 4) * 0.039 ** 4
                                * (0.4 + 2 * 0.4 ** 2), abs=1e-12)
    assert abs(val - 4.10e-6) < 1e-7
    with pytest.raises(ValidationError):
        thermal_gate_error(-0.1, 0.4)


def test_lamb_dicke_eta():
    eta = lamb_dicke_eta(40.0, 2 * math.pi * 1.41e6, 729e-9, math.pi / 4)
    assert abs(eta - 0.039) / 0.039 < 0.1
    # frequency quadrupled -> eta halved
    eta4 = lamb_dicke_eta(40.0, 4 * 2 * math.pi * 1.41e6, 729e-9, math.pi / 4)
    assert eta4 == pytest.approx(eta / 2.0, rel=1e-12)
    assert lamb_dicke_eta(40.0, 2 * math.pi * 1.41e6, 729e-9,
                          math.pi / 2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValidationError):
        lamb_dicke_eta(0.0, 1.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------

def test_series_csv_roundtrip(tmp_path):
    path = str(tmp_path / "series.csv")
    xs = np.array([1.0, 2.5, 3.75])
    ys = np.array([0.1, 0.9, 0.5])
    write_series_csv(path, xs, ys, header=("time_us", "signal"))
    rx, ry = read_series_csv(path)
    np.testing.assert_allclose(rx, xs, atol=0)
    np.testing.assert_allclose(ry, ys, atol=0)
