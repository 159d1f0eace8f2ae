"""Process-matrix (chi) calculus for two-qubit maps.

A quantum map E is stored as a 16x16 complex matrix chi over the unnormalized
Pauli-product basis P_0..P_15 (II, IX, ... ZZ), acting as

    E(rho) = sum_mn chi[m, n] P_n rho P_m^dag.

With this convention a unitary U = sum_m c_m P_m (c_m = Tr(P_m U)/4) has
chi[m, n] = conj(c_m) * c_n, so the ideal Molmer-Sorensen propagator
exp(-i pi/4 X1X2) carries chi[II,II] = chi[XX,XX] = 1/2, chi[XX,II] = i/2 and
chi[II,XX] = -i/2.  Trace preservation is equivalent to Tr(chi) = 1.

The Choi matrix used internally (and by the MLE) is ordered input (x) output:
J = sum_ij |i><j| (x) E(|i><j|), so probabilities are Tr[J (rho^T (x) M)].
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .qmath import (
    DEFAULT_TOL,
    ValidationError,
    hermiticity_deviation,
    nearest_psd,
    pauli_labels_2q,
    require_hermitian,
    require_unitary,
    two_qubit_pauli_basis,
)

__all__ = [
    "ProcessMatrix",
    "ProcessFidelityReport",
    "CptpDiagnostics",
    "identity_chi",
    "unitary_to_chi",
    "apply_process",
    "process_fidelity",
    "compose",
    "extract_error_process",
    "validate_cptp",
    "chi_to_choi",
    "choi_to_chi",
    "chi_choi_roundtrip",
    "chi_to_json_dict",
    "chi_from_json_dict",
    "save_chi",
    "load_chi",
    "atomic_write_text",
]

_P = two_qubit_pauli_basis()

# v_n = (I (x) P_n) |omega>, |omega> = sum_i |i>|i>; columns are orthogonal with
# norm 2, so choi = V chi^T V^dag and chi^T = V^dag choi V / 16.
_OMEGA = np.eye(4, dtype=complex).reshape(16)
_V = np.stack([np.kron(np.eye(4, dtype=complex), _P[n]) @ _OMEGA
               for n in range(16)], axis=1)

# W[m, n] = conj(P_m) (x) P_n: the column-stacking superoperator of the
# elementary map rho -> P_n rho P_m^dag.
_W = np.einsum("mab,ncd->mnacbd", _P.conj(), _P).reshape(16, 16, 16, 16)

CHI_CONVENTION = "unnormalized-pauli-trace-one"


class ProcessMatrix:
    """A 16x16 chi matrix in the two-qubit Pauli-product basis.

    Validated instances are Hermitian (1e-10), PSD down to -1e-8 on the
    minimum eigenvalue, and have unit trace (1e-8).  Pass ``validate=False``
    for possibly-unphysical matrices (e.g. raw linear inversion output).
    """

    __slots__ = ("chi",)

    def __init__(self, chi: np.ndarray, validate: bool = True):
        chi = np.array(chi, dtype=complex)
        if chi.shape != (16, 16):
            raise ValidationError(f"chi must be 16x16, got {chi.shape}")
        if validate:
            require_hermitian(chi, DEFAULT_TOL.hermiticity, name="chi")
            min_eig = float(np.linalg.eigvalsh(0.5 * (chi + chi.conj().T))[0])
            if min_eig < -DEFAULT_TOL.psd_eigenvalue:
                raise ValidationError(
                    f"chi has negative eigenvalue {min_eig:.3e}")
            tr_dev = abs(chi.trace() - 1.0)
            if tr_dev > DEFAULT_TOL.trace:
                raise ValidationError(
                    f"chi trace deviates from 1 by {tr_dev:.3e}")
        chi.setflags(write=False)
        self.chi = chi

    def __repr__(self) -> str:  # pragma: no cover
        return f"ProcessMatrix(trace={self.chi.trace():.6f})"


@dataclass(frozen=True)
class ProcessFidelityReport:
    """Process fidelity versus a rank-1 (unitary) target."""

    fidelity: float
    error: float
    uncertainty: float | None = None
    imag_residual: float = 0.0


@dataclass(frozen=True)
class CptpDiagnostics:
    min_eigenvalue: float
    hermiticity_deviation: float
    trace_deviation: float
    tp_residual: float

    def is_physical(self, tol_eig: float = DEFAULT_TOL.psd_eigenvalue,
                    tol: float = 1e-6) -> bool:
        return (self.min_eigenvalue >= -tol_eig
                and self.hermiticity_deviation <= tol
                and self.trace_deviation <= tol
                and self.tp_residual <= tol)


def identity_chi() -> ProcessMatrix:
    chi = np.zeros((16, 16), dtype=complex)
    chi[0, 0] = 1.0
    return ProcessMatrix(chi)


def unitary_to_chi(u: np.ndarray, tol: float = DEFAULT_TOL.unitarity) -> ProcessMatrix:
    """Rank-1 chi of the map rho -> U rho U^dag."""
    u = np.asarray(u, dtype=complex)
    require_unitary(u, tol, name="input unitary")
    c = np.einsum("kab,ba->k", _P, u) / 4.0
    chi = np.outer(c.conj(), c)
    return ProcessMatrix(chi)


def _require_density_matrix(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError(f"density matrix must be 4x4, got {rho.shape}")
    require_hermitian(rho, DEFAULT_TOL.trace, name="density matrix")
    if abs(rho.trace() - 1.0) > DEFAULT_TOL.trace:
        raise ValidationError(
            f"density matrix trace deviates from 1 by {abs(rho.trace() - 1):.3e}")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -DEFAULT_TOL.trace:
        raise ValidationError("density matrix has a negative eigenvalue")
    return rho


def apply_process(chi: ProcessMatrix, rho: np.ndarray) -> np.ndarray:
    """E(rho) = sum_mn chi[m,n] P_n rho P_m^dag."""
    rho = _require_density_matrix(rho)
    pn_rho = np.einsum("nab,bc->nac", _P, rho)
    return np.einsum("mn,nac,mdc->ad", chi.chi, pn_rho, _P.conj())


def process_fidelity(chi_exp: ProcessMatrix,
                     chi_ideal: ProcessMatrix) -> ProcessFidelityReport:
    """F_p = Tr(chi_exp chi_ideal), clamped to [0, 1]; target must be rank 1."""
    eigs = np.linalg.eigvalsh(chi_ideal.chi)
    if eigs[-2] > 1e-6:
        raise ValidationError(
            f"chi_ideal is not rank 1 (second eigenvalue {eigs[-2]:.3e})")
    raw = np.trace(chi_exp.chi @ chi_ideal.chi)
    fid = float(np.clip(raw.real, 0.0, 1.0))
    return ProcessFidelityReport(fidelity=fid, error=1.0 - fid,
                                 imag_residual=float(abs(raw.imag)))


def _chi_to_superop(chi: np.ndarray) -> np.ndarray:
    return np.einsum("mn,mnab->ab", chi, _W)


def _superop_to_chi(s: np.ndarray) -> np.ndarray:
    return np.einsum("mnba,ba->mn", _W.conj(), s) / 16.0


def compose(first: ProcessMatrix, second: ProcessMatrix) -> ProcessMatrix:
    """chi of rho -> E_second(E_first(rho)), via the superoperator product."""
    s = _chi_to_superop(second.chi) @ _chi_to_superop(first.chi)
    chi = _superop_to_chi(s)
    chi = 0.5 * (chi + chi.conj().T)
    return ProcessMatrix(chi)


def extract_error_process(chi_meas: ProcessMatrix, u_ideal: np.ndarray,
                          error_first: bool = True) -> ProcessMatrix:
    """Error process chi_tilde with E_meas = U_ideal o E_tilde.

    With ``error_first`` (the default) the error acts before the ideal gate:
    E_meas(rho) = U E_tilde(rho) U^dag, which makes chi_tilde[II,II] equal the
    process fidelity versus the ideal gate.  ``error_first=False`` selects the
    opposite convention E_meas = E_tilde o U_ideal.
    """
    u_ideal = np.asarray(u_ideal, dtype=complex)
    require_unitary(u_ideal, name="u_ideal")
    chi_u_dag = unitary_to_chi(u_ideal.conj().T)
    if error_first:
        return compose(chi_meas, chi_u_dag)
    return compose(chi_u_dag, chi_meas)


def validate_cptp(chi: ProcessMatrix) -> CptpDiagnostics:
    """Physicality diagnostics; never raises."""
    c = chi.chi
    herm = hermiticity_deviation(c)
    ch = 0.5 * (c + c.conj().T)
    min_eig = float(np.linalg.eigvalsh(ch)[0])
    tr_dev = float(abs(c.trace() - 1.0))
    # Trace preservation: sum_mn chi[m,n] P_m^dag P_n = I.
    tp = np.einsum("mn,mab,nbc->ac", c, _P.conj().transpose(0, 2, 1), _P)
    tp_res = float(np.max(np.abs(tp - np.eye(4))))
    return CptpDiagnostics(min_eigenvalue=min_eig, hermiticity_deviation=herm,
                           trace_deviation=tr_dev, tp_residual=tp_res)


def chi_to_choi(chi: np.ndarray) -> np.ndarray:
    """16x16 Choi matrix (input (x) output ordering, trace 4 for TP maps)."""
    chi = np.asarray(chi, dtype=complex)
    return _V @ chi.T @ _V.conj().T


def choi_to_chi(choi: np.ndarray) -> np.ndarray:
    choi = np.asarray(choi, dtype=complex)
    return (_V.conj().T @ choi @ _V / 16.0).T


def chi_choi_roundtrip(chi: ProcessMatrix) -> ProcessMatrix:
    """chi -> Choi -> chi; identity within 1e-10 by construction."""
    return ProcessMatrix(choi_to_chi(chi_to_choi(chi.chi)))


def project_to_physical(chi: np.ndarray) -> np.ndarray:
    """Hermitize, clip negative eigenvalues, renormalize trace to 1."""
    chi = 0.5 * (np.asarray(chi, dtype=complex) + np.asarray(chi).conj().T)
    chi = nearest_psd(chi, tol=np.inf)
    tr = chi.trace().real
    if tr <= 0:
        raise ValidationError("chi has nonpositive trace after projection")
    return chi / tr


# ---------------------------------------------------------------------------
# JSON export/import
# ---------------------------------------------------------------------------

def chi_to_json_dict(chi: ProcessMatrix | np.ndarray) -> dict:
    c = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi, dtype=complex)
    return {
        "basis_order": pauli_labels_2q(),
        "re": c.real.tolist(),
        "im": c.imag.tolist(),
        "convention": CHI_CONVENTION,
    }


def chi_from_json_dict(doc: dict, validate: bool = True) -> ProcessMatrix:
    if doc.get("convention") != CHI_CONVENTION:
        raise ValidationError(
            f"unsupported chi convention {doc.get('convention')!r}")
    if doc.get("basis_order") != pauli_labels_2q():
        raise ValidationError("unexpected basis_order in chi document")
    chi = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    return ProcessMatrix(chi, validate=validate)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_chi(path: str, chi: ProcessMatrix | np.ndarray) -> None:
    atomic_write_text(path, json.dumps(chi_to_json_dict(chi)))


def load_chi(path: str, validate: bool = True) -> ProcessMatrix:
    with open(path) as fh:
        return chi_from_json_dict(json.load(fh), validate=validate)
