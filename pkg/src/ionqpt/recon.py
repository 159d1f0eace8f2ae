"""Reconstruction of chi from shot datasets.

``linear_inversion`` solves the 256x256 linear system from frequencies and is
fast but can return unphysical (non-PSD) matrices when the data are noisy.
``mle_reconstruct`` maximizes the per-sequence binomial likelihood of the
both-bright counts over CPTP maps, parameterized by the Choi matrix, with a
diluted fixed-point iteration: J <- Lambda^-1 R_d J R_d Lambda^-1, where R_d
mixes the likelihood gradient operator R with the identity for stability and
Lambda = (Tr_out[R_d J R_d])^(1/2) (x) I enforces trace preservation each
step.  Only P2 enters the likelihood; P1/P0 counts are ignored by design.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ionsim import ShotDataset
from .process import (
    ProcessMatrix,
    choi_to_chi,
    process_fidelity,
    project_to_physical,
    unitary_to_chi,
)
from .protocol import design_matrix, sequence_operators
from .qmath import ValidationError

__all__ = [
    "IdentifiabilityError",
    "MleConfig",
    "MleResult",
    "LinearInversionDiagnostics",
    "BootstrapReport",
    "linear_inversion",
    "mle_reconstruct",
    "bootstrap_statistic",
    "bootstrap_fidelity",
    "max_threads",
]


class IdentifiabilityError(ValueError):
    """The plan's design matrix does not determine chi uniquely."""


@dataclass(frozen=True)
class MleConfig:
    """Controls of the iterative MLE scheme (the algorithm itself leaves
    stopping rules and stabilization unspecified; these are our choices)."""

    max_iterations: int = 20000
    log_likelihood_tolerance: float = 1e-10
    dilution: float = 0.5
    epsilon_probability_floor: float = 1e-12

    def __post_init__(self):
        if self.log_likelihood_tolerance <= 0:
            raise ValidationError("log_likelihood_tolerance must be > 0")
        if not (0.0 < self.dilution <= 1.0):
            raise ValidationError("dilution must be in (0, 1]")


@dataclass
class MleResult:
    iterations: int
    log_likelihoods: np.ndarray
    converged: bool

    @property
    def final_log_likelihood(self) -> float:
        return float(self.log_likelihoods[-1])


@dataclass(frozen=True)
class LinearInversionDiagnostics:
    min_eigenvalue: float
    raw_trace: float

    @property
    def physical(self) -> bool:
        return self.min_eigenvalue >= -1e-8


@dataclass
class BootstrapReport:
    replicas: int
    fidelity_samples: np.ndarray
    std: float


def linear_inversion(dataset: ShotDataset
                     ) -> tuple[ProcessMatrix, LinearInversionDiagnostics]:
    """Least-squares chi from frequencies; Hermitian and trace-normalized but
    not necessarily PSD."""
    a, h = design_matrix(dataset.plan)
    x, _, rank, _ = np.linalg.lstsq(a, dataset.frequencies, rcond=None)
    if rank < 256:
        raise IdentifiabilityError(
            f"plan design rank {rank} < 256; chi is not identifiable")
    chi = np.einsum("a,amn->mn", x, h)
    raw_trace = float(chi.trace().real)
    chi = chi / raw_trace
    min_eig = float(np.linalg.eigvalsh(0.5 * (chi + chi.conj().T))[0])
    return (ProcessMatrix(chi, validate=False),
            LinearInversionDiagnostics(min_eigenvalue=min_eig,
                                       raw_trace=raw_trace))


def _likelihood_operators(plan) -> tuple[np.ndarray, np.ndarray]:
    rho, mop = sequence_operators(plan)
    eye = np.eye(4, dtype=complex)
    e_bright = np.stack([np.kron(r.T, m) for r, m in zip(rho, mop)])
    e_other = np.stack([np.kron(r.T, eye - m) for r, m in zip(rho, mop)])
    return e_bright, e_other


def _partial_trace_out(g: np.ndarray) -> np.ndarray:
    return np.einsum("iaja->ij", g.reshape(4, 4, 4, 4))


def _psd_sqrt_inv(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 1e-14 * max(w[-1], 1e-300), None)
    return (v / np.sqrt(w)) @ v.conj().T


def mle_reconstruct(dataset: ShotDataset, config: MleConfig | None = None
                    ) -> tuple[ProcessMatrix, MleResult]:
    """CPTP maximum-likelihood chi for the dataset's both-bright counts."""
    config = config or MleConfig()
    plan = dataset.plan
    shots = plan.shots_per_sequence
    n2 = dataset.n2
    n_other = shots - n2
    total = float(shots * plan.n_sequences)
    e_bright, e_other = _likelihood_operators(plan)
    eps = config.epsilon_probability_floor
    d = config.dilution
    eye16 = np.eye(16, dtype=complex)
    eye4 = np.eye(4, dtype=complex)

    j = eye16 / 4.0  # maximally mixed channel, trivially CPTP
    log_ls: list[float] = []
    converged = False
    for _ in range(config.max_iterations):
        p = np.einsum("ab,kba->k", j, e_bright).real
        p = np.clip(p, eps, 1.0 - eps)
        log_l = float(n2 @ np.log(p) + n_other @ np.log1p(-p))
        if log_ls and abs(log_l - log_ls[-1]) < config.log_likelihood_tolerance:
            log_ls.append(log_l)
            converged = True
            break
        log_ls.append(log_l)
        r = (np.einsum("k,kab->ab", n2 / p, e_bright)
             + np.einsum("k,kab->ab", n_other / (1.0 - p), e_other))
        # Balance scales so that Tr(R_hat J) = Tr(I J) = 4 at the current J.
        r_d = (1.0 - d) * eye16 + d * (4.0 / total) * r
        g = r_d @ j @ r_d
        lam_inv = np.kron(_psd_sqrt_inv(_partial_trace_out(g)), eye4)
        j = lam_inv @ g @ lam_inv
        j = 0.5 * (j + j.conj().T)

    chi = project_to_physical(choi_to_chi(j))
    result = MleResult(iterations=len(log_ls), log_likelihoods=np.array(log_ls),
                       converged=converged)
    return ProcessMatrix(chi), result


def max_threads() -> int:
    """Internal parallelism cap from the QPT_THREADS environment variable."""
    try:
        return max(1, int(os.environ.get("QPT_THREADS", "1")))
    except ValueError:
        return 1


def bootstrap_statistic(dataset: ShotDataset, config: MleConfig | None,
                        statistic: Callable[[ProcessMatrix], float],
                        replicas: int, seed: int) -> np.ndarray:
    """Resample counts binomially, re-run MLE, evaluate a scalar statistic.

    Each replica draws n2' ~ Binomial(shots, n2/shots) from its own seeded
    stream, so results are independent of execution order.
    """
    if replicas < 2:
        raise ValidationError("bootstrap needs at least 2 replicas")
    plan = dataset.plan
    shots = plan.shots_per_sequence
    freq = dataset.frequencies

    def one(r: int) -> float:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        resampled = ShotDataset(plan=plan, noise=dataset.noise,
                                process=dataset.process, seed=None,
                                n2=rng.binomial(shots, freq).astype(float))
        chi, _ = mle_reconstruct(resampled, config)
        return float(statistic(chi))

    workers = max_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(one, range(replicas))))
    return np.array([one(r) for r in range(replicas)])


def bootstrap_fidelity(dataset: ShotDataset, config: MleConfig | None,
                       ideal_u: np.ndarray, replicas: int,
                       seed: int) -> BootstrapReport:
    """Bootstrap standard deviation of F_p versus a unitary target."""
    chi_ideal = unitary_to_chi(ideal_u)
    samples = bootstrap_statistic(
        dataset, config,
        lambda chi: process_fidelity(chi, chi_ideal).fidelity,
        replicas, seed)
    return BootstrapReport(replicas=replicas, fidelity_samples=samples,
                           std=float(np.std(samples, ddof=1)))
