"""Compressive spectrum sensing with pseudo-random templates and CoSaMP."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..correlator import make_rng
from ..errors import InputDomainError
from .backend import inner_products

RIDGE = 1e-12
RESIDUAL_TOL = 1e-6
MAX_ITER = 50


@dataclass(frozen=True)
class CompressiveConfig:
    """Measurement setup; the record length equals ``bins``."""

    k_templates: int
    sparsity: int
    bins: int
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.sparsity < self.k_templates < self.bins):
            raise InputDomainError("need 0 < sparsity < k_templates < bins")

    @property
    def n(self) -> int:
        return self.bins


@dataclass(frozen=True)
class CosampResult:
    estimate: np.ndarray
    converged: bool
    iterations: int
    residual: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.estimate)


def dictionary(bins: int, n: int | None = None) -> np.ndarray:
    """Cosine synthesis dictionary ``Psi[i, k] = cos(pi k i / bins)``."""
    n = bins if n is None else n
    return np.cos(np.pi * np.outer(np.arange(n), np.arange(bins)) / bins)


def make_templates(config: CompressiveConfig, seed: int | None = None) -> np.ndarray:
    """``K`` templates: random DFT-grid cosine rows modulated by random chips."""
    rng = make_rng(config.seed if seed is None else seed, 11)
    rows = rng.choice(config.bins, size=config.k_templates, replace=False)
    chips = rng.choice([-1.0, 1.0], size=(config.k_templates, config.n))
    return chips * np.cos(np.pi * np.outer(rows, np.arange(config.n)) / config.bins)


def sensing_matrix(config: CompressiveConfig, seed: int | None = None) -> np.ndarray:
    """Map from sparse spectrum to measurements, ``T Psi / n``."""
    return make_templates(config, seed) @ dictionary(config.bins, config.n) / config.n


def synthesize(spectrum, bins: int) -> np.ndarray:
    """Time-domain record of a spectrum in the cosine dictionary."""
    return dictionary(bins) @ np.asarray(spectrum, dtype=float)


def plant_sparse(config: CompressiveConfig, seed: int) -> np.ndarray:
    """Sparse spectrum with random support and amplitudes ``+-[1, 2]``."""
    rng = make_rng(seed, 12)
    s = np.zeros(config.bins)
    support = rng.choice(config.bins, size=config.sparsity, replace=False)
    s[support] = rng.uniform(1.0, 2.0, config.sparsity) * rng.choice([-1.0, 1.0], config.sparsity)
    return s


def measure(signal, config: CompressiveConfig, backend: str = "mac", calibration=None,
            seed: int | None = None) -> np.ndarray:
    """Correlator measurements ``mean(x t_j)`` for every template."""
    return inner_products(signal, make_templates(config, seed), backend, calibration)


def _lstsq(a, y):
    g = a.T @ a
    g[np.diag_indices_from(g)] += RIDGE
    return np.linalg.solve(g, a.T @ y)


def cosamp(a, y, sparsity: int, tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER) -> CosampResult:
    """CoSaMP on a dense sensing matrix.

    Each pass merges the ``2s`` largest proxy entries with the current
    support, solves least squares there and prunes to the ``s`` largest.
    Stops when the residual norm drops below ``tol`` or after ``max_iter``
    passes; the best iterate seen is returned.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    cols = a.shape[1]
    x = np.zeros(cols)
    residual = y.copy()
    best = (np.linalg.norm(residual), x.copy())
    if best[0] < tol:
        return CosampResult(x, True, 0, float(best[0]))
    for it in range(1, max_iter + 1):
        proxy = np.abs(a.T @ residual)
        omega = np.argsort(proxy)[::-1][: 2 * sparsity]
        support = np.union1d(omega, np.flatnonzero(x))
        b = np.zeros(cols)
        b[support] = _lstsq(a[:, support], y)
        keep = np.argsort(np.abs(b))[::-1][:sparsity]
        x = np.zeros(cols)
        x[keep] = b[keep]
        residual = y - a @ x
        norm = np.linalg.norm(residual)
        if norm < best[0]:
            best = (norm, x.copy())
        if norm < tol:
            return CosampResult(x, True, it, float(norm))
    return CosampResult(best[1], False, max_iter, float(best[0]))


def cosamp_recover(measurements, template_matrix_seed: int, config: CompressiveConfig) -> CosampResult:
    """Recover the sparse spectrum behind correlator measurements."""
    y = np.asarray(measurements, dtype=float)
    if y.shape != (config.k_templates,):
        raise InputDomainError(f"expected {config.k_templates} measurements, got {y.size}")
    a = sensing_matrix(config, template_matrix_seed)
    return cosamp(a, y, config.sparsity)


def reconstruction_snr_db(truth, estimate) -> float:
    t = np.asarray(truth, dtype=float)
    err = np.sum((np.asarray(estimate, dtype=float) - t) ** 2)
    return float("inf") if err == 0 else float(10 * np.log10(np.sum(t * t) / err))
