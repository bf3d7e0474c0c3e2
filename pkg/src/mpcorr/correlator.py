"""MP correlator, MAC baseline and correlated test-input generation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputDomainError, NormalizationError
from .mp import RELU, DEFAULT_TOL, MpProblem, Nonlinearity, mp_solve, mp_solve_batch

__all__ = [
    "InputPair",
    "CorrelationEstimate",
    "build_operands",
    "mp_correlate",
    "mp_correlate_batch",
    "mac_correlate",
    "gen_correlated",
    "gen_correlated_batch",
    "gen_sinusoid_pair",
    "standardize",
    "make_rng",
]

RANDOM_DISTRIBUTIONS = ("gaussian", "uniform")


def make_rng(seed, *stream) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional sub-stream index path.

    Sub-streams let trial farms partition work by index while staying
    independent of how the work is scheduled.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class InputPair:
    x: np.ndarray
    y: np.ndarray
    seed: int = 0
    distribution: str = "gaussian"
    phase_deg: Optional[float] = None
    target_r: Optional[float] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise InputDomainError("x and y must be non-empty 1-D arrays of equal length")
        if self.distribution not in (*RANDOM_DISTRIBUTIONS, "sinusoid"):
            raise InputDomainError(f"unknown distribution {self.distribution!r}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def is_random(self) -> bool:
        return self.distribution in RANDOM_DISTRIBUTIONS


@dataclass(frozen=True)
class CorrelationEstimate:
    raw_output: float
    method: str
    r_hat: Optional[float] = None

    def calibrated(self, r_hat: float) -> "CorrelationEstimate":
        return CorrelationEstimate(self.raw_output, self.method, float(r_hat))


def build_operands(x, y):
    """Symmetric operand families ``([x+y, -(x+y)], [x-y, y-x])``.

    Works on the last axis, so batches of shape ``(B, N)`` give ``(B, 2N)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InputDomainError(f"length mismatch: {x.shape} vs {y.shape}")
    s = x + y
    d = x - y
    return np.concatenate([s, -s], axis=-1), np.concatenate([d, -d], axis=-1)


def mp_correlate(pair: InputPair, gamma_plus: float, gamma_minus: float | None = None,
                 nl: Nonlinearity = RELU, tol: float = DEFAULT_TOL) -> CorrelationEstimate:
    """Static MP correlator output ``z+ - z-``."""
    if gamma_minus is None:
        gamma_minus = gamma_plus
    o_plus, o_minus = build_operands(pair.x, pair.y)
    z_plus = mp_solve(MpProblem(o_plus, gamma_plus), nl, tol).z
    z_minus = mp_solve(MpProblem(o_minus, gamma_minus), nl, tol).z
    return CorrelationEstimate(z_plus - z_minus, "mp_static")


def mp_correlate_batch(x, y, gamma_plus, gamma_minus=None, nl: Nonlinearity = RELU,
                       tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized :func:`mp_correlate` over rows of ``(B, N)`` arrays."""
    if gamma_minus is None:
        gamma_minus = gamma_plus
    o_plus, o_minus = build_operands(np.atleast_2d(x), np.atleast_2d(y))
    return mp_solve_batch(o_plus, gamma_plus, nl, tol) - mp_solve_batch(o_minus, gamma_minus, nl, tol)


def standardize(v, axis=-1):
    """Zero-mean, unit-variance copy of ``v`` along ``axis``."""
    v = np.asarray(v, dtype=float)
    mu = v.mean(axis=axis, keepdims=True)
    sd = v.std(axis=axis, keepdims=True)
    if np.any(sd <= 1e-12 * np.maximum(1.0, np.abs(mu))):
        raise NormalizationError("cannot standardize a zero-variance vector")
    return (v - mu) / sd


def mac_correlate(pair: InputPair) -> CorrelationEstimate:
    """Empirical correlation ``(1/N) sum x_i y_i`` of standardized inputs.

    Standardizing makes the result the Pearson coefficient. Whole-cycle
    sinusoids already have zero mean, so for them it only rescales to
    unit power and the estimate is ``cos(phase)``.
    """
    r = float(np.dot(standardize(pair.x), standardize(pair.y)) / pair.n)
    return CorrelationEstimate(r, "mac", r)


def _draw(rng, distribution, size):
    if distribution == "gaussian":
        return rng.standard_normal(size)
    if distribution == "uniform":
        # unit variance uniform on [-sqrt(3), sqrt(3)]
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size)
    raise InputDomainError(f"unknown distribution {distribution!r}")


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(np.abs(r) > 1):
        raise InputDomainError("correlation must lie in [-1, 1]")
    return r


def gen_correlated(r: float, n: int, distribution: str = "gaussian", seed: int = 0) -> InputPair:
    """Pair with ``X = S1`` and ``Y = r S1 + sqrt(1 - r^2) S2``."""
    r = float(_check_r(r))
    if n < 1:
        raise InputDomainError("n must be positive")
    rng = make_rng(seed)
    s1 = _draw(rng, distribution, n)
    s2 = _draw(rng, distribution, n)
    y = s1 if r == 1.0 else r * s1 + np.sqrt(1.0 - r * r) * s2
    return InputPair(s1, y, seed=seed, distribution=distribution, target_r=r)


def gen_correlated_batch(r, n: int, distribution: str = "gaussian", seed: int = 0,
                         stream: int = 0):
    """Batch of correlated pairs, one per entry of ``r``.

    Returns ``(x, y)`` arrays of shape ``(len(r), n)``. Row ``k`` is drawn
    from sub-stream ``(seed, stream, k)`` so any slice of the batch can be
    regenerated on its own.
    """
    r = np.atleast_1d(_check_r(r))
    x = np.empty((r.size, n))
    y = np.empty((r.size, n))
    for k, rk in enumerate(r):
        rng = make_rng(seed, stream, k)
        s1 = _draw(rng, distribution, n)
        s2 = _draw(rng, distribution, n)
        x[k] = s1
        y[k] = rk * s1 + np.sqrt(1.0 - rk * rk) * s2
    return x, y


def gen_sinusoid_pair(phase_deg: float, n: int, cycles: int = 1) -> InputPair:
    """Unit-amplitude cosines with a relative phase and whole cycles.

    Whole cycles make the sample correlation exactly ``cos(phase) / 2``,
    i.e. the normalized correlation is ``cos(phase)`` with no finite-length
    error.
    """
    if isinstance(cycles, bool) or int(cycles) != cycles or cycles < 1:
        raise InputDomainError("cycles must be a positive integer")
    if not (0.0 <= phase_deg <= 180.0):
        raise InputDomainError("phase must lie in [0, 180] degrees")
    if n < 2 * int(cycles) + 1:
        raise InputDomainError("n too small for the requested number of cycles")
    t = 2.0 * np.pi * int(cycles) * np.arange(n) / n
    x = np.cos(t)
    y = np.cos(t - np.deg2rad(phase_deg))
    return InputPair(x, y, distribution="sinusoid", phase_deg=float(phase_deg))
