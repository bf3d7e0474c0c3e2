"""Margin-propagation (MP) constraint solver.

The MP output ``z`` of an operand vector ``o`` under constraint ``gamma`` is
the unique root of ``sum_i h(o_i - z) = gamma`` for a non-negative,
non-decreasing, convex nonlinearity ``h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import ConvergenceError, DegenerateGradientError, InputDomainError

__all__ = [
    "Nonlinearity",
    "MpProblem",
    "MpSolution",
    "RELU",
    "mp_solve",
    "mp_solve_batch",
    "mp_gradient",
    "DEFAULT_TOL",
    "symmetric",
]

DEFAULT_TOL = 1e-10
BRACKET_WIDTH = 1e-12
_SOFTPLUS_LINEAR = 30.0
_MAX_EXPANSIONS = 200
_NEWTON_STEPS = 4


@dataclass(frozen=True)
class Nonlinearity:
    """Monotone convex nonlinearity ``h`` used by the MP equation.

    Parameters
    ----------
    kind : {'relu', 'power', 'softplus'}
        ``relu`` is ``max(0, u)``; ``power`` is ``max(0, u) ** (1 / (eta - 1))``;
        ``softplus`` is ``T * log(1 + exp(u / T))``.
    eta : float
        Entropy index, used only by ``power``. Must lie in (1, 2] so that
        the exponent is at least one (convex branch).
    temperature : float
        Smoothing scale ``T`` for ``softplus``.
    """

    kind: str = "relu"
    eta: float = 2.0
    temperature: float = 0.1

    def __post_init__(self):
        if self.kind not in ("relu", "power", "softplus"):
            raise InputDomainError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power" and not (1.0 < self.eta <= 2.0):
            raise InputDomainError(f"power nonlinearity needs 1 < eta <= 2, got {self.eta}")
        if self.kind == "softplus" and not (self.temperature > 0 and np.isfinite(self.temperature)):
            raise InputDomainError("softplus temperature must be positive and finite")

    @property
    def exponent(self) -> float:
        """Power applied to the positive part (1 for relu)."""
        if self.kind == "power":
            return 1.0 / (self.eta - 1.0)
        return 1.0

    @property
    def smooth(self) -> bool:
        return self.kind == "softplus" or (self.kind == "power" and self.exponent > 1.0)

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "relu":
            return np.maximum(u, 0.0)
        if self.kind == "power":
            p = self.exponent
            base = np.maximum(u, 0.0)
            return base if p == 1.0 else base**p
        t = self.temperature
        s = u / t
        with np.errstate(over="ignore"):
            soft = t * np.log1p(np.exp(np.minimum(s, _SOFTPLUS_LINEAR)))
        return np.where(s > _SOFTPLUS_LINEAR, u, soft)

    __call__ = evaluate

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "relu":
            return (u > 0).astype(float)
        if self.kind == "power":
            p = self.exponent
            base = np.maximum(u, 0.0)
            if p == 1.0:
                return (u > 0).astype(float)
            return p * base ** (p - 1.0)
        return expit(u / self.temperature)

    def second_derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "relu":
            return np.zeros_like(u)
        if self.kind == "power":
            p = self.exponent
            if p == 1.0:
                return np.zeros_like(u)
            pos = u > 0
            out = np.zeros_like(u)
            out[pos] = p * (p - 1.0) * u[pos] ** (p - 2.0)
            return out
        s = expit(u / self.temperature)
        return s * (1.0 - s) / self.temperature


RELU = Nonlinearity("relu")


@dataclass(frozen=True)
class MpProblem:
    """Operand vector and normalization constraint of one MP solve."""

    operands: tuple
    gamma: float

    def __init__(self, operands: Sequence[float], gamma: float):
        ops = np.asarray(operands, dtype=float).ravel()
        if ops.size == 0:
            raise InputDomainError("MP operands must be non-empty")
        if not np.all(np.isfinite(ops)):
            raise InputDomainError("MP operands must be finite")
        if not (np.isfinite(gamma) and gamma > 0):
            raise InputDomainError(f"gamma must be finite and positive, got {gamma}")
        object.__setattr__(self, "operands", tuple(ops.tolist()))
        object.__setattr__(self, "gamma", float(gamma))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.operands, dtype=float)


@dataclass(frozen=True)
class MpSolution:
    z: float
    residual: float
    iterations: int
    tol: float = field(default=DEFAULT_TOL, compare=False)


def _lhs(ops, z, nl):
    return nl.evaluate(ops - z[:, None]).sum(axis=1)


def _slope(ops, z, nl):
    return nl.derivative(ops - z[:, None]).sum(axis=1)


def _solve_rows(ops, gamma, nl, tol, lo=None, hi=None):
    """Vectorized bracket + bisection + guarded Newton polish.

    ``tol`` bounds the absolute residual and is also the stopping rule, so
    a loose tolerance yields a correspondingly loose ``z``.

    Returns ``(z, residual, iterations)`` arrays, one entry per row.
    """
    rows = ops.shape[0]
    if lo is None:
        lo = ops.min(axis=1) - gamma - 1.0
    if hi is None:
        hi = ops.max(axis=1)
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    iterations = np.zeros(rows, dtype=int)

    # expand until LHS(lo) >= gamma >= LHS(hi)
    step = np.maximum(gamma, 1.0)
    for _ in range(_MAX_EXPANSIONS):
        bad = _lhs(ops, lo, nl) < gamma
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step = np.where(bad, 2 * step, step)
    else:
        raise ConvergenceError("failed to bracket MP root from below", (float(lo[0]), float(hi[0])))
    step = np.maximum(gamma, 1.0)
    for _ in range(_MAX_EXPANSIONS):
        bad = _lhs(ops, hi, nl) > gamma
        if not bad.any():
            break
        hi = np.where(bad, hi + step, hi)
        step = np.where(bad, 2 * step, step)
    else:
        raise ConvergenceError("failed to bracket MP root from above", (float(lo[0]), float(hi[0])))

    # bisection; a row stops once its residual meets ``tol``
    z = np.full(rows, np.nan)
    done = np.zeros(rows, dtype=bool)
    while True:
        active = ~done & ((hi - lo) > BRACKET_WIDTH)
        mid = 0.5 * (lo + hi)
        # rows whose midpoint no longer splits the bracket (float resolution)
        active &= (mid > lo) & (mid < hi)
        if not active.any():
            break
        res_mid = _lhs(ops, mid, nl) - gamma
        hit = active & (np.abs(res_mid) <= tol)
        z = np.where(hit, mid, z)
        done |= hit
        step_rows = active & ~hit
        above = res_mid > 0
        lo = np.where(step_rows & above, mid, lo)
        hi = np.where(step_rows & ~above, mid, hi)
        iterations += active

    z = np.where(done, z, 0.5 * (lo + hi))
    res = _lhs(ops, z, nl) - gamma
    # Newton polish for rows the bracket width alone could not settle;
    # exact inside a linear segment for relu
    for _ in range(_NEWTON_STEPS):
        need = np.abs(res) > tol
        if not need.any():
            break
        slope = _slope(ops, z, nl)
        ok = need & (slope > 0)
        z_new = np.where(ok, z + res / np.where(slope > 0, slope, 1.0), z)
        inside = (z_new >= lo - BRACKET_WIDTH) & (z_new <= hi + BRACKET_WIDTH)
        res_new = _lhs(ops, z_new, nl) - gamma
        better = ok & inside & (np.abs(res_new) < np.abs(res))
        if not better.any():
            break
        z = np.where(better, z_new, z)
        res = np.where(better, res_new, res)
        iterations += better

    floor = 64 * np.finfo(float).eps * (gamma + np.abs(ops).sum(axis=1))
    failed = np.abs(res) > np.maximum(tol, floor)
    if failed.any():
        i = int(np.flatnonzero(failed)[0])
        raise ConvergenceError(
            f"MP residual {abs(res[i]):.3e} exceeds tolerance {tol:.1e}",
            (float(lo[i]), float(hi[i])),
        )
    return z, res, iterations


def mp_solve(problem: MpProblem, nl: Nonlinearity = RELU, tol: float = DEFAULT_TOL,
             bracket: tuple | None = None) -> MpSolution:
    """Solve ``sum_i h(o_i - z) = gamma`` for ``z``.

    Parameters
    ----------
    problem : MpProblem
    nl : Nonlinearity
    tol : float
        Bound on the absolute constraint residual.
    bracket : (float, float), optional
        Initial search interval. Expanded automatically when it does not
        contain the root, so any finite pair is valid.

    Returns
    -------
    MpSolution

    Raises
    ------
    InputDomainError
        Non-positive ``tol``.
    ConvergenceError
        The root could not be bracketed or the residual target was missed.
    """
    if not (tol > 0):
        raise InputDomainError("tol must be positive")
    ops = problem.as_array()[None, :]
    gamma = np.array([problem.gamma])
    lo = hi = None
    if bracket is not None:
        lo, hi = (np.array([float(b)]) for b in sorted(bracket))
    z, res, it = _solve_rows(ops, gamma, nl, tol, lo, hi)
    return MpSolution(float(z[0]), float(res[0]), int(it[0]), tol)


def mp_solve_batch(operands, gamma, nl: Nonlinearity = RELU, tol: float = DEFAULT_TOL,
                   chunk: int = 4_000_000) -> np.ndarray:
    """Row-wise MP solve for a 2-D operand array.

    ``gamma`` may be a scalar or one value per row. Rows are processed in
    chunks of at most ``chunk`` operand entries to bound memory.
    """
    ops = np.atleast_2d(np.asarray(operands, dtype=float))
    if not np.all(np.isfinite(ops)):
        raise InputDomainError("MP operands must be finite")
    g = np.broadcast_to(np.asarray(gamma, dtype=float), (ops.shape[0],))
    if not np.all(np.isfinite(g) & (g > 0)):
        raise InputDomainError("gamma must be finite and positive")
    rows = max(1, chunk // max(ops.shape[1], 1))
    out = np.empty(ops.shape[0])
    for start in range(0, ops.shape[0], rows):
        sl = slice(start, start + rows)
        out[sl] = _solve_rows(ops[sl], g[sl], nl, tol)[0]
    return out


def mp_gradient(problem: MpProblem, nl: Nonlinearity, z: float) -> np.ndarray:
    """Gradient of the symmetric-operand MP output.

    ``problem.operands`` holds the ``n`` underlying values ``o``; the solved
    operand vector is ``[o, -o]`` and ``z`` its MP output. Returns
    ``dz/do_j`` for each underlying value.

    Raises
    ------
    DegenerateGradientError
        When every derivative ``h'`` vanishes at ``z``.
    """
    o = problem.as_array()
    dp = nl.derivative(o - z)
    dm = nl.derivative(-o - z)
    denom = float(np.sum(dp + dm))
    if denom < 1e-15:
        raise DegenerateGradientError("all nonlinearity derivatives vanish at z")
    return (dp - dm) / denom


def symmetric(values) -> np.ndarray:
    """Return ``[v, -v]`` along the last axis."""
    v = np.asarray(values, dtype=float)
    return np.concatenate([v, -v], axis=-1)
