"""Tsallis maximum-entropy mesostate ensembles and their MP equivalents.

For one sign of the ensemble the wells sit at ``o_i = x_i + y_i`` (plus) or
``o_i = x_i - y_i`` (minus), each paired with its mirror ``-o_i``. With
normalization multiplier ``alpha`` and energy multiplier ``beta`` the
stationary occupancies are::

    p_i = [(eta - 1) (alpha + beta o_i) / eta]_+ ** (1 / (eta - 1))
    q_i = [(eta - 1) (alpha - beta o_i) / eta]_+ ** (1 / (eta - 1))

Factoring ``|beta|`` out of the bracket turns the normalization constraint
into an MP equation on ``[o, -o]`` with ``h(u) = [u]_+ ** (1/(eta-1))``,
threshold ``z = -alpha / beta`` and
``gamma = ((eta - 1) |beta| / eta) ** (1 / (1 - eta))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InputDomainError, UnsupportedIndexError
from .mp import MpProblem, Nonlinearity, mp_solve, symmetric

__all__ = [
    "EnergyTarget",
    "MesostateEnsemble",
    "tsallis_entropy",
    "maxent_distribution",
    "solve_multipliers",
    "maxent_to_mp_params",
    "mp_to_maxent_params",
    "solve_ensemble",
    "ensemble_energy",
]

_SIGNS = ("plus", "minus")


@dataclass(frozen=True)
class EnergyTarget:
    u_plus: float
    u_minus: float
    e0: float = 0.0

    def __post_init__(self):
        for v in (self.u_plus, self.u_minus, self.e0):
            if not np.isfinite(v):
                raise InputDomainError("energy targets must be finite")
        if self.u_plus < 0 or self.u_minus < 0:
            raise InputDomainError("ensemble energies must be non-negative")

    def net(self, sign: str) -> float:
        return (self.u_plus if sign == "plus" else self.u_minus) - self.e0


@dataclass(frozen=True)
class MesostateEnsemble:
    p_plus: np.ndarray
    q_plus: np.ndarray
    p_minus: np.ndarray
    q_minus: np.ndarray
    alpha_plus: float
    beta_plus: float
    alpha_minus: float
    beta_minus: float
    eta: float

    def __post_init__(self):
        for name in ("p_plus", "q_plus", "p_minus", "q_minus"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v < 0):
                raise InputDomainError(f"{name} has negative probabilities")
            object.__setattr__(self, name, v)

    def normalization_residuals(self):
        return (float(np.sum(self.p_plus + self.q_plus) - 1.0),
                float(np.sum(self.p_minus + self.q_minus) - 1.0))


def _check_sign(sign):
    if sign not in _SIGNS:
        raise InputDomainError(f"sign must be 'plus' or 'minus', got {sign!r}")


def _check_eta(eta):
    if eta == 1.0:
        raise UnsupportedIndexError("eta = 1 (Shannon) maps to log-sum-exp and is not supported")
    if not (1.0 < eta <= 2.0):
        raise UnsupportedIndexError(f"eta must lie in (1, 2], got {eta}")


def _operands(x, y, sign):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise InputDomainError("x and y must be non-empty 1-D arrays of equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputDomainError("inputs must be finite")
    _check_sign(sign)
    return x + y if sign == "plus" else x - y


def tsallis_entropy(probabilities, eta: float) -> float:
    """Tsallis entropy ``(1 - sum p^eta) / (eta - 1)``; Shannon at ``eta = 1``."""
    p = np.asarray(probabilities, dtype=float).ravel()
    if np.any(p < 0):
        raise InputDomainError("probabilities must be non-negative")
    if p.sum() > 1 + 1e-8:
        raise InputDomainError("probabilities sum above one")
    if eta < 1:
        raise InputDomainError("eta must be >= 1")
    if eta == 1.0:
        nz = p[p > 0]
        return float(-np.sum(nz * np.log(nz)))
    return float((1.0 - np.sum(p**eta)) / (eta - 1.0))


def maxent_distribution(x, y, eta: float, alpha: float, beta: float, sign: str = "plus"):
    """Unnormalized stationary occupancies ``(p, q)`` for given multipliers."""
    _check_eta(eta)
    if beta == 0 or not np.isfinite(beta) or not np.isfinite(alpha):
        raise InputDomainError("beta must be non-zero and multipliers finite")
    o = _operands(x, y, sign)
    k = (eta - 1.0) / eta
    e = 1.0 / (eta - 1.0)
    p = np.maximum(k * (alpha + beta * o), 0.0) ** e
    q = np.maximum(k * (alpha - beta * o), 0.0) ** e
    return p, q


def maxent_to_mp_params(alpha: float, beta: float, eta: float):
    """MP threshold and constraint ``(z, gamma)`` equivalent to ``(alpha, beta)``.

    Returns ``z = -alpha / beta``. This is the MP threshold whenever
    ``beta > 0``, which holds for every non-negative net energy. A negative
    ``beta`` (only reachable with ``U < E0``) swaps ``p`` and ``q``, and
    the matching MP threshold is then ``-alpha / |beta|``.
    """
    _check_eta(eta)
    if beta == 0:
        raise InputDomainError("beta must be non-zero")
    gamma = ((eta - 1.0) * abs(beta) / eta) ** (1.0 / (1.0 - eta))
    return -alpha / beta, gamma


def mp_to_maxent_params(z: float, gamma: float, eta: float):
    """Inverse of :func:`maxent_to_mp_params` on the ``beta > 0`` branch."""
    _check_eta(eta)
    beta = eta / (eta - 1.0) * gamma ** (1.0 - eta)
    return -z * beta, beta


def _power(eta):
    return Nonlinearity("power", eta=eta)


def _energy_at_gamma(o, gamma, eta, nl):
    """Energy ``sum o (p - q)`` of the normalized distribution at ``gamma``."""
    sol = mp_solve(MpProblem(symmetric(o), gamma), nl, tol=min(1e-10, 1e-12 * gamma))
    h = nl.evaluate
    p = h(o - sol.z) / gamma
    q = h(-o - sol.z) / gamma
    return float(np.sum(o * (p - q))), sol.z


def ensemble_energy(x, y, p, q, sign: str = "plus") -> float:
    o = _operands(x, y, sign)
    return float(np.sum(o * (np.asarray(p) - np.asarray(q))))


def solve_multipliers(x, y, eta: float, target: EnergyTarget, sign: str = "plus",
                      tol: float = 1e-12, max_iter: int = 400):
    """Lagrange multipliers meeting normalization and the energy constraint.

    Nested bisection: the outer loop bisects ``log gamma`` on the energy
    constraint, the inner MP solve fixes ``z`` (hence ``alpha / beta``) for
    that ``gamma``. The energy is largest (``max |o|``) as ``gamma -> 0`` and
    decays to zero as ``gamma -> inf``.

    Returns
    -------
    (alpha, beta) : tuple of float
        ``beta`` carries the sign of the net energy ``U - E0``; zero net
        energy gives ``beta = 0`` with the uniform distribution.

    Raises
    ------
    InfeasibleError
        ``|U - E0|`` is at least the largest achievable energy ``max |o|``.
    """
    _check_eta(eta)
    o = _operands(x, y, sign)
    u = target.net(sign)
    n = o.size
    k = (eta - 1.0) / eta
    if u == 0.0:
        # beta = 0: uniform occupancy 1 / 2N fixes alpha
        return (1.0 / (2 * n)) ** (eta - 1.0) / k, 0.0
    u_max = float(np.max(np.abs(o)))
    if abs(u) >= u_max * (1 - 1e-12):
        raise InfeasibleError(f"|U - E0| = {abs(u):.6g} not below the maximum achievable energy {u_max:.6g}")

    # energies of the sign-flipped wells mirror each other, so solve for |u|
    # and flip beta at the end
    au = abs(u)
    nl = _power(eta)
    lo, hi = -1.0, 1.0  # log10(gamma)
    for _ in range(200):
        if _energy_at_gamma(o, 10.0**lo, eta, nl)[0] > au:
            break
        lo -= 2.0
    else:
        raise InfeasibleError("energy target not reachable at small gamma")
    for _ in range(200):
        if _energy_at_gamma(o, 10.0**hi, eta, nl)[0] < au:
            break
        hi += 2.0
    else:
        raise InfeasibleError("energy target not reachable at large gamma")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        e, _ = _energy_at_gamma(o, 10.0**mid, eta, nl)
        if abs(e - au) <= tol or hi - lo < 1e-15:
            break
        if e > au:
            lo = mid
        else:
            hi = mid
    gamma = 10.0**mid
    _, z = _energy_at_gamma(o, gamma, eta, nl)
    alpha, beta = mp_to_maxent_params(z, gamma, eta)
    return (alpha, beta) if u > 0 else (alpha, -beta)


def solve_ensemble(x, y, eta: float, target: EnergyTarget) -> MesostateEnsemble:
    """Solve both signs and assemble the full mesostate ensemble."""
    parts = {}
    for sign in _SIGNS:
        alpha, beta = solve_multipliers(x, y, eta, target, sign)
        if beta == 0.0:
            n = np.asarray(x).size
            p = q = np.full(n, 1.0 / (2 * n))
        else:
            p, q = maxent_distribution(x, y, eta, alpha, beta, sign)
        parts[sign] = (p, q, alpha, beta)
    pp, qp, ap, bp = parts["plus"]
    pm, qm, am, bm = parts["minus"]
    return MesostateEnsemble(pp, qp, pm, qm, ap, bp, am, bm, eta)
