"""Transient dynamics of the MP correlator core.

Each branch (``+`` and ``-``) is a source node loaded by ``R_sink || C_par``
and driven by the summed drain currents of its devices::

    C dV/dt = sum_j I_DS(a_j, V) - V / R,   I_DS = i0 * h(a_j - V)

where ``a_j`` are the effective operands ``+-(kg x_i + kb y_i)`` (plus branch)
or ``+-(kg x_i - kb y_i)`` (minus branch). The second-order variant puts a
series inductance between the device sources and the ``R || C`` load.

All integrators use classical RK4 with a fixed step and start from zero
output voltage.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .correlator import InputPair, make_rng
from .errors import InputDomainError, StabilityError
from .mp import RELU, Nonlinearity, _solve_rows

__all__ = [
    "DeviceModel",
    "CircuitParams",
    "Trajectory",
    "ids",
    "branch_operands",
    "static_fixed_point",
    "integrate_first_order",
    "integrate_first_order_batch",
    "integrate_relu_dynamics",
    "relu_dynamics_batch",
    "relu_params",
    "integrate_second_order",
    "integrate_second_order_batch",
    "transient_readout",
]

# real-axis stability limit of classical RK4 is ~2.785
_RK4_LIMIT = 2.5


@dataclass(frozen=True)
class DeviceModel:
    """Pluggable drain-current model ``i0 * h(kg (vg - vo) + kb (vb - vo) - vs)``.

    ``mismatch_sigma`` perturbs ``i0`` per device by a relative Gaussian
    factor drawn from ``mismatch_seed``; it is honored by the first-order
    integrator only.
    """

    h: Nonlinearity = RELU
    i0: float = 1e-4
    kappa_g: float = 1.0
    kappa_b: float = 1.0
    v_offset: float = 0.0
    mismatch_sigma: float = 0.0
    mismatch_seed: int = 0

    def __post_init__(self):
        if not (self.i0 > 0):
            raise InputDomainError("i0 must be positive")
        for k in (self.kappa_g, self.kappa_b):
            if not (0 < k <= 1):
                raise InputDomainError("coupling coefficients must lie in (0, 1]")
        if not (0 <= self.mismatch_sigma <= 0.05):
            raise InputDomainError("mismatch sigma must lie in [0, 0.05]")

    def device_gains(self, n_devices: int) -> np.ndarray:
        if self.mismatch_sigma == 0:
            return np.full(n_devices, self.i0)
        rng = make_rng(self.mismatch_seed, 7)
        return self.i0 * (1.0 + self.mismatch_sigma * rng.standard_normal(n_devices))


@dataclass(frozen=True)
class CircuitParams:
    r_sink: float
    c_par: float
    l_par: float = 0.0
    n: int = 0

    def __post_init__(self):
        if not (self.r_sink > 0 and self.c_par > 0):
            raise InputDomainError("r_sink and c_par must be positive")
        if self.l_par < 0:
            raise InputDomainError("l_par must be non-negative")

    @property
    def tau(self) -> float:
        return self.r_sink * self.c_par


@dataclass
class Trajectory:
    times: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray
    i_plus: np.ndarray
    i_minus: np.ndarray
    steady_state: Optional[float] = None

    def __post_init__(self):
        n = len(self.times)
        if any(len(a) != n for a in (self.v_plus, self.v_minus, self.i_plus, self.i_minus)):
            raise InputDomainError("trajectory arrays must have equal lengths")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise InputDomainError("trajectory times must be strictly increasing")

    @property
    def v_out(self) -> np.ndarray:
        return self.v_plus - self.v_minus

    def to_csv(self, path) -> None:
        """Write time, v_plus, v_minus, v_out, i_plus, i_minus (12 significant digits)."""
        cols = (self.times, self.v_plus, self.v_minus, self.v_out, self.i_plus, self.i_minus)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "v_plus", "v_minus", "v_out", "i_plus", "i_minus"])
            for row in zip(*cols):
                w.writerow([f"{v:.12g}" for v in row])


def ids(model: DeviceModel, v_g, v_b, v_s):
    """Drain-to-source current of one device (vectorized)."""
    drive = (model.kappa_g * (np.asarray(v_g, dtype=float) - model.v_offset)
             + model.kappa_b * (np.asarray(v_b, dtype=float) - model.v_offset)
             - np.asarray(v_s, dtype=float))
    return model.i0 * model.h.evaluate(drive)


def branch_operands(x, y, model: DeviceModel):
    """Effective operands of the plus and minus branches, shape ``(..., 2N)``.

    Gate and back-gate sit at ``vo +- x`` and ``vo +- y``; the offset cancels
    inside ``ids``.
    """
    gx = model.kappa_g * np.asarray(x, dtype=float)
    by = model.kappa_b * np.asarray(y, dtype=float)
    plus = np.concatenate([gx + by, -gx - by], axis=-1)
    minus = np.concatenate([gx - by, -gx + by], axis=-1)
    return plus, minus


def _branch_current(a, w, v, h):
    return np.sum(w * h.evaluate(a - v[:, None]), axis=1)


def _branch_conductance(a, w, v, h):
    return np.sum(w * h.derivative(a - v[:, None]), axis=1)


def _fixed_point_rows(a, w, r, h):
    """Vectorized bisection for ``I(v) = v / R`` on each row."""
    lo = np.zeros(a.shape[0])
    hi = r * _branch_current(a, w, lo, h)
    hi = np.maximum(hi, 0.0)
    # I(v) >= 0 keeps the root in [0, R I(0)]; h > 0 everywhere (softplus)
    # only moves it inward.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((hi - lo) <= 1e-15 * np.maximum(1.0, np.abs(hi))):
            break
        above = _branch_current(a, w, mid, h) - mid / r > 0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def static_fixed_point(pair: InputPair, model: DeviceModel, params: CircuitParams) -> float:
    """Steady-state differential output ``V+ - V-`` of the first-order model."""
    plus, minus = branch_operands(pair.x, pair.y, model)
    gains = model.device_gains(2 * plus.size)
    out = []
    for a, w in ((plus, gains[: plus.size]), (minus, gains[plus.size:])):
        f = lambda v: float(np.sum(w * model.h.evaluate(a - v))) - v / params.r_sink
        top = params.r_sink * float(np.sum(w * model.h.evaluate(a)))
        out.append(0.0 if top <= 0 else brentq(f, 0.0, top, xtol=1e-15, rtol=1e-15))
    return out[0] - out[1]


def _rk4(f, state, dt):
    k1 = f(state)
    k2 = f(state + 0.5 * dt * k1)
    k3 = f(state + 0.5 * dt * k2)
    k4 = f(state + dt * k3)
    return state + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def _step_count(t_end, dt):
    if not (dt > 0 and t_end > 0):
        raise InputDomainError("dt and t_end must be positive")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * t_end:
        n = int(np.ceil(t_end / dt))
    return max(n, 1)


def _check_first_order(dt, r, c, a_all, w_all, h):
    tau = r * c
    if dt > tau / 20 * (1 + 1e-12):
        raise StabilityError(f"dt = {dt:.3e} exceeds tau/20 = {tau / 20:.3e}")
    # fastest linearized rate over v >= 0 is at v = 0 for convex h
    g0 = _branch_conductance(a_all, w_all, np.zeros(a_all.shape[0]), h).max()
    rate = (g0 + 1.0 / r) / c
    if dt * rate > _RK4_LIMIT:
        raise StabilityError(f"dt * rate = {dt * rate:.3f} exceeds RK4 limit {_RK4_LIMIT}")


def integrate_first_order_batch(plus, minus, w_plus, w_minus, r, c, dt, t_end, h=RELU,
                                record=None):
    """RK4 on many first-order correlators at once.

    Parameters
    ----------
    plus, minus : ndarray, shape (B, M)
        Effective operands per branch.
    w_plus, w_minus : float or ndarray broadcastable to (B, M)
        Per-device current scale.
    record : sequence of int, optional
        Step indices to record (0 is the initial state). Defaults to all.

    Returns
    -------
    steps : ndarray of int
    v_plus, v_minus, i_plus, i_minus : ndarray, shape (len(steps), B)
    """
    plus = np.atleast_2d(plus)
    minus = np.atleast_2d(minus)
    wp = np.broadcast_to(w_plus, plus.shape)
    wm = np.broadcast_to(w_minus, minus.shape)
    _check_first_order(dt, r, c, np.vstack([plus, minus]), np.vstack([wp, wm]), h)
    n_steps = _step_count(t_end, dt)
    steps = np.arange(n_steps + 1) if record is None else np.asarray(sorted(set(record)), dtype=int)
    if steps.size and (steps.min() < 0 or steps.max() > n_steps):
        raise InputDomainError("record steps outside the integration range")
    b = plus.shape[0]

    def f(state):
        vp, vm = state[:b], state[b:]
        ip = _branch_current(plus, wp, vp, h)
        im = _branch_current(minus, wm, vm, h)
        return np.concatenate([ip - vp / r, im - vm / r]) / c

    out = np.zeros((4, steps.size, b))
    state = np.zeros(2 * b)
    want = {int(s): k for k, s in enumerate(steps)}

    def put(step, state):
        k = want.get(step)
        if k is not None:
            vp, vm = state[:b], state[b:]
            out[:, k] = (vp, vm, _branch_current(plus, wp, vp, h), _branch_current(minus, wm, vm, h))

    put(0, state)
    last = int(steps.max()) if steps.size else n_steps
    for step in range(1, last + 1):
        state = _rk4(f, state, dt)
        put(step, state)
    return steps, out[0], out[1], out[2], out[3]


def integrate_first_order(pair: InputPair, model: DeviceModel, params: CircuitParams,
                          t_end: float, dt: float) -> Trajectory:
    """Integrate ``C dV/dt = sum I_DS - V/R`` on both branches (``l_par`` ignored)."""
    plus, minus = branch_operands(pair.x, pair.y, model)
    gains = model.device_gains(2 * plus.size)
    steps, vp, vm, ip, im = integrate_first_order_batch(
        plus, minus, gains[: plus.size], gains[plus.size:], params.r_sink, params.c_par,
        dt, t_end, model.h)
    return Trajectory(steps * dt, vp[:, 0], vm[:, 0], ip[:, 0], im[:, 0],
                      static_fixed_point(pair, model, params))


def relu_params(n: int):
    """Resistance and capacitance that keep range and speed fixed across ``n``."""
    return 25.0 / n, 1e-5 * n


def integrate_relu_dynamics(pair: InputPair, r: float, c: float, dt: float,
                            t_end: float) -> Trajectory:
    """Normalized relu dynamics ``sum [+-o_i - z]_+ = z/R + C dz/dt`` per branch.

    Currents are in the same normalized units as ``z``; the recorded branch
    currents are the time-varying constraint ``gamma(t)``.
    """
    model = DeviceModel(RELU, i0=1.0)
    return integrate_first_order(pair, model, CircuitParams(r, c, n=pair.n), t_end, dt)


def relu_dynamics_batch(x, y, r, c, dt, steps: Sequence[int], steady: bool = True):
    """Differential relu-dynamics output of many pairs at selected steps.

    Returns a dict mapping each requested step to a ``(B,)`` array and, if
    ``steady`` is set, the key ``'steady'`` to the static fixed point.
    """
    plus, minus = branch_operands(x, y, DeviceModel(RELU, i0=1.0))
    steps = sorted(set(int(s) for s in steps))
    res = {}
    if steps:
        t_end = max(steps) * dt
        st, vp, vm, _, _ = integrate_first_order_batch(plus, minus, 1.0, 1.0, r, c, dt,
                                                       t_end, RELU, record=steps)
        for k, s in enumerate(st):
            res[int(s)] = vp[k] - vm[k]
    if steady:
        ones = np.ones_like(plus)
        res["steady"] = (_fixed_point_rows(plus, ones, r, RELU)
                         - _fixed_point_rows(minus, ones, r, RELU))
    return res


class _SourceInverse:
    """Source voltage ``V_s`` for a total branch current ``I`` (MP inverse).

    Solves ``i0 * sum h(a_j - V_s) = I`` row-wise. Relu uses an exact
    piecewise-linear inverse on presorted operands; other kinds fall back to
    the bisection solver. Non-positive currents map to the cut-off edge
    ``max(a)`` (relu/power) or a tiny positive current (softplus).
    """

    def __init__(self, a, i0, h):
        self.a = a
        self.i0 = i0
        self.h = h
        if h.kind == "relu" or (h.kind == "power" and h.exponent == 1.0):
            s = -np.sort(-a, axis=1)
            self.sorted = s
            self.csum = np.cumsum(s, axis=1)
            k = np.arange(a.shape[1])
            # LHS at each breakpoint s_k: sum_{j<k} (s_j - s_k)
            prev = np.concatenate([np.zeros((a.shape[0], 1)), self.csum[:, :-1]], axis=1)
            self.at_breaks = prev - k * s
            self.exact = True
        else:
            self.exact = False

    def __call__(self, current):
        gamma = np.asarray(current, dtype=float) / self.i0
        if self.exact:
            k = np.sum(self.at_breaks < gamma[:, None], axis=1)
            rows = np.arange(gamma.size)
            kk = np.maximum(k, 1)
            z = (self.csum[rows, kk - 1] - np.maximum(gamma, 0.0)) / kk
            return np.where(k == 0, self.sorted[:, 0], z)
        floor = 1e-300 if self.h.kind != "softplus" else 1e-12 * self.a.shape[1]
        g = np.maximum(gamma, floor)
        if self.h.kind == "power":
            edge = gamma <= 0
            z = _solve_rows(self.a, g, self.h, 1e-12 * np.max(g))[0]
            return np.where(edge, self.a.max(axis=1), z)
        return _solve_rows(self.a, g, self.h, max(1e-10, 1e-12 * np.max(g)))[0]

    def conductance(self, v):
        return self.i0 * np.sum(self.h.derivative(self.a - v[:, None]), axis=1)


def integrate_second_order_batch(plus, minus, i0, r, c, l, dt, t_end, h=RELU, record=None):
    """RK4 on the RLC model with states ``(V_out, I)`` per branch.

    ``I`` is the inductor (total device) current. Starts at ``V_out = 0``
    and ``I = 0``.

    Returns
    -------
    steps, v_plus, v_minus, i_plus, i_minus
        As :func:`integrate_first_order_batch`.
    """
    if not (l > 0):
        raise InputDomainError("second-order integration needs l_par > 0")
    plus = np.atleast_2d(plus)
    minus = np.atleast_2d(minus)
    b = plus.shape[0]
    guard = 0.05 * np.sqrt(l * c)
    if dt > guard * (1 + 1e-12):
        raise StabilityError(f"dt = {dt:.3e} exceeds 0.05 sqrt(LC) = {guard:.3e}")
    inv_p = _SourceInverse(plus, i0, h)
    inv_m = _SourceInverse(minus, i0, h)
    # stiffest loop mode is at the steady state where the fewest devices conduct
    ones = np.full_like(plus, i0)
    vfp = np.concatenate([_fixed_point_rows(plus, ones, r, h), _fixed_point_rows(minus, ones, r, h)])
    # conducting-side slope, so devices sitting exactly at the relu kink count
    vfp = vfp - 1e-9 * (1.0 + np.abs(vfp))
    g = np.concatenate([inv_p.conductance(vfp[:b]), inv_m.conductance(vfp[b:])])
    g = np.maximum(g, i0)
    rate = 0.0
    for gk in (g.min(), g.max()):
        jac = np.array([[-1.0 / (r * c), 1.0 / c], [-1.0 / l, -1.0 / (l * gk)]])
        rate = max(rate, float(np.max(np.abs(np.linalg.eigvals(jac)))))
    if dt * rate > _RK4_LIMIT:
        raise StabilityError(f"dt * rate = {dt * rate:.3f} exceeds RK4 limit {_RK4_LIMIT}")

    n_steps = _step_count(t_end, dt)
    steps = np.arange(n_steps + 1) if record is None else np.asarray(sorted(set(record)), dtype=int)

    def f(state):
        vp, ip, vm, im = state
        return np.array([
            (ip - vp / r) / c,
            (inv_p(ip) - vp) / l,
            (im - vm / r) / c,
            (inv_m(im) - vm) / l,
        ])

    state = np.zeros((4, b))
    out = np.zeros((4, steps.size, b))
    want = {int(s): k for k, s in enumerate(steps)}

    def put(step, state):
        k = want.get(step)
        if k is not None:
            out[:, k] = state[[0, 2, 1, 3]]

    put(0, state)
    for step in range(1, int(steps.max()) + 1):
        state = _rk4(f, state, dt)
        put(step, state)
    return steps, out[0], out[1], out[2], out[3]


def integrate_second_order(pair: InputPair, model: DeviceModel, params: CircuitParams,
                           t_end: float, dt: float) -> Trajectory:
    """Integrate the RLC model; ``V_out`` of each branch is the recorded voltage."""
    if model.mismatch_sigma:
        raise InputDomainError("mismatch is supported by the first-order model only")
    plus, minus = branch_operands(pair.x, pair.y, model)
    steps, vp, vm, ip, im = integrate_second_order_batch(
        plus, minus, model.i0, params.r_sink, params.c_par, params.l_par, dt, t_end, model.h)
    return Trajectory(steps * dt, vp[:, 0], vm[:, 0], ip[:, 0], im[:, 0],
                      static_fixed_point(pair, model, params))


def transient_readout(traj: Trajectory, t_read: float) -> float:
    """Differential output at ``t_read`` by linear interpolation."""
    t = traj.times
    if not (t[0] <= t_read <= t[-1] * (1 + 1e-12)):
        raise InputDomainError(f"t_read = {t_read:.3e} outside [{t[0]:.3e}, {t[-1]:.3e}]")
    return float(np.interp(t_read, t, traj.v_out))
