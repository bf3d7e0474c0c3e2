"""Inverse-map calibration, precision metrics and energy estimates."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from .correlator import gen_correlated_batch, mp_correlate_batch, standardize
from .errors import FitError, InputDomainError

__all__ = [
    "CalibrationModel",
    "MetricsReport",
    "fit_inverse_map",
    "apply_inverse",
    "rms_error",
    "compute_spg",
    "compute_hdr",
    "enob_from_hdr",
    "estimate_transient_energy",
    "tops_per_watt",
    "SPG_CAP_DB",
    "GAMMA_PER_N",
    "random_protocol",
    "train_mp_calibration",
]

SPG_CAP_DB = 200.0
# static constraint per operand pair; equals the steady-state gamma of the
# R = 25/N relu dynamics for uncorrelated unit-variance inputs
GAMMA_PER_N = 0.085
_MONOTONE_GRID = 1000


@dataclass(frozen=True)
class CalibrationModel:
    """Polynomial inverse map ``R = G^-1(raw)``.

    ``coefficients`` are in the raw domain, ascending degree. Evaluation
    goes through ``scaled``, the same polynomial in the variable mapped
    from ``input_range`` onto ``[-1, 1]``, which stays well conditioned for
    small raw outputs.
    """

    coefficients: tuple
    order: int
    input_range: tuple
    trained_on: int
    scaled: tuple = field(repr=False, default=())
    monotone: bool = True

    def __post_init__(self):
        if self.order < 1:
            raise InputDomainError("order must be at least 1")
        if len(self.coefficients) != self.order + 1:
            raise InputDomainError("order + 1 must equal the number of coefficients")
        lo, hi = self.input_range
        if not hi > lo:
            raise InputDomainError("input_range must be increasing")
        if not self.scaled:
            p = Polynomial(self.coefficients)
            object.__setattr__(self, "scaled", tuple(p.convert(domain=[lo, hi], window=[-1, 1]).coef))

    def _poly(self) -> Polynomial:
        return Polynomial(self.scaled, domain=list(self.input_range), window=[-1, 1])

    def evaluate(self, raw):
        """Unclamped polynomial value."""
        return self._poly()(np.asarray(raw, dtype=float))

    def check_monotone(self) -> bool:
        grid = np.linspace(*self.input_range, _MONOTONE_GRID)
        d = np.diff(self.evaluate(grid))
        return bool(np.all(d >= 0) or np.all(d <= 0))


def fit_inverse_map(raw_outputs, true_r, order: int = 5) -> CalibrationModel:
    """Least-squares polynomial of ``true_r`` on ``raw_outputs``.

    Raises
    ------
    FitError
        Fewer than ``order + 1`` distinct raw outputs.
    """
    raw = np.asarray(raw_outputs, dtype=float).ravel()
    r = np.asarray(true_r, dtype=float).ravel()
    if raw.shape != r.shape:
        raise InputDomainError("raw_outputs and true_r must have equal lengths")
    if order < 1:
        raise InputDomainError("order must be at least 1")
    if not (np.all(np.isfinite(raw)) and np.all(np.isfinite(r))):
        raise InputDomainError("calibration data must be finite")
    if np.unique(raw).size < order + 1:
        raise FitError(f"need at least {order + 1} distinct raw outputs for order {order}")
    lo, hi = float(raw.min()), float(raw.max())
    fit = Polynomial.fit(raw, r, order, domain=[lo, hi], window=[-1, 1])
    coef = np.zeros(order + 1)
    raw_coef = fit.convert().coef
    coef[: raw_coef.size] = raw_coef
    scaled = np.zeros(order + 1)
    scaled[: fit.coef.size] = fit.coef
    model = CalibrationModel(tuple(coef.tolist()), order, (lo, hi), raw.size, tuple(scaled.tolist()))
    object.__setattr__(model, "monotone", model.check_monotone())
    return model


def apply_inverse(model: CalibrationModel, raw, return_flags: bool = False):
    """Calibrated correlation, clamped to ``[-1, 1]``.

    With ``return_flags`` also returns a boolean flag per value, set when
    the raw input lies outside the training range or the result was
    clamped.
    """
    raw_arr = np.asarray(raw, dtype=float)
    val = model.evaluate(raw_arr)
    lo, hi = model.input_range
    flags = (raw_arr < lo) | (raw_arr > hi) | (val > 1.0) | (val < -1.0)
    val = np.clip(val, -1.0, 1.0)
    if raw_arr.ndim == 0:
        val, flags = float(val), bool(flags)
    return (val, flags) if return_flags else val


@dataclass
class MetricsReport:
    rms_error_db: Optional[float] = None
    spg_db: Optional[float] = None
    hdr_db: Optional[float] = None
    enob_bits: Optional[float] = None
    energy_j: Optional[float] = None
    tops_per_watt_system: Optional[float] = None
    tops_per_watt_core: Optional[float] = None

    def __post_init__(self):
        if self.hdr_db is not None:
            enob = enob_from_hdr(self.hdr_db)
            if self.enob_bits is None:
                self.enob_bits = enob
            elif not math.isclose(self.enob_bits, enob, rel_tol=1e-12, abs_tol=1e-12):
                raise InputDomainError("enob_bits inconsistent with hdr_db")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tops_w_system"] = d.pop("tops_per_watt_system")
        d["tops_w_core"] = d.pop("tops_per_watt_core")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        d = json.loads(text)
        d["tops_per_watt_system"] = d.pop("tops_w_system")
        d["tops_per_watt_core"] = d.pop("tops_w_core")
        return cls(**d)


def rms_error(predicted, true_r) -> float:
    p = np.asarray(predicted, dtype=float).ravel()
    t = np.asarray(true_r, dtype=float).ravel()
    if p.size == 0:
        raise InputDomainError("empty input")
    if p.shape != t.shape:
        raise InputDomainError("predicted and true values must have equal lengths")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def _db_gain(rms: float) -> float:
    if rms == 0:
        return SPG_CAP_DB
    return min(SPG_CAP_DB, -20.0 * math.log10(rms))


def compute_spg(predicted, true_r) -> MetricsReport:
    """RMS error and SPG (``-20 log10 rms``) of correlation estimates."""
    if np.asarray(predicted).size < 2:
        raise InputDomainError("need at least two samples")
    spg = _db_gain(rms_error(predicted, true_r))
    return MetricsReport(rms_error_db=-spg, spg_db=spg)


def compute_hdr(predicted, true_r) -> MetricsReport:
    """Hardware dynamic range from noiseless-length inputs (e.g. sinusoids).

    The RMS error then contains no finite-length term, so its inverse in dB
    is the dynamic range of the processing chain.
    """
    if np.asarray(predicted).size < 2:
        raise InputDomainError("need at least two samples")
    hdr = _db_gain(rms_error(predicted, true_r))
    return MetricsReport(rms_error_db=-hdr, hdr_db=hdr)


def enob_from_hdr(hdr_db: float) -> float:
    return (hdr_db - 1.76) / 6.02


def estimate_transient_energy(traj, i_static: float, c_par: float, vdd: float,
                              t_compute: float) -> float:
    """Upper-bound energy of one compute phase.

    Supply current is ``i_static + c_par |dV_out/dt|``; the magnitude makes
    discharging count as drawn charge too, which keeps the bound
    conservative. Integrated with the trapezoid rule from 0 to
    ``t_compute``.
    """
    t = np.asarray(traj.times, dtype=float)
    if t_compute < 0:
        raise InputDomainError("t_compute must be non-negative")
    if t_compute > t[-1] * (1 + 1e-12):
        raise InputDomainError("t_compute exceeds the trajectory span")
    v = np.asarray(traj.v_out, dtype=float)
    dv = np.gradient(v, t) if t.size > 1 else np.zeros(1)
    current = i_static + c_par * np.abs(dv)
    keep = t < t_compute
    tt = np.append(t[keep], t_compute)
    ii = np.append(current[keep], np.interp(t_compute, t, current))
    return float(vdd * np.trapezoid(ii, tt))


def tops_per_watt(n: int, enob: float, e_sampling: float, e_compute: float):
    """System and core efficiency in TOPS/W for one correlation.

    One length-``n`` correlation at ``enob`` bits counts as
    ``n (enob^2 + enob)`` one-bit operations.
    """
    if not (e_compute > 0 and e_sampling >= 0):
        raise InputDomainError("energies must be positive")
    ops = n * (enob * enob + enob)
    core = ops / (1e12 * e_compute)
    system = ops / (1e12 * (e_sampling + e_compute))
    return system, core


def random_protocol(n: int, count: int, seed: int, stream: int, distribution: str = "gaussian",
                    gamma_per_n: float = GAMMA_PER_N):
    """Static MP outputs for ``count`` standardized random pairs.

    Target correlations are drawn uniformly from ``[-1, 1]``. Returns
    ``(raw, r_target, r_empirical)``; the empirical value is the Pearson
    coefficient of each drawn pair.
    """
    rng = np.random.default_rng([seed, stream, 1 << 20])
    r = rng.uniform(-1.0, 1.0, count)
    x, y = gen_correlated_batch(r, n, distribution, seed, stream)
    x = standardize(x)
    y = standardize(y)
    raw = mp_correlate_batch(x, y, gamma_per_n * n)
    return raw, r, np.mean(x * y, axis=1)


_CAL_CACHE: dict = {}


def train_mp_calibration(n: int, gamma_per_n: float = GAMMA_PER_N, seed: int = 0,
                         n_train: int = 500, order: int = 5) -> CalibrationModel:
    """Inverse map for the static relu MP correlator at length ``n``.

    Trained on standardized Gaussian pairs; results are cached per argument
    set.
    """
    key = (n, gamma_per_n, seed, n_train, order)
    if key not in _CAL_CACHE:
        raw, r, _ = random_protocol(n, n_train, seed, 0, gamma_per_n=gamma_per_n)
        _CAL_CACHE[key] = fit_inverse_map(raw, r, order)
    return _CAL_CACHE[key]
