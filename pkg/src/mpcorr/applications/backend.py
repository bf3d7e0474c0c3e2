"""Correlation backends shared by the application demos."""
from __future__ import annotations

import numpy as np

from ..calibration import CalibrationModel, apply_inverse, train_mp_calibration
from ..correlator import mp_correlate_batch
from ..errors import InputDomainError

BACKENDS = ("mp", "mac")
# Constraint per operand pair for application correlations. Larger than the
# SPG-protocol value: more devices conduct, so the output tracks the sample
# correlation more closely (error ~0.006 against 0.015 at N = 1024).
APP_GAMMA_PER_N = 0.3


def _rms(v):
    return np.sqrt(np.mean(v * v, axis=-1))


def correlate(signal, templates, backend: str = "mac", calibration: CalibrationModel | None = None,
              gamma_per_n: float = APP_GAMMA_PER_N):
    """Normalized correlation of ``signal`` with each row of ``templates``.

    Both operands are scaled to unit RMS (no mean removal), so the ``mac``
    result is ``mean(x t) / (rms(x) rms(t))``. The ``mp`` backend feeds the
    same scaled operands to the static MP correlator and maps its output
    through the inverse calibration. All-zero templates give 0.
    """
    x = np.asarray(signal, dtype=float)
    t = np.atleast_2d(np.asarray(templates, dtype=float))
    if x.ndim != 1 or t.shape[1] != x.size:
        raise InputDomainError(f"template length {t.shape[1]} does not match signal length {x.size}")
    if backend not in BACKENDS:
        raise InputDomainError(f"unknown backend {backend!r}")
    rx = _rms(x)
    out = np.zeros(t.shape[0])
    if rx == 0:
        return out
    rt = _rms(t)
    live = rt > 0
    xs = x / rx
    ts = t[live] / rt[live, None]
    if backend == "mac":
        out[live] = ts @ xs / x.size
        return out
    if calibration is None:
        calibration = train_mp_calibration(x.size, gamma_per_n)
    raw = mp_correlate_batch(np.broadcast_to(xs, ts.shape), ts, gamma_per_n * x.size)
    out[live] = apply_inverse(calibration, raw)
    return out


def inner_products(signal, templates, backend: str = "mac", calibration=None,
                   gamma_per_n: float = APP_GAMMA_PER_N):
    """Estimates of ``mean(x t)`` for each template row.

    The normalized correlation is rescaled by ``rms(x) rms(t)``.
    """
    x = np.asarray(signal, dtype=float)
    t = np.atleast_2d(np.asarray(templates, dtype=float))
    r = correlate(x, t, backend, calibration, gamma_per_n)
    return r * _rms(x) * _rms(t)
