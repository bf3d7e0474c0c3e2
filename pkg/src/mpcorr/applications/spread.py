"""Direct-sequence spread spectrum: code sync and 64-APSK demodulation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..correlator import make_rng
from ..errors import InputDomainError
from .backend import correlate, inner_products

CONSTELLATIONS = ("bpsk", "apsk64")
APSK64_RINGS = ((4, 1.0), (12, 2.0), (20, 3.0), (28, 4.0))


@dataclass(frozen=True)
class SpreadSpectrumConfig:
    """One sample per chip; each symbol spans one code period."""

    code_length: int
    chip_rate: float
    carrier_freq: float
    snr_db: float = float("inf")
    constellation: str = "apsk64"

    def __post_init__(self):
        if self.code_length < 2:
            raise InputDomainError("code_length must be at least 2")
        if not (self.chip_rate > 0 and self.carrier_freq > 0):
            raise InputDomainError("chip_rate and carrier_freq must be positive")
        if np.isnan(self.snr_db) or self.snr_db == -np.inf:
            raise InputDomainError("snr_db must be finite or +inf")
        if self.constellation not in CONSTELLATIONS:
            raise InputDomainError(f"unknown constellation {self.constellation!r}")


def constellation_points(name: str) -> np.ndarray:
    """Complex constellation; 64-APSK uses rings of 4, 12, 20, 28 points at radii 1..4."""
    if name == "bpsk":
        return np.array([1.0 + 0j, -1.0 + 0j])
    if name == "apsk64":
        pts = [r * np.exp(2j * np.pi * np.arange(m) / m) for m, r in APSK64_RINGS]
        return np.concatenate(pts)
    raise InputDomainError(f"unknown constellation {name!r}")


def pn_code(length: int, seed: int, index: int = 0) -> np.ndarray:
    """Balanced pseudo-random +-1 code; ``index`` selects independent codes."""
    rng = make_rng(seed, 21, index)
    code = np.where(np.arange(length) < (length + 1) // 2, 1.0, -1.0)
    return rng.permutation(code)


def code_templates(code, config: SpreadSpectrumConfig):
    """In-phase and quadrature references ``code * cos`` and ``-code * sin``."""
    code = np.asarray(code, dtype=float)
    if code.size != config.code_length:
        raise InputDomainError("code length does not match config")
    if not np.all(np.abs(code) == 1):
        raise InputDomainError("code entries must be +-1")
    phase = 2 * np.pi * config.carrier_freq * np.arange(code.size) / config.chip_rate
    return code * np.cos(phase), -code * np.sin(phase)


def modulate(symbols, code, config: SpreadSpectrumConfig) -> np.ndarray:
    """Noiseless passband record ``Re(s * code * exp(j w t))`` per symbol."""
    i_t, q_t = code_templates(code, config)
    s = np.atleast_1d(np.asarray(symbols, dtype=complex))
    return (np.outer(s.real, i_t) + np.outer(s.imag, q_t)).ravel()


def random_symbols(count: int, config: SpreadSpectrumConfig, seed: int) -> np.ndarray:
    pts = constellation_points(config.constellation)
    return pts[make_rng(seed, 22).integers(0, pts.size, count)]


def make_spread_signal(symbols, config: SpreadSpectrumConfig, seed: int, blockers: int = 0) -> np.ndarray:
    """Spread record with AWGN and optional blocker codes.

    The wanted signal uses ``pn_code(seed, 0)``; blocker ``b`` uses code
    ``b + 1`` with its own random symbols, scaled to the wanted signal's
    power. Noise variance is set from the noiseless wanted power so the
    per-sample SNR matches ``config.snr_db`` by construction.
    """
    clean = modulate(symbols, pn_code(config.code_length, seed), config)
    power = float(np.mean(clean**2))
    out = clean.copy()
    count = np.atleast_1d(symbols).size
    for b in range(blockers):
        rng = make_rng(seed, 23, b)
        pts = constellation_points(config.constellation)
        sym = pts[rng.integers(0, pts.size, count)]
        other = modulate(sym, pn_code(config.code_length, seed, b + 1), config)
        out += other * np.sqrt(power / np.mean(other**2))
    if np.isfinite(config.snr_db):
        sigma = np.sqrt(power / 10.0 ** (config.snr_db / 10.0))
        out += sigma * make_rng(seed, 24).standard_normal(out.size)
    return out


def code_sync(received, codes: dict, backend: str = "mac", calibration=None) -> dict:
    """Correlation magnitude of the received record against each code.

    ``codes`` maps a name to a template sequence or to an ``(i, q)``
    template pair; pairs give ``sqrt(I^2 + Q^2)``.
    """
    x = np.asarray(received, dtype=float)
    out = {}
    for name, tpl in codes.items():
        rows = np.atleast_2d(np.asarray(tpl, dtype=float))
        if rows.shape[1] != x.size:
            raise InputDomainError(f"code {name!r} length does not match the received record")
        r = correlate(x, rows, backend, calibration)
        out[name] = float(np.sqrt(np.sum(r * r)))
    return out


def apsk_demodulate(received, i_template, q_template, constellation: str = "apsk64",
                    backend: str = "mac", calibration=None):
    """Despread, decide and measure EVM.

    The record is split into template-length symbol periods. Per period the
    two template inner products are mapped to ``(I, Q)`` through the 2x2
    Gram matrix of the templates, then each point is decided to the nearest
    constellation point. EVM is the RMS distance to the decided points over
    the RMS of the constellation, in dB.

    Returns
    -------
    decided : ndarray of complex
    evm_db : float
    estimates : ndarray of complex
        Despread points before decision.
    """
    pts = constellation_points(constellation)
    i_t = np.asarray(i_template, dtype=float)
    q_t = np.asarray(q_template, dtype=float)
    x = np.asarray(received, dtype=float)
    n = i_t.size
    if q_t.size != n or x.size % n:
        raise InputDomainError("record length must be a multiple of the template length")
    tpl = np.vstack([i_t, q_t])
    gram = tpl @ tpl.T / n
    est = np.empty(x.size // n, dtype=complex)
    for k, period in enumerate(x.reshape(-1, n)):
        a, b = np.linalg.solve(gram, inner_products(period, tpl, backend, calibration))
        est[k] = a + 1j * b
    decided = pts[np.argmin(np.abs(est[:, None] - pts[None, :]), axis=1)]
    ref = np.sqrt(np.mean(np.abs(pts) ** 2))
    err = np.sqrt(np.mean(np.abs(est - decided) ** 2))
    evm = -np.inf if err == 0 else float(20 * np.log10(err / ref))
    return decided, evm, est
