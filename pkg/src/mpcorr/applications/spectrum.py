"""Template-sweep spectrum sensing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputDomainError
from .backend import correlate


@dataclass(frozen=True)
class SpectrumScanConfig:
    """Bin grid from DC (inclusive) to Nyquist (exclusive).

    Bin ``k`` sits at ``k * sample_rate / (2 * bins)``.
    """

    sample_rate: float
    n: int
    bins: int
    use_iq: bool = True

    def __post_init__(self):
        if not (self.sample_rate > 0):
            raise InputDomainError("sample_rate must be positive")
        if self.n < 2 or self.bins < 1:
            raise InputDomainError("n must be >= 2 and bins >= 1")
        if self.bins > self.n:
            raise InputDomainError("bins must not exceed n")

    @property
    def resolution(self) -> float:
        return self.sample_rate / (2 * self.bins)

    def frequencies(self) -> np.ndarray:
        return np.arange(self.bins) * self.resolution

    def bin_of(self, freq: float) -> int:
        return int(round(freq / self.resolution))

    def templates(self):
        """Cosine and sine templates, each of shape ``(bins, n)``."""
        phase = 2 * np.pi * np.outer(self.frequencies(), np.arange(self.n)) / self.sample_rate
        return np.cos(phase), np.sin(phase)


def tone(config: SpectrumScanConfig, freq: float, amplitude: float = 1.0, phase: float = 0.0):
    t = np.arange(config.n) / config.sample_rate
    return amplitude * np.cos(2 * np.pi * freq * t + phase)


def spectrum_scan(input_signal, config: SpectrumScanConfig, backend: str = "mac",
                  calibration=None) -> np.ndarray:
    """Correlation magnitude of the input against every bin template.

    Magnitude is ``sqrt(I^2 + Q^2)`` with ``use_iq``, otherwise ``|I|``.
    """
    x = np.asarray(input_signal, dtype=float)
    if x.shape != (config.n,):
        raise InputDomainError(f"signal length {x.size} does not match config n = {config.n}")
    cos_t, sin_t = config.templates()
    i = correlate(x, cos_t, backend, calibration)
    if not config.use_iq:
        return np.abs(i)
    q = correlate(x, sin_t, backend, calibration)
    return np.hypot(i, q)


def detect_peaks(magnitudes, factor: float = 3.0) -> np.ndarray:
    """Indices whose magnitude exceeds ``factor`` times the median."""
    m = np.asarray(magnitudes, dtype=float)
    return np.flatnonzero(m > factor * np.median(m))


def contiguous_runs(indices):
    """Group sorted indices into ``(start, stop)`` inclusive runs."""
    idx = np.asarray(indices, dtype=int)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts.tolist(), stops.tolist()))


def dft_magnitudes(input_signal, config: SpectrumScanConfig) -> np.ndarray:
    """Direct DFT magnitude on the scan grid (reference for band checks)."""
    x = np.asarray(input_signal, dtype=float)
    cos_t, sin_t = config.templates()
    return np.hypot(cos_t @ x, sin_t @ x)


def dominant_peaks(magnitudes, count: int) -> np.ndarray:
    """The ``count`` largest local maxima, in increasing bin order."""
    m = np.asarray(magnitudes, dtype=float)
    padded = np.concatenate([[-np.inf], m, [-np.inf]])
    local = np.flatnonzero((padded[1:-1] >= padded[:-2]) & (padded[1:-1] > padded[2:]))
    top = local[np.argsort(m[local])[::-1][:count]]
    return np.sort(top)
