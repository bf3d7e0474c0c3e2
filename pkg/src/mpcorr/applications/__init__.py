"""Spectrum sensing, compressive recovery and spread-spectrum demos."""
from .backend import APP_GAMMA_PER_N, BACKENDS, correlate, inner_products
from .compressive import (CompressiveConfig, CosampResult, cosamp, cosamp_recover, dictionary,
                          make_templates, measure, plant_sparse, reconstruction_snr_db,
                          sensing_matrix, synthesize)
from .spectrum import (SpectrumScanConfig, contiguous_runs, detect_peaks, dft_magnitudes, dominant_peaks,
                       spectrum_scan, tone)
from .spread import (SpreadSpectrumConfig, apsk_demodulate, code_sync, code_templates,
                     constellation_points, make_spread_signal, modulate, pn_code, random_symbols)

__all__ = [
    "APP_GAMMA_PER_N", "BACKENDS", "correlate", "inner_products",
    "CompressiveConfig", "CosampResult", "cosamp", "cosamp_recover", "dictionary",
    "make_templates", "measure", "plant_sparse", "reconstruction_snr_db",
    "sensing_matrix", "synthesize",
    "SpectrumScanConfig", "contiguous_runs", "detect_peaks", "dft_magnitudes",
    "dominant_peaks", "spectrum_scan", "tone",
    "SpreadSpectrumConfig", "apsk_demodulate", "code_sync", "code_templates",
    "constellation_points", "make_spread_signal", "modulate", "pn_code", "random_symbols",
]
