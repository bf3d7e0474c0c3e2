import numpy as np
import pytest

from mpcorr.applications import (CompressiveConfig, SpectrumScanConfig, SpreadSpectrumConfig,
                                 apsk_demodulate, code_sync, code_templates, constellation_points,
                                 contiguous_runs, correlate, cosamp_recover, detect_peaks,
                                 dft_magnitudes, dominant_peaks, make_spread_signal, measure, modulate,
                                 plant_sparse, pn_code, random_symbols, reconstruction_snr_db,
                                 spectrum_scan, synthesize, tone)
from mpcorr.correlator import make_rng
from mpcorr.errors import InputDomainError
from mpcorr.experiments import code_comm, three_tone_signal


def awgn(signal, snr_db, rng):
    power = np.mean(signal**2)
    return signal + np.sqrt(power / 10 ** (snr_db / 10)) * rng.standard_normal(signal.size)


class TestBackend:
    def test_mac_is_normalized_inner_product(self):
        rng = np.random.default_rng(0)
        x, t = rng.normal(size=64), rng.normal(size=(3, 64))
        ref = t @ x / (np.sqrt(np.mean(x**2)) * np.sqrt(np.mean(t**2, axis=1)) * 64)
        np.testing.assert_allclose(correlate(x, t), ref, atol=1e-14)

    def test_zero_template(self):
        assert correlate(np.ones(8), np.zeros((1, 8)))[0] == 0.0

    def test_mp_tracks_mac(self):
        rng = np.random.default_rng(1)
        x, t = rng.normal(size=1024), rng.normal(size=(20, 1024))
        t[:10] += 1.5 * x
        np.testing.assert_allclose(correlate(x, t, "mp"), correlate(x, t, "mac"), atol=0.03)

    def test_unknown_backend(self):
        with pytest.raises(InputDomainError):
            correlate(np.ones(4), np.ones((1, 4)), "fft")


class TestSpectrum:
    cfg = SpectrumScanConfig(1.0e9, 256, 128)

    def test_resolution(self):
        cfg = SpectrumScanConfig(5e9, 1024, 1000)
        assert cfg.resolution == 2.5e6

    @pytest.mark.parametrize("k", [3, 40, 101])
    def test_on_bin_tone_orthogonal(self, k):
        mags = spectrum_scan(tone(self.cfg, k * self.cfg.resolution, phase=0.3), self.cfg)
        assert np.argmax(mags) == k
        assert np.all(np.delete(mags, k) <= 1e-10)

    def test_three_tones_mp(self):
        cfg = SpectrumScanConfig(5e9, 1024, 1000)
        freqs = (0.5e9, 1.365e9, 2.435e9)
        mags = spectrum_scan(three_tone_signal(cfg, freqs, seed=0), cfg, "mp")
        np.testing.assert_array_equal(dominant_peaks(mags, 3), [cfg.bin_of(f) for f in freqs])

    def test_band_width_matches_dft(self):
        cfg = SpectrumScanConfig(1.0e9, 512, 256)
        rng = make_rng(4, 1)
        band = np.arange(100, 121)
        x = sum(tone(cfg, k * cfg.resolution, 1.0, p) for k, p in zip(band, rng.uniform(0, 2 * np.pi, band.size)))
        x = awgn(x, 10.0, rng)
        scan = contiguous_runs(detect_peaks(spectrum_scan(x, cfg, "mp")))
        ref = contiguous_runs(detect_peaks(dft_magnitudes(x, cfg)))
        widest = lambda runs: max(runs, key=lambda r: r[1] - r[0])
        (s0, s1), (r0, r1) = widest(scan), widest(ref)
        assert abs((s1 - s0) - (r1 - r0)) <= 2
        assert abs((s1 - s0 + 1) - band.size) <= 2

    def test_length_mismatch(self):
        with pytest.raises(InputDomainError):
            spectrum_scan(np.ones(10), self.cfg)

    def test_bins_exceed_n(self):
        with pytest.raises(InputDomainError):
            SpectrumScanConfig(1e9, 16, 32)


class TestCompressive:
    def test_zero_measurements(self):
        cfg = CompressiveConfig(64, 4, 256, 0)
        res = cosamp_recover(np.zeros(64), 0, cfg)
        assert not np.any(res.estimate) and res.converged

    @pytest.mark.parametrize("seed", range(5))
    def test_noiseless_mac_exact(self, seed):
        cfg = CompressiveConfig(64, 4, 256, seed)
        truth = plant_sparse(cfg, seed)
        res = cosamp_recover(measure(synthesize(truth, 256), cfg), seed, cfg)
        np.testing.assert_array_equal(res.support, np.flatnonzero(truth))
        assert np.max(np.abs(res.estimate - truth)) <= 1e-8

    def test_mp_backend_gate(self):
        cfg = CompressiveConfig(128, 4, 1024, 0)
        truth = plant_sparse(cfg, 0)
        res = cosamp_recover(measure(synthesize(truth, 1024), cfg, "mp"), 0, cfg)
        np.testing.assert_array_equal(res.support, np.flatnonzero(truth))
        assert reconstruction_snr_db(truth, res.estimate) >= 20

    def test_measurement_count_checked(self):
        with pytest.raises(InputDomainError):
            cosamp_recover(np.zeros(10), 0, CompressiveConfig(64, 4, 256, 0))

    def test_config_ordering(self):
        with pytest.raises(InputDomainError):
            CompressiveConfig(300, 4, 256, 0)


BPSK = SpreadSpectrumConfig(256, 5e9, 2e9, constellation="bpsk")


class TestSpread:
    def test_autocorrelation_peak(self):
        a, b = pn_code(1024, 0, 0), pn_code(1024, 0, 1)
        mags = code_sync(a, {"A": a, "B": b})
        np.testing.assert_allclose(mags["A"], 1.0, atol=1e-12)
        assert mags["B"] <= 3 / np.sqrt(1024)

    def test_sync_at_zero_db(self):
        assert code_comm(snr_db=0.0, symbols=4)["ratio"] >= 10

    def test_overlapping_codes(self):
        cfg = SpreadSpectrumConfig(1024, 5e9, 2e9, constellation="bpsk")
        rx = make_spread_signal(np.array([1.0]), cfg, seed=3, blockers=1)
        codes = {k: code_templates(pn_code(1024, 3, i), cfg) for k, i in (("A", 0), ("B", 1), ("C", 7))}
        mags = code_sync(rx, codes)
        assert min(mags["A"], mags["B"]) > 3 * mags["C"]

    def test_noiseless_evm_floor(self):
        cfg = SpreadSpectrumConfig(1024, 5e9, 2e9)
        sym = random_symbols(50, cfg, 0)
        decided, evm, _ = apsk_demodulate(make_spread_signal(sym, cfg, 0),
                                          *code_templates(pn_code(1024, 0), cfg))
        assert evm <= -60
        np.testing.assert_array_equal(decided, sym)

    def test_rotated_templates_flip_symbol(self):
        cfg = SpreadSpectrumConfig(256, 5e9, 2e9)
        s = constellation_points("apsk64")[1]
        i_t, q_t = code_templates(pn_code(256, 1), cfg)
        decided, _, _ = apsk_demodulate(modulate([s], pn_code(256, 1), cfg), -i_t, -q_t)
        np.testing.assert_allclose(decided, [-s], atol=1e-12)

    def test_evm_tracks_processing_gain(self):
        gaps = {n: code_comm(code_length=n, snr_db=0.0, symbols=200)["evm_db"] + 10 * np.log10(n)
                for n in (256, 1024)}
        assert all(abs(g) <= 3 for g in gaps.values()), gaps

    def test_noiseless_sentinel(self):
        sym = random_symbols(3, BPSK, 0)
        np.testing.assert_array_equal(make_spread_signal(sym, BPSK, 0),
                                      modulate(sym, pn_code(256, 0), BPSK))

    def test_snr_by_construction(self):
        cfg = SpreadSpectrumConfig(1000, 5e9, 2e9, 0.0, "bpsk")
        sym = random_symbols(100, cfg, 2)
        clean = make_spread_signal(sym, SpreadSpectrumConfig(1000, 5e9, 2e9, constellation="bpsk"), 2)
        noise = make_spread_signal(sym, cfg, 2) - clean
        assert abs(10 * np.log10(np.mean(clean**2) / np.mean(noise**2))) <= 0.2

    def test_blocker_doubles_power(self):
        cfg = SpreadSpectrumConfig(1000, 5e9, 2e9, constellation="bpsk")
        sym = random_symbols(100, cfg, 4)
        ratio = np.mean(make_spread_signal(sym, cfg, 4, 1) ** 2) / np.mean(make_spread_signal(sym, cfg, 4) ** 2)
        assert abs(10 * np.log10(ratio) - 10 * np.log10(2)) <= 0.2

    @pytest.mark.parametrize("snr", [np.nan, -np.inf])
    def test_invalid_snr(self, snr):
        with pytest.raises(InputDomainError):
            SpreadSpectrumConfig(64, 5e9, 2e9, snr)

    def test_apsk_geometry(self):
        pts = constellation_points("apsk64")
        assert pts.size == 64
        np.testing.assert_allclose(sorted(set(np.round(np.abs(pts), 12))), [1, 2, 3, 4])


def spectrum_trial(seed, backend):
    cfg = SpectrumScanConfig(1.0e9, 256, 16)
    rng = make_rng(seed, 61)
    bins = np.sort(rng.choice(np.arange(1, 16), 2, replace=False))
    x = sum(tone(cfg, k * cfg.resolution, 1.0, p) for k, p in zip(bins, rng.uniform(0, 6.3, 2)))
    return bins, spectrum_scan(awgn(x, 0.0, rng), cfg, backend)


def sync_trial(seed, backend):
    cfg = SpreadSpectrumConfig(256, 5e9, 2e9, 0.0, "bpsk")
    rx = make_spread_signal(np.array([1.0]), cfg, seed)
    codes = {i: code_templates(pn_code(256, seed, i), cfg) for i in range(8)}
    return np.array(list(code_sync(rx, codes, backend).values()))


class TestPopulationInvariants:
    trials = range(100)

    def test_thresholding_sufficiency(self):
        spec = sum(np.array_equal(detect_peaks(spectrum_trial(s, "mac")[1]), spectrum_trial(s, "mac")[0])
                   for s in self.trials)
        sync = sum(np.array_equal(detect_peaks(sync_trial(s, "mac")), [0]) for s in self.trials)
        cs = 0
        for s in self.trials:
            cfg = CompressiveConfig(64, 4, 256, s)
            truth = plant_sparse(cfg, s)
            est = cosamp_recover(measure(synthesize(truth, 256), cfg), s, cfg).estimate
            cs += np.array_equal(detect_peaks(np.abs(est)), np.flatnonzero(truth))
        assert min(spec, sync, cs) >= 95, (spec, sync, cs)

    def test_backend_consistency(self):
        agree = 0
        for s in self.trials:
            bins_mac = dominant_peaks(spectrum_trial(s, "mac")[1], 2)
            bins_mp = dominant_peaks(spectrum_trial(s, "mp")[1], 2)
            agree += np.array_equal(bins_mac, bins_mp)
            agree += np.argmax(sync_trial(s, "mac")) == np.argmax(sync_trial(s, "mp"))
        assert agree >= 0.98 * 2 * len(self.trials)
