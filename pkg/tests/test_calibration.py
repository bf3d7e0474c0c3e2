import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpcorr.calibration import (GAMMA_PER_N, SPG_CAP_DB, CalibrationModel, MetricsReport,
                                apply_inverse, compute_hdr, compute_spg, enob_from_hdr,
                                estimate_transient_energy, fit_inverse_map, random_protocol,
                                rms_error, tops_per_watt)
from mpcorr.correlator import mp_correlate_batch
from mpcorr.dynamics import Trajectory
from mpcorr.errors import FitError, InputDomainError
from mpcorr.experiments import sinusoid_batch, spg_point

N = 1024


def sinusoid_raw(phases, n=N):
    x, y = sinusoid_batch(phases, n, 4)
    return mp_correlate_batch(x, y, GAMMA_PER_N * n), np.cos(np.deg2rad(phases))


@pytest.fixture(scope="module")
def sweep():
    return sinusoid_raw(np.arange(181.0))


class TestFit:
    def test_identity(self):
        r = np.linspace(-1, 1, 21)
        m = fit_inverse_map(r, r, 1)
        np.testing.assert_allclose(m.coefficients, [0, 1], atol=1e-10)
        assert m.trained_on == 21 and m.input_range == (-1.0, 1.0)

    def test_rank_deficient(self):
        with pytest.raises(FitError):
            fit_inverse_map(np.full(10, 0.2), np.linspace(-1, 1, 10), 5)

    def test_order_plateau(self, sweep):
        raw, truth = sweep
        rms = [rms_error(apply_inverse(fit_inverse_map(raw, truth, k), raw), truth) for k in range(1, 8)]
        assert np.all(np.diff(rms) <= 1e-12)
        assert (rms[4] - rms[5]) / rms[4] < 0.10

    def test_generalization_at_1024(self):
        pt = spg_point(N, seed=0)
        assert abs(pt["test_rms_db"] - pt["train_rms_db"]) <= 1.0

    def test_scaled_coefficients_consistent(self, sweep):
        raw, truth = sweep
        m = fit_inverse_map(raw, truth, 5)
        direct = np.polynomial.Polynomial(m.coefficients)(raw)
        np.testing.assert_allclose(m.evaluate(raw), direct, atol=1e-6)

    def test_model_validation(self):
        with pytest.raises(InputDomainError):
            CalibrationModel((0.0, 1.0, 2.0), 1, (0.0, 1.0), 3)


class TestApplyInverse:
    identity = CalibrationModel((0.0, 1.0), 1, (-1.0, 1.0), 2)

    def test_identity_value(self):
        assert apply_inverse(self.identity, 0.3) == pytest.approx(0.3, abs=1e-15)

    def test_clamp_and_flag(self):
        val, flag = apply_inverse(self.identity, 1.7, return_flags=True)
        assert val == 1.0 and flag
        val, flag = apply_inverse(self.identity, 0.2, return_flags=True)
        assert not flag

    def test_held_out_sinusoid_round_trip(self, sweep):
        raw, truth = sweep
        m = fit_inverse_map(raw, truth, 5)
        held_raw, held_truth = sinusoid_raw(np.arange(0.5, 180.0, 1.0))
        assert rms_error(apply_inverse(m, held_raw), held_truth) <= 10 ** (-40 / 20)


class TestMetrics:
    def test_perfect_prediction_capped(self):
        rep = compute_spg([0.1, 0.2], [0.1, 0.2])
        assert rep.spg_db == SPG_CAP_DB

    def test_spg_definition(self):
        rep = compute_spg([0.1, -0.1], [0.0, 0.0])
        np.testing.assert_allclose(rep.spg_db, 20.0, atol=1e-12)
        assert rep.rms_error_db == -rep.spg_db

    def test_simulated_spg_near_theory(self):
        assert abs(spg_point(N, seed=0)["spg_mp_db"] - 10 * np.log10(N)) <= 1.5

    @pytest.mark.parametrize("bad", [[], [0.1]])
    def test_too_short(self, bad):
        with pytest.raises(InputDomainError):
            compute_spg(bad, bad)

    @pytest.mark.parametrize("hdr,enob", [(1.76, 0.0), (49.92, 8.0)])
    def test_enob_formula(self, hdr, enob):
        np.testing.assert_allclose(enob_from_hdr(hdr), enob, atol=1e-12)

    def test_enob_at_hardware_hdr(self):
        assert round(enob_from_hdr(49.0), 2) == 7.85

    def test_hdr_enob_idempotent(self):
        rng = np.random.default_rng(1)
        truth = rng.uniform(-1, 1, 50)
        pred = truth + rng.normal(0, 1e-3, 50)
        a, b = compute_hdr(pred, truth), compute_hdr(pred, truth)
        assert a.enob_bits == b.enob_bits == enob_from_hdr(a.hdr_db)

    def test_report_json_round_trip(self):
        rep = MetricsReport(rms_error_db=-30.0, spg_db=30.0, hdr_db=49.92, energy_j=6.27e-12,
                            tops_per_watt_system=100.0, tops_per_watt_core=2939.7)
        d = json.loads(rep.to_json())
        assert set(d) == {"rms_error_db", "spg_db", "hdr_db", "enob_bits", "energy_j",
                          "tops_w_system", "tops_w_core"}
        assert MetricsReport.from_json(rep.to_json()) == rep

    def test_report_enob_consistency(self):
        with pytest.raises(InputDomainError):
            MetricsReport(hdr_db=49.92, enob_bits=7.0)


def linear_traj(k, t_end=1e-8, steps=101):
    t = np.linspace(0, t_end, steps)
    z = np.zeros_like(t)
    return Trajectory(t, k * t, z, z, z)


class TestEnergy:
    def test_flat(self):
        e = estimate_transient_energy(linear_traj(0.0), 2e-4, 1e-12, 0.9, 7.3e-9)
        assert e == pytest.approx(2e-4 * 0.9 * 7.3e-9, rel=1e-12)

    def test_ramp(self):
        k = 3e7
        e = estimate_transient_energy(linear_traj(k), 2e-4, 5e-12, 1.1, 6e-9)
        np.testing.assert_allclose(e, (2e-4 + 5e-12 * k) * 1.1 * 6e-9, rtol=1e-9)

    @pytest.mark.parametrize("t", [-1e-9, 2e-8])
    def test_bad_compute_time(self, t):
        with pytest.raises(InputDomainError):
            estimate_transient_energy(linear_traj(1.0), 1e-4, 1e-12, 1.0, t)


class TestTops:
    def test_hardware_cross_check(self):
        _, core = tops_per_watt(256, 8.0, 0.0, 6.27e-12)
        assert abs(core - 2940) <= 1
        np.testing.assert_allclose(core, 256 * 72 / 6.27, rtol=1e-12)

    def test_zero_enob(self):
        assert tops_per_watt(256, 0.0, 1e-12, 1e-12) == (0.0, 0.0)

    @given(st.integers(1, 4096), st.one_of(st.just(0.0), st.floats(0.1, 16)), st.floats(1e-15, 1e-9))
    def test_doubling_energy_halves_core(self, n, enob, e):
        assert tops_per_watt(n, enob, 0.0, 2 * e)[1] == pytest.approx(tops_per_watt(n, enob, 0.0, e)[1] / 2,
                                                                     rel=1e-14, abs=0)

    def test_system_uses_both_energies(self):
        system, core = tops_per_watt(256, 8.0, 6.27e-12, 6.27e-12)
        np.testing.assert_allclose(system, core / 2, rtol=1e-14)

    @pytest.mark.parametrize("e", [0.0, -1e-12])
    def test_zero_energy(self, e):
        with pytest.raises(InputDomainError):
            tops_per_watt(256, 8.0, 0.0, e)


class TestMonotonePreservation:
    # static MP responses are close to r + 0.36 r^3 at every N; this class brackets that
    @given(st.sampled_from(["tanh", "cubic"]), st.floats(0.0, 1.0))
    def test_monotone_data_gives_monotone_model(self, shape, u):
        r = np.linspace(-1, 1, 200)
        raw = {"tanh": np.tanh((0.2 + 1.3 * u) * r), "cubic": r + (1.3 * u - 0.3) * r**3}[shape]
        m = fit_inverse_map(raw * 1e-3, r, 5)
        assert m.monotone and m.check_monotone()

    def test_mp_protocol_model_monotone(self):
        raw, r, _ = random_protocol(256, 500, 0, 0)
        assert fit_inverse_map(raw, r, 5).monotone
