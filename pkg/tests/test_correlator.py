import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpcorr.correlator import (InputPair, build_operands, gen_correlated, gen_correlated_batch,
                               gen_sinusoid_pair, mac_correlate, make_rng, mp_correlate,
                               mp_correlate_batch)
from mpcorr.errors import InputDomainError, NormalizationError
from mpcorr.experiments import monotone_within_se

vectors = st.lists(st.floats(-3, 3), min_size=1, max_size=10)


class TestOperands:
    def test_definition(self):
        plus, minus = build_operands([1.0], [2.0])
        np.testing.assert_array_equal(plus, [3, -3])
        np.testing.assert_array_equal(minus, [-1, 1])

    def test_equal_inputs(self):
        _, minus = build_operands([0.3, -2.0], [0.3, -2.0])
        assert not np.any(minus)

    def test_opposite_inputs(self):
        plus, _ = build_operands([0.3, -2.0], [-0.3, 2.0])
        assert not np.any(plus)

    def test_length_mismatch(self):
        with pytest.raises(InputDomainError):
            build_operands([1.0, 2.0], [1.0])

    @given(vectors)
    def test_exactly_symmetric(self, x):
        y = np.roll(x, 1)
        for ops in build_operands(x, y):
            n = len(x)
            np.testing.assert_array_equal(ops[n:], -ops[:n])


class TestMpCorrelate:
    def test_hand_solved_example(self):
        pair = InputPair([1.0, -1.0], [1.0, -1.0])
        np.testing.assert_allclose(mp_correlate(pair, 1.0).raw_output, 1.75, atol=1e-12)

    @given(vectors, st.floats(0.1, 10))
    def test_antisymmetry(self, x, gamma):
        y = np.cos(np.arange(len(x)))
        a = mp_correlate(InputPair(x, y), gamma).raw_output
        b = mp_correlate(InputPair(x, -y), gamma).raw_output
        np.testing.assert_allclose(b, -a, atol=1e-9)

    @given(vectors, st.floats(0.1, 10))
    def test_swap_symmetry(self, x, gamma):
        y = np.sin(np.arange(len(x)))
        assert mp_correlate(InputPair(x, y), gamma).raw_output == \
            mp_correlate(InputPair(y, x), gamma).raw_output

    @given(vectors, st.floats(0.1, 10))
    def test_zero_input(self, x, gamma):
        out = mp_correlate(InputPair(x, np.zeros(len(x))), gamma).raw_output
        assert abs(out) <= 1e-9

    def test_batch_matches_scalar(self):
        x, y = gen_correlated_batch(np.linspace(-0.9, 0.9, 7), 32, seed=1)
        batch = mp_correlate_batch(x, y, 3.0)
        single = [mp_correlate(InputPair(a, b), 3.0).raw_output for a, b in zip(x, y)]
        np.testing.assert_allclose(batch, single, atol=1e-12)

    def test_monte_carlo_mean_increasing(self):
        grid = np.round(np.arange(-0.9, 0.91, 0.1), 10)
        means, ses = [], []
        for k, r in enumerate(grid):
            x, y = gen_correlated_batch(np.full(200, r), 256, seed=2, stream=k)
            out = mp_correlate_batch(x, y, 0.085 * 256)
            means.append(out.mean())
            ses.append(out.std(ddof=1) / np.sqrt(out.size))
        means, ses = np.array(means), np.array(ses)
        assert np.all(np.diff(means) > 2 * np.sqrt(ses[1:] ** 2 + ses[:-1] ** 2))
        assert monotone_within_se(means, ses)


class TestMac:
    def test_constant_rejected(self):
        with pytest.raises(NormalizationError):
            mac_correlate(InputPair(np.ones(8), np.ones(8)))

    def test_identical(self):
        x = np.random.default_rng(0).normal(size=100)
        np.testing.assert_allclose(mac_correlate(InputPair(x, x)).r_hat, 1.0, atol=1e-12)

    def test_law_of_large_numbers(self):
        r = mac_correlate(gen_correlated(0.5, 10**6, seed=3)).r_hat
        assert abs(r - 0.5) <= 0.002


class TestGenerators:
    @pytest.mark.parametrize("dist", ["gaussian", "uniform"])
    def test_unit_correlation_exact(self, dist):
        pair = gen_correlated(1.0, 64, dist, seed=4)
        np.testing.assert_array_equal(pair.x, pair.y)

    @pytest.mark.parametrize("dist", ["gaussian", "uniform"])
    def test_independent(self, dist):
        n = 4096
        assert abs(mac_correlate(gen_correlated(0.0, n, dist, seed=5)).r_hat) <= 3 / np.sqrt(n)

    def test_target_point_seven(self):
        n = 4096
        assert abs(mac_correlate(gen_correlated(0.7, n, seed=6)).r_hat - 0.7) <= 3 / np.sqrt(n)

    def test_deterministic(self):
        a, b = gen_correlated(0.3, 50, seed=9), gen_correlated(0.3, 50, seed=9)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.x, gen_correlated(0.3, 50, seed=10).x)

    def test_batch_rows_regenerate(self):
        x, _ = gen_correlated_batch([0.1, 0.2, 0.3], 16, seed=1, stream=5)
        x2, _ = gen_correlated_batch([0.1, 0.2, 0.3, 0.4], 16, seed=1, stream=5)
        np.testing.assert_array_equal(x, x2[:3])

    @pytest.mark.parametrize("r", [1.5, -1.01, np.nan])
    def test_bad_r(self, r):
        with pytest.raises(InputDomainError):
            gen_correlated(r, 8)

    def test_rng_streams_independent(self):
        assert make_rng(1, 2).random() != make_rng(1, 3).random()
        assert make_rng(1, 2).random() == make_rng(1, 2).random()


class TestSinusoid:
    @given(st.integers(4, 512), st.integers(1, 3))
    def test_orthogonal_at_ninety(self, n, cycles):
        if n < 2 * cycles + 1:
            return
        assert abs(mac_correlate(gen_sinusoid_pair(90.0, n, cycles)).r_hat) <= 1e-12

    def test_in_phase(self):
        np.testing.assert_allclose(mac_correlate(gen_sinusoid_pair(0.0, 64, 2)).r_hat, 1.0, atol=1e-12)

    def test_sixty_degrees(self):
        r = mac_correlate(gen_sinusoid_pair(60.0, 1024, 5)).r_hat
        np.testing.assert_allclose(r, 0.5, atol=1e-10)

    def test_raw_inner_product_closed_form(self):
        pair = gen_sinusoid_pair(60.0, 1024, 5)
        np.testing.assert_allclose(np.dot(pair.x, pair.y) / 1024, 0.25, atol=1e-12)

    @pytest.mark.parametrize("kw", [dict(cycles=1.5), dict(cycles=0), dict(phase_deg=190.0)])
    def test_rejects(self, kw):
        args = dict(phase_deg=30.0, n=64, cycles=2) | kw
        with pytest.raises(InputDomainError):
            gen_sinusoid_pair(**args)
