import math

import numpy as np
import pytest

from licodec.errors import CodecError, CodingRangeError, ConfigError
from licodec.gaussian import (
    DEFAULT_PRECISION,
    TablePool,
    build_frequency_table,
    erf,
    folded_pmf,
    make_scale_table,
    normal_cdf,
    quantize_sigma,
    quantize_sigma_array,
    rate_estimate,
    scale_table_by_id,
    split_mu,
    symbol_probability,
)
from licodec.rangecoder import encode


def phi_ref(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def sigma_for_center_prob(target):
    """Invert p(0 | 0, sigma) = 2*Phi(0.5/sigma) - 1 by bisection (oracle)."""
    lo, hi = 1e-3, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p = 2.0 * phi_ref(0.5 / mid) - 1.0
        if p > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestCdf:
    def test_erf_accuracy_contract(self):
        xs = np.concatenate(
            [np.linspace(-8, 8, 40_001), np.array([0.0, 1.999, 2.0, 2.001, -2.0])]
        )
        ref = np.array([math.erf(v) for v in xs])
        assert np.max(np.abs(erf(xs) - ref)) < 1e-12

    def test_normal_cdf_accuracy(self):
        xs = np.linspace(-10, 10, 20_001)
        ref = np.array([phi_ref(v) for v in xs])
        assert np.max(np.abs(normal_cdf(xs) - ref)) < 1e-12

    def test_lower_tail_relative_accuracy(self):
        xs = np.array([-6.0, -8.0, -12.0, -20.0])
        got = normal_cdf(xs)
        ref = np.array([phi_ref(v) for v in xs])
        assert np.all(np.abs(got / ref - 1.0) < 1e-11)


class TestSymbolProbability:
    def test_center_probability_closed_form(self):
        p = symbol_probability(0, 0.0, 0.5)
        assert p == pytest.approx(2 * phi_ref(1.0) - 1.0, abs=1e-12)
        assert p == pytest.approx(0.682689, abs=1e-6)

    def test_numerical_integration_oracle(self):
        # Simpson's rule over the density as an independent check
        mu, sigma, s = 0.37, 1.3, 1
        grid = np.linspace(s - 0.5, s + 0.5, 2001)
        dens = np.exp(-((grid - mu) ** 2) / (2 * sigma**2)) / (
            sigma * math.sqrt(2 * math.pi)
        )
        simpson = (grid[1] - grid[0]) / 3 * (
            dens[0] + dens[-1] + 4 * dens[1:-1:2].sum() + 2 * dens[2:-2:2].sum()
        )
        assert symbol_probability(s, mu, sigma) == pytest.approx(simpson, abs=1e-10)

    def test_symmetry_around_integer_mean(self):
        for d in (1, 2, 5):
            assert symbol_probability(3 + d, 3.0, 0.8) == pytest.approx(
                symbol_probability(3 - d, 3.0, 0.8), abs=1e-15
            )

    def test_point_mass_limit(self):
        assert symbol_probability(2, 2.0, 1e-4) == pytest.approx(1.0, abs=1e-12)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(CodecError):
            symbol_probability(0, 0.0, 0.0)
        with pytest.raises(CodecError):
            symbol_probability(0, 0.0, -1.0)


class TestScaleTable:
    def test_default_table_shape(self):
        t = scale_table_by_id(0)
        assert len(t) == 64
        assert t[0] == pytest.approx(0.04)
        assert t[-1] == pytest.approx(256.0)
        assert np.all(np.diff(np.log(t)) > 0)

    def test_quantize_idempotent_on_table_values(self):
        t = scale_table_by_id(0)
        for i in (0, 7, 31, 63):
            assert quantize_sigma(float(t[i]), t) == i

    def test_clamping_below_and_above(self):
        t = scale_table_by_id(0)
        assert quantize_sigma(1e-9, t) == 0
        assert quantize_sigma(1e9, t) == len(t) - 1

    def test_geometric_midpoint_ties_to_lower(self):
        t = make_scale_table(0.5, 8.0, 5)
        mid = math.sqrt(t[2] * t[3])
        assert quantize_sigma(mid, t) == 2

    def test_bad_table_rejected(self):
        with pytest.raises(ConfigError):
            quantize_sigma_array(np.array([1.0]), np.array([2.0, 1.0]))


class TestFoldedPmf:
    def test_rows_sum_to_one(self, rng):
        mus = rng.uniform(-0.5, 0.5, size=1000)
        sigmas = np.exp(rng.uniform(math.log(0.04), math.log(256.0), size=1000))
        pmf = folded_pmf(mus, sigmas, -32, 32)
        assert np.max(np.abs(pmf.sum(axis=1) - 1.0)) < 1e-9
        assert np.all(pmf >= 0)

    def test_interior_matches_symbol_probability(self):
        pmf = folded_pmf(np.array([0.2]), np.array([1.5]), -8, 8)
        assert pmf[0, 8 + 3] == pytest.approx(
            symbol_probability(3, 0.2, 1.5), abs=1e-14
        )

    def test_edges_absorb_tails(self):
        pmf = folded_pmf(np.array([0.0]), np.array([10.0]), -2, 2)
        raw = symbol_probability(-2, 0.0, 10.0)
        assert pmf[0, 0] > raw  # left edge includes the lower tail


class TestFrequencyTable:
    def test_sum_is_exactly_two_pow_precision(self, rng):
        for _ in range(300):
            off = float(rng.integers(-2048, 2048)) / 4096.0
            idx = int(rng.integers(0, 64))
            prec = int(rng.integers(8, 17))
            t = build_frequency_table(off, idx, (-32, 32), prec)
            assert sum(t.freqs) == 1 << prec
            assert min(t.freqs) >= 1

    def test_equal_two_symbol_split(self):
        # Gaussian centered exactly on the boundary between the two symbols:
        # each side carries probability 1/2, so precision 8 gives [128, 128]
        for idx in (0, 20, 63):
            t = build_frequency_table(-0.5, idx, (-1, 0), 8)
            assert t.freqs == (128, 128)
        t3 = build_frequency_table(0.0, 63, (-1, 1), 8)
        assert sum(t3.freqs) == 256
        assert t3.freqs[0] == t3.freqs[2]

    def test_palindromic_when_symmetric(self):
        t = build_frequency_table(0.0, 20, (-8, 8), 16)
        assert t.freqs == t.freqs[::-1]

    def test_rebuild_bit_identical(self):
        a = build_frequency_table(-0.25, 17, (-32, 32), 16)
        b = build_frequency_table(-0.25, 17, (-32, 32), 16)
        assert a == b

    def test_range_too_small(self):
        with pytest.raises(ConfigError, match="2 symbols"):
            build_frequency_table(0.0, 0, (0, 0), 8)

    def test_precision_cannot_cover_range(self):
        with pytest.raises(ConfigError, match="precision"):
            build_frequency_table(0.0, 0, (-200, 200), 8)

    def test_precision_bounds(self):
        with pytest.raises(ConfigError):
            build_frequency_table(0.0, 0, (-4, 4), 7)
        with pytest.raises(ConfigError):
            build_frequency_table(0.0, 0, (-4, 4), 17)

    def test_offset_domain(self):
        with pytest.raises(ConfigError):
            build_frequency_table(0.5, 0, (-4, 4), 8)

    def test_slot_out_of_range(self):
        t = build_frequency_table(0.0, 10, (-4, 4), 12)
        with pytest.raises(CodingRangeError):
            t.slot(5)


class TestSplitMu:
    def test_offsets_in_grid_range(self, rng):
        mu = rng.uniform(-20, 20, size=5000)
        rnd, off = split_mu(mu, 16)
        assert np.all(rnd >= -16) and np.all(rnd <= 16)
        assert np.all(off >= -2048) and np.all(off < 2048)

    def test_half_offset_recenters(self):
        # mu = r + 0.49994 quantizes to +0.5 -> recenters to -0.5 with r+1
        rnd, off = split_mu(np.array([3.49994]), 16)
        assert rnd[0] == 4
        assert off[0] == -2048

    def test_exact_values(self):
        rnd, off = split_mu(np.array([2.25, -2.25, 0.0]), 16)
        assert rnd.tolist() == [2, -2, 0]
        assert off.tolist() == [1024, -1024, 0]


class TestRateEstimate:
    def test_single_symbol_half_probability_is_one_bit(self):
        sigma_star = sigma_for_center_prob(0.5)
        table = np.array([sigma_star * 0.5, sigma_star, sigma_star * 2.0])
        bits = rate_estimate(
            np.array([0]), np.array([0.0]), np.array([sigma_star]),
            symbol_bound=16, scale_table=table,
        )
        assert bits == pytest.approx(1.0, abs=1e-6)

    def test_n_quarter_probability_symbols(self):
        sigma_star = sigma_for_center_prob(0.25)
        table = np.array([sigma_star * 0.5, sigma_star, sigma_star * 2.0])
        n = 10
        bits = rate_estimate(
            np.zeros(n, dtype=int), np.zeros(n), np.full(n, sigma_star),
            symbol_bound=16, scale_table=table,
        )
        assert bits == pytest.approx(2.0 * n, abs=1e-5)

    def test_translation_invariance(self, rng):
        n = 64
        sym = rng.integers(-4, 5, size=n)
        mu = rng.uniform(-2, 2, size=n)
        sigma = np.exp(rng.uniform(-1, 1, size=n))
        base = rate_estimate(sym, mu, sigma, symbol_bound=16)
        for t in (-3, 2, 7):
            shifted = rate_estimate(sym + t, mu + t, sigma, symbol_bound=16)
            assert shifted == pytest.approx(base, abs=1e-9)

    def test_tracks_actual_coded_length(self, rng):
        n = 1000
        mu = rng.uniform(-3, 3, size=n)
        sigma = np.exp(rng.uniform(math.log(0.3), math.log(4.0), size=n))
        pool = TablePool(-32, 32, DEFAULT_PRECISION)
        rnd, off = split_mu(mu, 16)
        idx = quantize_sigma_array(sigma, pool.scale_table)
        # draw symbols from the model itself so the estimate is meaningful
        res = np.clip(
            np.rint(rng.normal(off / 4096.0, pool.scale_table[idx])), -32, 32
        ).astype(np.int64)
        sym = res + rnd
        est = rate_estimate(sym, mu, sigma, symbol_bound=16)
        stream = encode([int(r) for r in res], pool.tables(off, idx))
        actual = 8 * len(stream.data)
        assert abs(actual - est) <= 0.005 * est + 32

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            rate_estimate(np.zeros(3, int), np.zeros(2), np.ones(3), symbol_bound=8)

    def test_out_of_range_symbol_rejected(self):
        with pytest.raises(CodingRangeError):
            rate_estimate(
                np.array([99]), np.array([0.0]), np.array([1.0]), symbol_bound=16
            )
