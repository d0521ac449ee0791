import math

import numpy as np
import pytest

from qwentropy.entropy import (
    FiniteDistribution,
    block_jackknife_entropy,
    cw_cycle_rate_mc,
    cw_entropy_rate,
    cw_entropy_rate_gaussian,
    cw_limit,
    cw_shift_distribution,
    cycle_shift,
    shannon_entropy,
)
from qwentropy.errors import InvalidDistributionError

import oracles


class TestShannon:
    def test_fair_coin(self):
        assert shannon_entropy([0.5, 0.5]) == 1.0

    def test_quarter_half_quarter(self):
        assert shannon_entropy({-2: 0.25, 0: 0.5, 2: 0.25}) == pytest.approx(1.5, abs=1e-15)

    def test_binomial_three(self):
        assert shannon_entropy([1 / 8, 3 / 8, 3 / 8, 1 / 8]) == pytest.approx(1.811278124459133, abs=1e-12)

    def test_zero_terms(self):
        assert shannon_entropy([0.0, 1.0, 0.0]) == 0.0

    @pytest.mark.parametrize("bad", [[0.5, 0.6], [1.2, -0.2], [0.3]])
    def test_invalid(self, bad):
        with pytest.raises(InvalidDistributionError):
            shannon_entropy(bad)

    def test_tolerates_tiny_roundoff(self):
        assert shannon_entropy([0.5, 0.5 + 5e-7]) == pytest.approx(1.0, abs=1e-5)

    def test_bounded_by_log_support(self):
        rng = np.random.default_rng(0)
        for n in (2, 5, 40):
            p = rng.dirichlet(np.ones(n))
            assert 0.0 <= shannon_entropy(p) <= math.log2(n)


class TestFiniteDistribution:
    def test_from_mapping_sorts(self):
        d = FiniteDistribution.from_mapping({2: 0.25, -2: 0.25, 0: 0.5})
        assert d.labels == (-2, 0, 2)
        assert d[0] == 0.5 and d[7] == 0.0

    def test_rejects_bad_sum(self):
        with pytest.raises(InvalidDistributionError):
            FiniteDistribution((0, 1), np.array([0.5, 0.5 + 1e-6]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(InvalidDistributionError):
            FiniteDistribution((0,), np.array([0.5, 0.5]))


class TestClassical:
    @pytest.mark.parametrize("w,expected", [(1, 1.0), (2, 1.5), (3, 1.811278124459133)])
    def test_small_w(self, w, expected):
        assert cw_entropy_rate(w) == pytest.approx(expected, abs=1e-12)

    def test_closed_form_equals_oracle(self):
        for w in range(1, 31):
            assert cw_entropy_rate(w) == pytest.approx(oracles.binomial_entropy(w), abs=1e-12)
            assert cw_entropy_rate(w) == pytest.approx(shannon_entropy(cw_shift_distribution(w)), abs=1e-12)

    def test_large_w_in_log_space(self):
        assert cw_entropy_rate(5000) == pytest.approx(oracles.binomial_entropy(5000), abs=1e-9)

    def test_gaussian(self):
        assert cw_entropy_rate_gaussian(1) == pytest.approx(1.0471, abs=1e-4)
        assert abs(cw_entropy_rate_gaussian(100) - cw_entropy_rate(100)) < 0.01

    def test_gaussian_gap_shrinks(self):
        ws = [5, 10, 20, 50, 100, 300, 1000, 3000, 10000]
        gaps = [cw_entropy_rate_gaussian(w) - cw_entropy_rate(w) for w in ws]
        assert all(g > 0 for g in gaps)
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-4

    def test_limits(self):
        assert cw_limit(16) == 3.0
        assert cw_limit(17) == pytest.approx(math.log2(17))
        assert cw_limit(3) == pytest.approx(math.log2(3))
        with pytest.raises(ValueError):
            cw_limit(2)

    def test_cycle_shift_representative(self):
        assert cycle_shift(8, 16) == 8
        assert cycle_shift(9, 16) == -7
        assert cycle_shift(-8, 16) == 8
        assert list(cycle_shift(np.array([-3, 3, 4]), 7)) == [-3, 3, -3]

    def test_folded_distribution_keeps_parity(self):
        d = cw_shift_distribution(216, 16)
        assert all(x % 2 == 0 for x in d.labels)
        assert shannon_entropy(d) == pytest.approx(3.0, abs=1e-9)

    def test_odd_cycle_uses_all_residues(self):
        d = cw_shift_distribution(200, 7)
        assert len(d) == 7
        assert shannon_entropy(d) == pytest.approx(math.log2(7), abs=1e-9)


class TestMonteCarlo:
    def test_small_w_on_large_cycle(self):
        est = cw_cycle_rate_mc(2, 1001, 200_000, seed=4)
        assert abs(est.value - 1.5) <= 3 * est.stderr + 1e-9
        assert sum(est.counts.values()) == 200_000

    def test_single_step(self):
        est = cw_cycle_rate_mc(1, 16, 100_000, seed=1)
        assert abs(est.value - 1.0) <= 3 * est.stderr + 1e-4

    def test_saturates_on_cycle(self):
        est = cw_cycle_rate_mc(216, 16, 200_000, seed=2)
        assert est.value == pytest.approx(3.0, abs=0.05)

    def test_parity_on_even_cycle(self):
        est = cw_cycle_rate_mc(7, 16, 10_000, seed=3)
        assert all(d % 2 == 1 for d in est.counts)

    def test_reproducible(self):
        assert cw_cycle_rate_mc(5, 9, 5000, 7) == cw_cycle_rate_mc(5, 9, 5000, 7)

    @pytest.mark.parametrize("w,M", [(3, 40), (60, 12)])
    def test_converges_to_line_or_cycle_limit(self, w, M):
        est = cw_cycle_rate_mc(w, M, 200_000, seed=5)
        target = cw_entropy_rate(w) if w <= M / 4 else cw_limit(M)
        assert abs(est.value - target) <= 3 * est.stderr + 2e-4

    def test_jackknife_error_matches_spread(self):
        # independent replicas should scatter by about the reported error
        values, errs = [], []
        for seed in range(20):
            v, e, _ = block_jackknife_entropy(np.random.default_rng(seed).integers(0, 6, 20_000))
            values.append(v)
            errs.append(e)
        assert 0.5 < np.std(values) / np.mean(errs) < 2.0

    def test_jackknife_rejects_empty(self):
        with pytest.raises(ValueError):
            block_jackknife_entropy(np.array([]))
