"""
Summary statistics and the paired Wilcoxon signed-rank test.
"""

from itertools import product

import numpy as np
import pytest
from scipy.stats import norm, rankdata

from utils.errors import DomainError
from utils.stats import signed_rank_counts, summarize, wilcoxon_signed_rank


def _enumerated_p(a, b):
    """Two-sided p-value by listing all sign assignments."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    ranks = rankdata(np.abs(d))
    w = min(ranks[d > 0].sum(), ranks[d < 0].sum())
    totals = [sum(r for r, s in zip(ranks, signs) if s) for signs in product((0, 1), repeat=len(ranks))]
    tail = sum(1 for t in totals if t <= w + 1e-9)
    return min(1.0, 2.0 * tail / 2 ** len(ranks))


class TestSummarize:

    def test_mean_and_sample_std(self):
        mean, std = summarize([1.0, 2.0, 3.0, 4.0])
        assert mean == 2.5
        assert std == pytest.approx(np.std([1, 2, 3, 4], ddof=1), rel=1e-12)

    def test_single_value(self):
        assert summarize([7.0]) == (7.0, 0.0)

    def test_empty(self):
        with pytest.raises(DomainError):
            summarize([])


class TestCounts:

    def test_small_distribution(self):
        # ranks 1..3, doubled: subset sums of {2, 4, 6}
        counts = signed_rank_counts([2, 4, 6])
        assert list(counts) == [1, 0, 1, 0, 1, 0, 2, 0, 1, 0, 1, 0, 1]

    def test_total_is_two_to_the_n(self):
        assert signed_rank_counts(2 * np.arange(1, 16)).sum() == 2 ** 15


class TestWilcoxon:

    def test_all_one_sided(self):
        a = np.arange(6, dtype=float) + 10.0
        b = a - np.arange(1, 7)
        assert wilcoxon_signed_rank(a, b) == pytest.approx(2.0 / 64.0, rel=1e-12)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=12), rng.normal(size=12)
        assert wilcoxon_signed_rank(a, b) == wilcoxon_signed_rank(b, a)

    def test_matches_enumeration_with_ties(self):
        a = [3.0, 5.0, 2.0, 8.0, 7.0, 4.0, 6.0, 1.5]
        b = [1.0, 6.0, 4.0, 6.0, 4.0, 5.0, 3.0, 0.5]
        assert wilcoxon_signed_rank(a, b) == pytest.approx(_enumerated_p(a, b), rel=1e-12)

    def test_zero_differences_dropped(self):
        a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
        b = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        assert wilcoxon_signed_rank(a, b) == pytest.approx(2.0 / 64.0, rel=1e-12)

    def test_identical_samples(self):
        a = [1.0, 2.0, 3.0, 4.0, 5.0]
        assert wilcoxon_signed_rank(a, a) == 1.0

    # differences +-1..15; W is the sum of the negative magnitudes, and the
    # exact tail counts subsets of 1..15 summing to at most W
    @pytest.mark.parametrize("negative,tail", [((), 1), ((15,), 137), ((10, 15), 785)])
    def test_exact_and_approx_agree_at_n15(self, negative, tail):
        d = np.array([-k if k in negative else k for k in range(1, 16)], dtype=float)
        exact = wilcoxon_signed_rank(d, np.zeros(15), method="exact")
        approx = wilcoxon_signed_rank(d, np.zeros(15), method="approx")
        assert exact == pytest.approx(2.0 * tail / 2 ** 15, rel=1e-12)
        assert exact == pytest.approx(approx, abs=1e-2)

    def test_every_sign_pattern_matches_enumeration(self):
        magnitudes = np.array([1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
        for signs in product((-1.0, 1.0), repeat=len(magnitudes)):
            d = magnitudes * np.array(signs)
            zeros = np.zeros(len(d))
            assert wilcoxon_signed_rank(d, zeros) == pytest.approx(_enumerated_p(d, zeros), rel=1e-12)

    def test_large_sample_uses_normal_approximation(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=40)
        b = a - 0.5 + rng.normal(0, 0.2, size=40)
        d = a - b
        ranks = rankdata(np.abs(d))
        w = min(ranks[d > 0].sum(), ranks[d < 0].sum())
        mean, var = 40 * 41 / 4, 40 * 41 * 81 / 24
        expected = 2 * norm.sf((abs(w - mean) - 0.5) / np.sqrt(var))
        assert wilcoxon_signed_rank(a, b) == pytest.approx(expected, rel=1e-9)

    def test_too_few_pairs(self):
        with pytest.raises(DomainError):
            wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])

    def test_size_mismatch(self):
        with pytest.raises(DomainError):
            wilcoxon_signed_rank([1.0] * 6, [0.0] * 5)
