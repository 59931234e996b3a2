import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from accident_severity.stats import (
    ContingencyTable, StatsError, binomial_tail_test, chi_square_test, clopper_pearson,
    fisher_exact_2x2, hypergeometric_2x2, midranks, normality_check, tail, welch_t_test,
    wilcoxon_rank_sum,
)


def enum_rank_sum_p(x, y):
    """Two-sided exact p by listing every assignment of ranks to x."""
    n, nx = len(x) + len(y), len(x)
    ranks, _ = midranks(np.r_[x, y])
    w = ranks[:nx].sum()
    sums = [sum(c) for c in itertools.combinations(range(1, n + 1), nx)]
    lo = sum(s <= w for s in sums)
    hi = sum(s >= w for s in sums)
    return min(1.0, 2 * min(lo, hi) / len(sums))


def enum_fisher_p(table):
    (a, b), (c, d) = table
    r1, c1, n = a + b, a + c, a + b + c + d

    def prob(k):
        return Fraction(math.comb(r1, k) * math.comb(n - r1, c1 - k), math.comb(n, c1))

    support = range(max(0, c1 - (n - r1)), min(r1, c1) + 1)
    p_obs = prob(a)
    return float(sum(prob(k) for k in support if prob(k) <= p_obs))


def yates_closed_form(table):
    (a, b), (c, d) = table
    n = a + b + c + d
    num = n * max(0.0, abs(a * d - b * c) - n / 2) ** 2
    return num / ((a + b) * (c + d) * (a + c) * (b + d))


class TestRankSum:
    def test_small_exact_example(self):
        r = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
        assert r.statistic == 6
        assert r.p_value == pytest.approx(0.1, abs=1e-12)
        assert r.method_detail == "exact"

    def test_identical_samples(self):
        assert wilcoxon_rank_sum([1, 2], [1, 2]).p_value == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=20, unique=True))
    def test_monotone_transform_invariance(self, v):
        k = len(v) // 2
        a = wilcoxon_rank_sum(v[:k] or v[:1], v[k:])
        w = [t ** 3 + 5 * t for t in v]
        b = wilcoxon_rank_sum(w[:k] or w[:1], w[k:])
        assert a.statistic == b.statistic
        assert a.p_value == pytest.approx(b.p_value, abs=1e-12)

    def test_separated_samples_use_corrected_normal(self):
        r = wilcoxon_rank_sum(range(1, 11), range(11, 21))
        assert r.statistic == 55
        # z = (|55 - 105| - 0.5) / sqrt(175)
        assert r.p_value == pytest.approx(2 * sps.norm.sf(49.5 / math.sqrt(175)), rel=1e-9)

    @pytest.mark.parametrize("nx,ny", [(1, 1), (2, 3), (4, 4), (3, 7), (5, 5), (6, 6)])
    def test_matches_enumeration(self, nx, ny):
        rng = np.random.default_rng(nx * 31 + ny)
        for _ in range(5):
            v = rng.permutation(nx + ny).astype(float)
            x, y = v[:nx], v[nx:]
            assert wilcoxon_rank_sum(x, y).p_value == pytest.approx(enum_rank_sum_p(x, y), abs=1e-12)

    def test_tie_correction_matches_scipy(self):
        x = [1, 2, 2, 3, 3, 3, 7, 8, 9, 9]
        y = [2, 3, 4, 4, 5, 6, 6, 6, 10, 11, 12]
        ref = sps.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=True)
        assert wilcoxon_rank_sum(x, y).p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_all_tied(self):
        r = wilcoxon_rank_sum([5] * 8, [5] * 9)
        assert r.p_value == 1.0

    def test_empty_raises(self):
        with pytest.raises(StatsError):
            wilcoxon_rank_sum([], [1, 2])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=15), st.lists(st.integers(0, 20), min_size=1, max_size=15))
    def test_symmetry_and_range(self, x, y):
        a = wilcoxon_rank_sum(x, y)
        b = wilcoxon_rank_sum(y, x)
        assert 0.0 <= a.p_value <= 1.0
        assert a.p_value == pytest.approx(b.p_value, abs=1e-12)
        n = len(x) + len(y)
        assert a.statistic + b.statistic == pytest.approx(n * (n + 1) / 2)


class TestWelch:
    def test_example(self):
        r = welch_t_test([1, 2, 3], [2, 3, 4])
        assert r.statistic == pytest.approx(-1.224745, abs=1e-6)
        assert r.df == pytest.approx(4.0)
        assert r.p_value == pytest.approx(0.2878641, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(0, 1, 7), rng.normal(0.5, 3, 11)
        ref = sps.ttest_ind(x, y, equal_var=False)
        r = welch_t_test(x, y)
        assert r.statistic == pytest.approx(ref.statistic, rel=1e-9)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_one_constant_group_is_allowed(self):
        r = welch_t_test([1, 1, 1], [1, 2, 3, 4])
        assert r.df == pytest.approx(3.0)

    def test_both_constant_raises(self):
        with pytest.raises(StatsError):
            welch_t_test([2, 2], [3, 3])


class TestNormality:
    def test_example(self):
        x = [1, 1, 1, 1, 1, 1, 1, 1, 1, 10]
        r = normality_check(x)
        assert r.statistic == pytest.approx(scipy_jb(x), rel=1e-12)
        assert r.p_value == pytest.approx(sps.jarque_bera(x).pvalue, rel=1e-9)

    def test_subsample_is_deterministic(self):
        x = np.random.default_rng(1).exponential(size=12_000)
        a, b = normality_check(x), normality_check(x)
        assert a == b
        assert "subsample" in a.method_detail

    def test_too_small(self):
        with pytest.raises(StatsError):
            normality_check([1, 2, 3])

    def test_constant(self):
        with pytest.raises(StatsError):
            normality_check([3.0] * 20)


def scipy_jb(x):
    return sps.jarque_bera(x).statistic


class TestChiSquare:
    def test_yates_example(self):
        r = chi_square_test(ContingencyTable([[10, 20], [20, 10]]))
        assert r.statistic == pytest.approx(5.4, abs=1e-12)
        assert r.p_value == pytest.approx(0.020137, abs=1e-5)

    def test_three_by_two(self):
        r = chi_square_test(ContingencyTable([[10, 10], [10, 15], [5, 10]]))
        ref = sps.chi2_contingency([[10, 10], [10, 15], [5, 10]], correction=False)
        assert r.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert r.df == 2

    @pytest.mark.parametrize("seed", range(100))
    def test_yates_closed_form(self, seed):
        t = np.random.default_rng(seed).integers(1, 60, size=(2, 2))
        assert chi_square_test(ContingencyTable(t)).statistic == pytest.approx(yates_closed_form(t.tolist()), abs=1e-9)

    def test_zero_margin(self):
        with pytest.raises(StatsError):
            chi_square_test(ContingencyTable([[0, 0], [3, 4]]))

    def test_from_labels(self):
        ct = ContingencyTable.from_labels(["a", "b", "a", "a"], [1, 0, 0, 1])
        assert ct.counts.tolist() == [[1, 2], [1, 0]]
        assert ct.row_labels == ("a", "b")


class TestFisher:
    def test_examples(self):
        assert fisher_exact_2x2(ContingencyTable([[3, 1], [1, 3]])).p_value == pytest.approx(0.4857143, abs=1e-6)
        assert fisher_exact_2x2(ContingencyTable([[5, 0], [0, 5]])).p_value == pytest.approx(0.0079365, abs=1e-6)

    def test_support_sums_to_one(self):
        _, probs, _ = hypergeometric_2x2(ContingencyTable([[7, 2], [4, 9]]))
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 10), min_size=4, max_size=4))
    def test_matches_scipy(self, cells):
        t = [cells[:2], cells[2:]]
        if sum(cells) == 0:
            return
        assert fisher_exact_2x2(ContingencyTable(t)).p_value == pytest.approx(sps.fisher_exact(t).pvalue, abs=1e-9)

    def test_not_2x2(self):
        with pytest.raises(StatsError):
            fisher_exact_2x2(ContingencyTable([[1, 2, 3], [4, 5, 6]]))


class TestBinomial:
    def test_examples(self):
        assert binomial_tail_test(9, 10, 0.5).p_value == pytest.approx(0.0107421875, abs=1e-12)
        assert binomial_tail_test(5, 10, 0.45).p_value == pytest.approx(sps.binom.sf(4, 10, 0.45), rel=1e-12)

    def test_edges(self):
        assert binomial_tail_test(0, 10, 0.3).p_value == 1.0
        assert binomial_tail_test(3, 10, 0.0).p_value == 0.0

    def test_large_n_stays_finite(self):
        p = binomial_tail_test(900, 1000, 0.5).p_value
        assert 0.0 <= p < 1e-100

    @pytest.mark.parametrize("k,n", [(-1, 5), (6, 5)])
    def test_bad_counts(self, k, n):
        with pytest.raises(StatsError):
            binomial_tail_test(k, n, 0.5)


def bisect_cp(k, n, alpha):
    """Clopper-Pearson bounds by bisecting the binomial tails."""
    def solve(f, target):
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = (lo + hi) / 2
            if f(mid) < target:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    lower = 0.0 if k == 0 else solve(lambda p: sps.binom.sf(k - 1, n, p), alpha / 2)
    upper = 1.0 if k == n else solve(lambda p: -sps.binom.cdf(k, n, p), -alpha / 2)
    return lower, upper


class TestClopperPearson:
    @pytest.mark.parametrize("k,n,expected", [
        (0, 10, (0.0, 0.3084971)), (10, 10, (0.6915029, 1.0)), (5, 10, (0.1870860, 0.8129140)),
    ])
    def test_examples(self, k, n, expected):
        lo, hi = clopper_pearson(k, n)
        assert lo == pytest.approx(expected[0], abs=1e-6)
        assert hi == pytest.approx(expected[1], abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 200).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    def test_matches_bisection(self, kn):
        k, n = kn
        lo, hi = clopper_pearson(k, n)
        blo, bhi = bisect_cp(k, n, 0.05)
        assert lo == pytest.approx(blo, abs=1e-9)
        assert hi == pytest.approx(bhi, abs=1e-9)
        assert 0 <= lo <= k / n <= hi <= 1

    def test_n_zero(self):
        with pytest.raises(StatsError):
            clopper_pearson(0, 0)


def test_tail_distributions():
    assert tail("normal", 1.96) == pytest.approx(sps.norm.sf(1.96))
    assert tail("chi_square", 3.0, 2) == pytest.approx(sps.chi2.sf(3.0, 2))
    assert tail("student_t", 2.0, 5) == pytest.approx(sps.t.sf(2.0, 5))
    with pytest.raises(StatsError):
        tail("gamma", 1.0, 1)


def test_midranks():
    ranks, sizes = midranks([3, 1, 3, 2])
    assert ranks.tolist() == [3.5, 1.0, 3.5, 2.0]
    assert sorted(sizes.tolist()) == [1, 1, 2]
