"""Two-sample and contingency tests, binomial tails and intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

EXACT_WILCOXON_MAX_N = 12
NORMALITY_SUBSAMPLE = 5000
FISHER_RELATIVE_SLACK = 1e-7


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    df: float | None = None
    method_detail: str = ""

    __test__ = False  # not a pytest class


@dataclass
class ContingencyTable:
    counts: np.ndarray
    row_labels: tuple = ()
    col_labels: tuple = ()

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2:
            raise StatsError("contingency table must be two-dimensional")
        if (self.counts < 0).any():
            raise StatsError("contingency counts must be non-negative")
        r, c = self.counts.shape
        if not self.row_labels:
            self.row_labels = tuple(range(r))
        if not self.col_labels:
            self.col_labels = tuple(range(c))

    @classmethod
    def from_labels(cls, rows: Sequence, cols: Sequence) -> "ContingencyTable":
        rows = list(rows)
        cols = list(cols)
        if len(rows) != len(cols):
            raise StatsError("label sequences differ in length")
        rl = tuple(sorted(set(rows), key=str))
        cl = tuple(sorted(set(cols), key=str))
        ri = {v: i for i, v in enumerate(rl)}
        ci = {v: i for i, v in enumerate(cl)}
        counts = np.zeros((len(rl), len(cl)), dtype=np.int64)
        for a, b in zip(rows, cols):
            counts[ri[a], ci[b]] += 1
        return cls(counts, rl, cl)

    @property
    def shape(self):
        return self.counts.shape

    def expected(self) -> np.ndarray:
        n = self.counts.sum()
        return np.outer(self.counts.sum(axis=1), self.counts.sum(axis=0)) / n


# -- distribution tails ----------------------------------------------------------------


def tail(dist: str, statistic: float, df: float | None = None) -> float:
    """Upper-tail probability P(X >= statistic) for 'normal', 'chi_square' or 'student_t'."""
    if dist == "normal":
        return float(special.ndtr(-statistic))
    if df is None or not df > 0:
        raise StatsError(f"{dist} tail needs df > 0, got {df}")
    if dist == "chi_square":
        if statistic <= 0:
            return 1.0
        return float(special.chdtrc(df, statistic))
    if dist == "student_t":
        return float(special.stdtr(df, -statistic))
    raise StatsError(f"unknown distribution {dist!r}")


def _clip01(p):
    return float(min(1.0, max(0.0, p)))


# -- rank-sum ----------------------------------------------------------------------------


def midranks(values) -> tuple[np.ndarray, np.ndarray]:
    """1-based ranks with ties given their average rank, plus the tie-group sizes."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    sv = values[order]
    n = len(sv)
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    sizes = np.diff(np.r_[starts, n])
    avg = starts + (sizes + 1) / 2.0
    ranks = np.empty(n)
    ranks[order] = np.repeat(avg, sizes)
    return ranks, sizes


def _rank_sum_counts(n_total, k):
    """Number of k-subsets of {1..n_total} for every attainable sum (index = sum)."""
    max_sum = sum(range(n_total - k + 1, n_total + 1))
    ways = np.zeros((k + 1, max_sum + 1), dtype=object)
    ways[0, 0] = 1
    for r in range(1, n_total + 1):
        for j in range(min(r, k), 0, -1):
            ways[j, r:] = ways[j, r:] + ways[j - 1, : max_sum + 1 - r]
    return ways[k]


def wilcoxon_rank_sum(x, y) -> TestResult:
    """Two-sided rank-sum test; the statistic is the rank sum of ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx == 0 or ny == 0:
        raise StatsError("rank-sum test needs two non-empty samples")
    n = nx + ny
    ranks, ties = midranks(np.concatenate([x, y]))
    w = float(ranks[:nx].sum())
    has_ties = bool((ties > 1).any())

    if n <= EXACT_WILCOXON_MAX_N and not has_ties:
        counts = _rank_sum_counts(n, nx)
        total = sum(counts)
        wi = int(round(w))
        lower = sum(counts[: wi + 1])
        upper = sum(counts[wi:])
        p = 2 * min(lower, upper) / total
        return TestResult("wilcoxon", w, _clip01(p), None, "exact")

    mean = nx * (n + 1) / 2.0
    tie_term = float((ties ** 3 - ties).sum())
    var = nx * ny * (n + 1) / 12.0 - nx * ny * tie_term / (12.0 * n * (n - 1)) if n > 1 else 0.0
    if var <= 0:
        return TestResult("wilcoxon", w, 1.0, None, "normal approximation; all values tied")
    d = w - mean
    d = math.copysign(max(abs(d) - 0.5, 0.0), d)
    z = d / math.sqrt(var)
    p = 2 * tail("normal", abs(z))
    return TestResult("wilcoxon", w, _clip01(p), None, "normal approximation with tie and continuity correction")


def welch_t_test(x, y) -> TestResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or len(y) < 2:
        raise StatsError("Welch test needs at least two values per sample")
    vx = x.var(ddof=1) / len(x)
    vy = y.var(ddof=1) / len(y)
    se2 = vx + vy
    if not se2 > 0:
        raise StatsError("Welch test undefined: both samples have zero variance")
    t = (x.mean() - y.mean()) / math.sqrt(se2)
    terms = (vx ** 2 / (len(x) - 1) if vx > 0 else 0.0) + (vy ** 2 / (len(y) - 1) if vy > 0 else 0.0)
    df = se2 ** 2 / terms
    p = 2 * tail("student_t", abs(t), df)
    return TestResult("welch_t", float(t), _clip01(p), float(df), "Welch-Satterthwaite")


def normality_check(x, cap: int = NORMALITY_SUBSAMPLE, seed: int = 0) -> TestResult:
    """Jarque-Bera test on at most ``cap`` values (a fixed-seed subsample beyond that)."""
    x = np.asarray(x, dtype=float)
    if len(x) < 8:
        raise StatsError(f"normality check needs n >= 8, got {len(x)}")
    detail = "exact moments"
    if len(x) > cap:
        idx = np.sort(np.random.default_rng(seed).choice(len(x), size=cap, replace=False))
        x = x[idx]
        detail = f"subsample of {cap}"
    n = len(x)
    dev = x - x.mean()
    m2 = np.mean(dev ** 2)
    if not m2 > 0:
        raise StatsError("normality check undefined for a constant sample")
    skew = np.mean(dev ** 3) / m2 ** 1.5
    kurt = np.mean(dev ** 4) / m2 ** 2 - 3.0
    jb = n / 6.0 * (skew ** 2 + kurt ** 2 / 4.0)
    return TestResult("jarque_bera", float(jb), _clip01(tail("chi_square", jb, 2)), 2.0, detail)


# -- contingency tables ------------------------------------------------------------------


def chi_square_test(ct: ContingencyTable) -> TestResult:
    """Pearson chi-square; 2x2 tables get the Yates continuity correction."""
    if not isinstance(ct, ContingencyTable):
        ct = ContingencyTable(ct)
    obs = ct.counts.astype(float)
    r, c = obs.shape
    if r < 2 or c < 2:
        raise StatsError(f"chi-square test needs at least a 2x2 table, got {r}x{c}")
    if (obs.sum(axis=1) == 0).any() or (obs.sum(axis=0) == 0).any():
        raise StatsError("chi-square test undefined with a zero marginal")
    exp = ct.expected()
    dev = np.abs(obs - exp)
    detail = "Pearson"
    if (r, c) == (2, 2):
        dev = dev - min(0.5, float(dev.min()))
        detail = "Yates corrected"
    stat = float((dev ** 2 / exp).sum())
    df = (r - 1) * (c - 1)
    return TestResult("chi_square", stat, _clip01(tail("chi_square", stat, df)), float(df), detail)


def hypergeometric_2x2(ct) -> tuple[np.ndarray, np.ndarray, int]:
    """Support of the top-left cell under fixed margins, its probabilities, and the observed value."""
    counts = np.asarray(ct.counts if isinstance(ct, ContingencyTable) else ct, dtype=np.int64)
    if counts.shape != (2, 2):
        raise StatsError(f"Fisher exact test needs a 2x2 table, got {counts.shape}")
    (a, b), (c, d) = counts.tolist()
    r1, r2, c1 = a + b, c + d, a + c
    n = r1 + r2
    lo, hi = max(0, c1 - r2), min(r1, c1)
    k = np.arange(lo, hi + 1)
    logp = (
        special.gammaln(r1 + 1) - special.gammaln(k + 1) - special.gammaln(r1 - k + 1)
        + special.gammaln(r2 + 1) - special.gammaln(c1 - k + 1) - special.gammaln(r2 - c1 + k + 1)
        - special.gammaln(n + 1) + special.gammaln(c1 + 1) + special.gammaln(n - c1 + 1)
    )
    return k, np.exp(logp), a


def fisher_exact_2x2(ct) -> TestResult:
    """Two-sided Fisher test: total mass of tables no more probable than the observed one."""
    k, probs, a = hypergeometric_2x2(ct)
    p_obs = probs[a - k[0]]
    p = probs[probs <= p_obs * (1 + FISHER_RELATIVE_SLACK)].sum()
    return TestResult("fisher", float(a), _clip01(p), None, "exact, two-sided by probability mass")


# -- binomial --------------------------------------------------------------------------


def _check_binomial(successes, n):
    if n < 0 or successes < 0 or successes > n:
        raise StatsError(f"need 0 <= successes <= n, got successes={successes}, n={n}")


def binomial_tail_test(successes: int, n: int, p0: float) -> TestResult:
    """One-sided P(X >= successes) for X ~ Binomial(n, p0), summed exactly in log space."""
    _check_binomial(successes, n)
    if not 0.0 <= p0 <= 1.0:
        raise StatsError(f"p0 must be in [0, 1], got {p0}")
    detail = "exact upper tail"
    if successes == 0 or p0 == 1.0:
        return TestResult("binomial", float(successes), 1.0, None, detail)
    if p0 == 0.0:
        return TestResult("binomial", float(successes), 0.0, None, detail)
    k = np.arange(successes, n + 1)
    logpmf = (
        special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
        + k * math.log(p0) + (n - k) * math.log1p(-p0)
    )
    p = math.exp(special.logsumexp(logpmf))
    return TestResult("binomial", float(successes), _clip01(p), None, detail)


def clopper_pearson(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    _check_binomial(successes, n)
    if n == 0:
        raise StatsError("interval undefined for n = 0")
    if not 0 < confidence < 1:
        raise StatsError(f"confidence must be in (0, 1), got {confidence}")
    alpha = 1 - confidence
    lower = 0.0 if successes == 0 else float(special.betaincinv(successes, n - successes + 1, alpha / 2))
    upper = 1.0 if successes == n else float(special.betaincinv(successes + 1, n - successes, 1 - alpha / 2))
    return lower, upper
