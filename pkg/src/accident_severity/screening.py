"""Univariate screening of every variable against a binary target."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import stats
from .table import ColumnTable, TableError

logger = logging.getLogger(__name__)

CONTINUOUS_KINDS = ("numeric",)
DISCRETE_KINDS = ("boolean", "categorical")


class ScreeningError(ValueError):
    pass


@dataclass(frozen=True)
class ScreeningRow:
    variable: str
    test: str
    statistic: float
    p_value: float
    decision: str
    method_detail: str = ""


def choose_test(kind: str, normality_p: float | None = None, expected=None, alpha: float = 0.05) -> str:
    """Pick the screening test for one variable.

    ``normality_p`` is the smallest per-class normality p-value (None when it
    could not be computed); ``expected`` is the expected-count grid of the
    variable-by-target table.
    """
    if kind in CONTINUOUS_KINDS:
        if normality_p is not None and normality_p >= alpha:
            return "welch_t"
        return "wilcoxon"
    if kind in DISCRETE_KINDS:
        expected = np.asarray(expected, dtype=float)
        if expected.min() > 5:
            return "chi_square"
        if expected.shape == (2, 2):
            return "fisher"
        logger.warning("sparse %dx%d table: Fisher is 2x2 only, using chi-square", *expected.shape)
        return "chi_square"
    raise ScreeningError(f"cannot screen a {kind} column")


def _binary_target(t, target):
    if target not in t:
        raise TableError(f"unknown column {target!r}")
    if t.missing(target).any():
        raise ScreeningError(f"target {target!r} has missing cells")
    labels = t.values(target)
    levels = sorted(set(labels.tolist()), key=str)
    if len(levels) != 2:
        raise ScreeningError(f"target {target!r} must have exactly 2 levels, found {len(levels)}")
    return labels, levels


def _group_normality(groups):
    worst = None
    for g in groups:
        try:
            p = stats.normality_check(g).p_value
        except stats.StatsError:
            return None
        worst = p if worst is None else min(worst, p)
    return worst


def screen_variable(values, kind, labels, levels, alpha=0.05) -> tuple[str, stats.TestResult]:
    if len(set(values.tolist())) < 2:
        return "degenerate", stats.TestResult("none", 0.0, 1.0, None, "degenerate")
    if kind in CONTINUOUS_KINDS:
        groups = [values[labels == lv].astype(float) for lv in levels]
        test = choose_test(kind, _group_normality(groups), alpha=alpha)
        if test == "welch_t":
            return test, stats.welch_t_test(groups[1], groups[0])
        return test, stats.wilcoxon_rank_sum(groups[1], groups[0])
    ct = stats.ContingencyTable.from_labels(values.tolist(), labels.tolist())
    test = choose_test(kind, expected=ct.expected(), alpha=alpha)
    if test == "fisher":
        return test, stats.fisher_exact_2x2(ct)
    return test, stats.chi_square_test(ct)


def screen_all(t: ColumnTable, target: str, alpha: float = 0.05, columns=None) -> list[ScreeningRow]:
    """One row per non-target variable, in schema order."""
    labels, levels = _binary_target(t, target)
    names = [n for n in t.names if n != target] if columns is None else list(columns)
    rows = []
    for name in names:
        spec = t.spec(name)
        if t.missing(name).any():
            raise ScreeningError(f"column {name!r} has missing cells; clean before screening")
        test, res = screen_variable(t.values(name), spec.kind, labels, levels, alpha)
        decision = "important" if res.p_value < alpha else "unimportant"
        logger.debug("%s: %s p=%g", name, test, res.p_value)
        rows.append(ScreeningRow(name, test, res.statistic, res.p_value, decision, res.method_detail))
    return rows


def important_variables(rows) -> list[str]:
    return [r.variable for r in rows if r.decision == "important"]


def to_tsv(rows) -> str:
    lines = ["Variable\tTest-Statistic\tP-value\tDecision\tTest"]
    for r in rows:
        lines.append(f"{r.variable}\t{r.statistic:.6g}\t{r.p_value:.3g}\t{r.decision}\t{r.test}")
    return "\n".join(lines) + "\n"


def to_json(rows) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2, sort_keys=True) + "\n"
