"""Confusion-matrix statistics, ROC curves and AUC estimates for binary classifiers."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import special

from . import stats

NAN = float("nan")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive: object = None

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise EvaluationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _ratio(num, den):
    return num / den if den else NAN


def _binary_labels(*seqs):
    levels = set()
    for s in seqs:
        levels.update(np.asarray(s).tolist())
    if len(levels) > 2:
        raise EvaluationError(f"labels must be binary, found {len(levels)} distinct values")


def confusion(actual: Sequence, predicted: Sequence, positive) -> ConfusionMatrix:
    actual = np.asarray(actual)
    predicted = np.asarray(predicted)
    if actual.shape != predicted.shape:
        raise EvaluationError(f"length mismatch: {len(actual)} actual vs {len(predicted)} predicted")
    _binary_labels(actual, predicted)
    a = actual == positive
    p = predicted == positive
    return ConfusionMatrix(
        tp=int((a & p).sum()), fp=int((~a & p).sum()), fn=int((a & ~p).sum()), tn=int((~a & ~p).sum()),
        positive=positive,
    )


@dataclass
class MetricsReport:
    accuracy: float
    accuracy_ci: tuple[float, float]
    nir: float
    p_acc_gt_nir: float
    sensitivity: float
    specificity: float
    ppv: float
    npv: float
    f1: float
    prevalence: float
    kappa: float
    mcnemar_statistic: float
    mcnemar_p: float
    confusion: ConfusionMatrix | None = None

    _ROWS = (
        ("ACCURACY", "accuracy"),
        ("95%CI", "accuracy_ci"),
        ("SENSITIVITY/RECALL", "sensitivity"),
        ("SPECIFICITY", "specificity"),
        ("POS PRED VALUE/PRECISION", "ppv"),
        ("F1 SCORE", "f1"),
        ("NO INFORMATION RATE", "nir"),
        ("P-VALUE [ACC > NIR]", "p_acc_gt_nir"),
        ("KAPPA", "kappa"),
        ("MCNEMAR'S TEST STATISTIC", "mcnemar_statistic"),
        ("MCNEMAR'S TEST P-VALUE", "mcnemar_p"),
        ("PREVALENCE", "prevalence"),
        ("NEG PRED VALUE", "npv"),
    )

    def to_tsv(self, digits: int = 3) -> str:
        lines = ["STATISTIC\tVALUE"]
        cm = self.confusion
        if cm is not None:
            lines += [f"TP\t{cm.tp}", f"FP\t{cm.fp}", f"FN\t{cm.fn}", f"TN\t{cm.tn}"]
        for label, attr in self._ROWS:
            v = getattr(self, attr)
            if attr == "accuracy_ci":
                text = f"({format_value(v[0], digits)},{format_value(v[1], digits)})"
            elif attr in ("p_acc_gt_nir", "mcnemar_p"):
                text = format_p(v)
            else:
                text = format_value(v, digits)
            lines.append(f"{label}\t{text}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["accuracy_ci"] = list(self.accuracy_ci)
        if self.confusion is not None:
            d["confusion"] = {k: v for k, v in asdict(self.confusion).items() if k != "positive"}
            d["positive"] = _jsonable(self.confusion.positive)
        return {k: _jsonable(v) for k, v in d.items()}


def _jsonable(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def format_value(v, digits=3) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return f"{v:.{digits}f}"


def format_p(p) -> str:
    if p is None or math.isnan(p):
        return "NA"
    if p < 2.2e-16:
        return "<2e-16"
    return f"{p:.3g}"


def metrics(cm: ConfusionMatrix, confidence: float = 0.95) -> MetricsReport:
    """Every statistic of the standard binary confusion-matrix summary.

    Ratios with a zero denominator are NaN, never 0.
    """
    n = cm.total
    if n == 0:
        raise EvaluationError("confusion matrix is empty")
    tp, fp, fn, tn = cm.tp, cm.fp, cm.fn, cm.tn
    correct = tp + tn
    accuracy = correct / n
    prevalence = (tp + fn) / n
    nir = max(prevalence, 1 - prevalence)
    sens = _ratio(tp, tp + fn)
    spec = _ratio(tn, tn + fp)
    ppv = _ratio(tp, tp + fp)
    npv = _ratio(tn, tn + fn)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn)
    p_e = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    kappa = _ratio(accuracy - p_e, 1 - p_e)
    if fp + fn:
        mcn = (abs(fp - fn) - 1) ** 2 / (fp + fn)
        mcn_p = stats.tail("chi_square", mcn, 1)
    else:
        mcn = mcn_p = NAN
    return MetricsReport(
        accuracy=accuracy,
        accuracy_ci=stats.clopper_pearson(correct, n, confidence),
        nir=nir,
        p_acc_gt_nir=stats.binomial_tail_test(correct, n, nir).p_value,
        sensitivity=sens,
        specificity=spec,
        ppv=ppv,
        npv=npv,
        f1=f1,
        prevalence=prevalence,
        kappa=kappa,
        mcnemar_statistic=mcn,
        mcnemar_p=mcn_p,
        confusion=cm,
    )


# -- ROC --------------------------------------------------------------------------------


@dataclass
class RocCurve:
    """Points from threshold +inf down to -inf, with the integer counts behind them."""

    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int

    @property
    def tpr(self) -> np.ndarray:
        return self.tp / self.n_pos

    @property
    def fpr(self) -> np.ndarray:
        return self.fp / self.n_neg

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))

    def auc(self) -> float:
        # trapezoids in integer arithmetic, one division at the end
        tp = [int(v) for v in self.tp]
        fp = [int(v) for v in self.fp]
        twice_area = sum((fp[i] - fp[i - 1]) * (tp[i] + tp[i - 1]) for i in range(1, len(tp)))
        return twice_area / (2 * self.n_pos * self.n_neg)

    def to_tsv(self) -> str:
        lines = ["threshold\tfpr\ttpr"]
        for thr, f, t in self.points():
            lines.append(f"{_fmt_threshold(thr)}\t{f!r}\t{t!r}")
        return "\n".join(lines) + "\n"

    def to_svg(self, title: str = "ROC curve", size: int = 400) -> str:
        return roc_svg(self, title, size)


def _fmt_threshold(t):
    if math.isinf(t):
        return "Inf" if t > 0 else "-Inf"
    return repr(float(t))


def _split_scores(scores, actual, positive):
    scores = np.asarray(scores, dtype=float)
    actual = np.asarray(actual)
    if scores.shape != actual.shape:
        raise EvaluationError("scores and labels differ in length")
    _binary_labels(actual)
    is_pos = actual == positive
    if is_pos.all() or not is_pos.any():
        raise EvaluationError("ROC analysis needs at least one positive and one negative")
    return scores, is_pos


def roc_curve(scores, actual, positive) -> RocCurve:
    """Thresholds at each distinct score; tied scores move both rates together."""
    scores, is_pos = _split_scores(scores, actual, positive)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = is_pos[order].astype(np.int64)
    last = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(pos)[last]
    fp = np.cumsum(1 - pos)[last]
    thresholds = np.r_[np.inf, s[last], -np.inf]
    tp = np.r_[0, tp, tp[-1]]
    fp = np.r_[0, fp, fp[-1]]
    return RocCurve(thresholds, tp, fp, int(is_pos.sum()), int((~is_pos).sum()))


def auc(scores, actual, positive) -> float:
    return roc_curve(scores, actual, positive).auc()


@dataclass
class AucEstimate:
    value: float
    se: float
    ci: tuple[float, float]
    method: str
    folds: int
    confidence: float = 0.95

    def to_tsv(self) -> str:
        return (
            "cvAUC\tse\tci\tconfidence\n"
            f"{self.value:.3f}\t{self.se:.4f}\t{self.ci[0]:.3f},{self.ci[1]:.3f}\t{self.confidence}\n"
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci"] = list(self.ci)
        return d


def cv_auc_from_values(fold_aucs: Sequence[float], confidence: float = 0.95) -> AucEstimate:
    a = [float(v) for v in fold_aucs]
    k = len(a)
    if k < 2:
        raise EvaluationError(f"need at least 2 folds, got {k}")
    # statistics works in exact arithmetic, so identical folds give se == 0
    value = statistics.mean(a)
    se = statistics.stdev(a) / math.sqrt(k)
    z = float(special.ndtri(0.5 + confidence / 2))
    ci = (max(0.0, value - z * se), min(1.0, value + z * se))
    return AucEstimate(value, se, ci, "fold-mean normal approximation", k, confidence)


def cv_auc(folds: Sequence[tuple[Sequence, Sequence]], positive, confidence: float = 0.95) -> AucEstimate:
    """Mean of per-fold AUCs with the standard error across folds."""
    values = []
    for i, (scores, labels) in enumerate(folds):
        try:
            values.append(auc(scores, labels, positive))
        except EvaluationError as exc:
            raise EvaluationError(f"fold {i}: {exc}") from exc
    return cv_auc_from_values(values, confidence)


# -- model comparison ---------------------------------------------------------------------

COMPARED = (("ACCURACY", "accuracy"), ("SENSITIVITY/RECALL", "sensitivity"), ("SPECIFICITY", "specificity"))


@dataclass
class ComparisonRow:
    metric: str
    a: float
    b: float
    delta: float
    note: str = ""


@dataclass
class Comparison:
    name_a: str
    name_b: str
    rows: list[ComparisonRow]

    def winner(self, metric: str) -> str | None:
        for r in self.rows:
            if r.metric == metric and not math.isnan(r.delta):
                if r.delta > 0:
                    return self.name_b
                if r.delta < 0:
                    return self.name_a
                return None
        return None

    def to_tsv(self) -> str:
        lines = [f"\t{self.name_a}\t{self.name_b}\tdelta"]
        for r in self.rows:
            delta = "NA" if math.isnan(r.delta) else f"{r.delta:+.3f}"
            line = f"{r.metric}\t{format_value(r.a)}\t{format_value(r.b)}\t{delta}"
            if r.note:
                line += f"\t{r.note}"
            lines.append(line)
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return _jsonable({"a": self.name_a, "b": self.name_b, "rows": [asdict(r) for r in self.rows]})


def compare_models(report_a: MetricsReport, report_b: MetricsReport,
                   name_a: str = "Decision Tree", name_b: str = "Random Forest") -> Comparison:
    """Side-by-side accuracy, sensitivity and specificity; delta is b minus a."""
    rows = []
    for label, attr in COMPARED:
        a, b = getattr(report_a, attr), getattr(report_b, attr)
        if math.isnan(a) or math.isnan(b):
            rows.append(ComparisonRow(label, a, b, NAN, "not comparable: undefined metric"))
        else:
            rows.append(ComparisonRow(label, a, b, b - a))
    return Comparison(name_a, name_b, rows)


# -- SVG ------------------------------------------------------------------------------------


def roc_svg(curve: RocCurve, title: str = "ROC curve", size: int = 400) -> str:
    pad = 50
    w = size + 2 * pad

    def xy(fx, ty):
        return pad + fx * size, pad + (1 - ty) * size

    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (xy(f, t) for f, t in zip(curve.fpr, curve.tpr)))
    x0, y0 = xy(0, 0)
    x1, y1 = xy(1, 1)
    ticks = []
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, _ = xy(v, 0)
        _, ty = xy(0, v)
        ticks.append(f'<text x="{tx:.1f}" y="{y0 + 18:.1f}" font-size="11" text-anchor="middle">{v:g}</text>')
        ticks.append(f'<text x="{x0 - 8:.1f}" y="{ty + 4:.1f}" font-size="11" text-anchor="end">{v:g}</text>')
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w}" viewBox="0 0 {w} {w}">',
        f'<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="none" stroke="#444"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#999" stroke-dasharray="4 4"/>',
        f'<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="2"/>',
        f'<text x="{w / 2:.1f}" y="{pad / 2:.1f}" font-size="14" text-anchor="middle">'
        f"{_escape(title)} (AUC = {curve.auc():.3f})</text>",
        f'<text x="{w / 2:.1f}" y="{w - 10:.1f}" font-size="12" text-anchor="middle">False positive rate</text>',
        f'<text x="14" y="{w / 2:.1f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {w / 2:.1f})">True positive rate</text>',
        *ticks,
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def _escape(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def report_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
