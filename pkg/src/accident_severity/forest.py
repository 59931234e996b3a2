"""CART classification trees and a Random Forest with Mean Decrease Gini.

Trees split on ``x <= threshold`` with Gini impurity.  A node's impurity
decrease is the count-weighted quantity::

    delta = n * G(node) - n_left * G(left) - n_right * G(right)

and a feature's Mean Decrease Gini (MDG) is the sum of the deltas of all
splits on that feature across the forest, divided by the number of trees.
Each tree draws from its own random substream ``(random_state, tree_index)``
so a fitted forest does not depend on how trees were scheduled on workers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .encoding import FeatureEncoder
from .partition import make_rng
from .table import ColumnTable, TableError

logger = logging.getLogger(__name__)

FORMAT_TAG = "accident-severity-forest"
FORMAT_VERSION = 1

# relative tolerance under which two impurity decreases count as tied
_TIE_RTOL = 1e-12


class ModelFormatError(ValueError):
    """Unreadable, truncated or wrong-version model file."""


def gini_impurity(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if (counts < 0).any() or not n > 0:
        raise ValueError("Gini impurity needs non-negative counts with a positive total")
    return float(1.0 - np.sum((counts / n) ** 2))


@dataclass(frozen=True)
class SplitRule:
    feature: int
    kind: str
    threshold: float

    def goes_left(self, value) -> bool:
        return value <= self.threshold


@dataclass
class TreeNode:
    counts: np.ndarray
    impurity: float
    rule: SplitRule | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    impurity_decrease: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    @property
    def in_bag_count(self) -> int:
        return int(self.counts.sum())


def _sum_sq(counts):
    return float(np.dot(counts, counts))


def find_best_split(X, y, rows, features, n_classes, min_leaf=1, kinds=None):
    """Best (feature, threshold, delta) over ``features`` for the node holding ``rows``.

    ``features`` are scanned in ascending order and thresholds ascending, and
    a candidate only replaces the incumbent when it is larger by more than the
    tie tolerance, so ties go to the lower feature index, then the lower
    threshold.  Returns None when no admissible split has a positive delta.
    """
    n = len(rows)
    if n < 2 * min_leaf:
        return None
    yn = y[rows]
    total = np.bincount(yn, minlength=n_classes).astype(float)
    if np.count_nonzero(total) < 2:
        return None
    parent = _sum_sq(total) / n
    tol = _TIE_RTOL * n
    best = None
    best_delta = tol
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    onehot = np.eye(n_classes) if n_classes > 2 else None
    for f in sorted(features):
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        if xs[0] == xs[-1]:
            continue
        if n_classes == 2:
            l1 = np.cumsum(yn[order])[:-1]
            l0 = n_left - l1
            r1 = total[1] - l1
            r0 = n_right - r1
            score = (l0 * l0 + l1 * l1) / n_left + (r0 * r0 + r1 * r1) / n_right
        else:
            left = np.cumsum(onehot[yn[order]], axis=0)[:-1]
            right = total - left
            score = np.einsum("ij,ij->i", left, left) / n_left + np.einsum("ij,ij->i", right, right) / n_right
        ok = size_ok & (xs[1:] > xs[:-1])
        if not ok.any():
            continue
        delta = np.where(ok, score - parent, -np.inf)
        top = delta.max()
        if top > best_delta + (tol if best is not None else 0.0):
            i = int(np.flatnonzero(delta >= top - tol)[0])
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not thr < xs[i + 1]:
                thr = xs[i]
            best = (f, float(thr), float(delta[i]))
            best_delta = float(delta[i])
    return best


def best_split(X, y, features=None, min_leaf: int = 1, kinds=None):
    """Best Gini split of a whole dataset, or None.

    Returns ``(SplitRule, delta)``.  ``y`` may hold arbitrary labels.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    _, codes = np.unique(np.asarray(y), return_inverse=True)
    n_classes = int(codes.max()) + 1 if len(codes) else 1
    features = range(X.shape[1]) if features is None else features
    kinds = kinds or _infer_kinds(X)
    found = find_best_split(X, codes, np.arange(len(X)), features, n_classes, min_leaf)
    if found is None:
        return None
    f, thr, delta = found
    return SplitRule(f, kinds[f], thr), delta


def _infer_kinds(X):
    return ["boolean" if np.isin(X[:, j], (0.0, 1.0)).all() else "numeric" for j in range(X.shape[1])]


@dataclass
class Tree:
    """Flat preorder arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    impurity: np.ndarray
    impurity_decrease: np.ndarray
    kinds: list = field(default_factory=list)

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def leaf_vote(self) -> np.ndarray:
        # argmax takes the first maximum: leaf ties go to the lower class index
        return np.argmax(self.counts, axis=1)

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feature[i] >= 0:
                stack.append((self.left[i], d + 1))
                stack.append((self.right[i], d + 1))
        return best

    def apply(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.intp)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            cur = node[active]
            f = self.feature[cur]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def root(self) -> TreeNode:
        def build(i):
            c = self.counts[i]
            if self.feature[i] < 0:
                return TreeNode(c, float(self.impurity[i]))
            f = int(self.feature[i])
            kind = self.kinds[f] if self.kinds else "numeric"
            return TreeNode(
                c,
                float(self.impurity[i]),
                SplitRule(f, kind, float(self.threshold[i])),
                build(self.left[i]),
                build(self.right[i]),
                float(self.impurity_decrease[i]),
            )

        return build(0)

    def splits(self) -> Iterator[tuple[int, float]]:
        for f, d in zip(self.feature, self.impurity_decrease):
            if f >= 0:
                yield int(f), float(d)


def grow_tree(X, y, n_classes, rng, max_features=None, min_leaf=1, max_depth=None, sample=None, kinds=None) -> Tree:
    """Grow one CART tree on the rows ``sample`` (all rows by default; repeats allowed)."""
    p = X.shape[1]
    mtry = p if max_features is None else max_features
    rows0 = np.arange(len(X)) if sample is None else np.asarray(sample)
    feature, threshold, left, right, counts, impurity, decrease = [], [], [], [], [], [], []
    stack = [(rows0, 0, -1)]
    while stack:
        rows, depth, parent = stack.pop()
        nid = len(feature)
        if parent >= 0:
            right[parent] = nid
        c = np.bincount(y[rows], minlength=n_classes)
        n = len(rows)
        counts.append(c)
        impurity.append(1.0 - _sum_sq(c) / (n * n))
        found = None
        if (c > 0).sum() > 1 and (max_depth is None or depth < max_depth) and n >= 2 * min_leaf:
            cand = rng.choice(p, size=mtry, replace=False) if mtry < p else np.arange(p)
            found = find_best_split(X, y, rows, cand, n_classes, min_leaf)
        if found is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            decrease.append(0.0)
            continue
        f, thr, delta = found
        feature.append(f)
        threshold.append(thr)
        left.append(nid + 1)
        right.append(-1)
        decrease.append(delta)
        go_left = X[rows, f] <= thr
        # right is pushed first so the left subtree is emitted next (preorder)
        stack.append((rows[~go_left], depth + 1, nid))
        stack.append((rows[go_left], depth + 1, -1))
    return Tree(
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.asarray(counts, dtype=np.int64).reshape(-1, n_classes),
        np.asarray(impurity, dtype=float),
        np.asarray(decrease, dtype=float),
        list(kinds) if kinds else [],
    )


def _fit_one(X, y, n_classes, seed, index, max_features, min_leaf, max_depth, bootstrap, kinds, want_oob):
    rng = make_rng(seed, index)
    n = len(X)
    sample = rng.integers(0, n, size=n) if bootstrap else None
    tree = grow_tree(X, y, n_classes, rng, max_features, min_leaf, max_depth, sample, kinds)
    oob = None
    if want_oob and bootstrap:
        out = np.ones(n, dtype=bool)
        out[sample] = False
        oob = np.full(n, -1, dtype=np.intp)
        idx = np.flatnonzero(out)
        oob[idx] = tree.leaf_vote[tree.apply(X[idx])]
    return tree, oob


def _resolve_max_features(max_features, p):
    if max_features is None:
        return p
    if max_features == "sqrt":
        return max(1, int(math.floor(math.sqrt(p))))
    if isinstance(max_features, float):
        return max(1, min(p, int(max_features * p)))
    m = int(max_features)
    if not 1 <= m <= p:
        raise ValueError(f"max_features must be in [1, {p}], got {m}")
    return m


class RandomForest(ClassifierMixin, BaseEstimator):
    """Random Forest classifier with Mean Decrease Gini importances.

    Parameters
    ----------
    n_estimators : int, default=500
    max_features : {"sqrt"}, int, float or None, default="sqrt"
        Candidate features drawn per node (``None`` means all).
    min_samples_leaf : int, default=1
    max_depth : int or None, default=None
    bootstrap : bool, default=True
    oob_score : bool, default=False
        Also compute out-of-bag accuracy (``oob_score_``).
    random_state : int, default=0
    n_jobs : int or None, default=None
        Worker processes for growing trees; does not change the result.
    pos_label : optional
        Label whose vote fraction :meth:`predict_proba_positive` reports;
        defaults to the last class in sorted order.

    Attributes
    ----------
    estimators_ : list of Tree
    classes_ : ndarray
    mean_decrease_gini_ : ndarray of shape (n_features,)
    feature_importances_ : ndarray, MDG normalised to sum to one
    """

    def __init__(self, n_estimators=500, max_features="sqrt", min_samples_leaf=1, max_depth=None,
                 bootstrap=True, oob_score=False, random_state=0, n_jobs=None, pos_label=None):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.oob_score = oob_score
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.pos_label = pos_label

    def fit(self, X, y, feature_names=None, feature_kinds=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        if X.shape[1] == 0:
            raise ValueError("cannot fit a forest with zero features")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")
        self.classes_, codes = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError(f"target must be binary, found {len(self.classes_)} classes")
        if self.pos_label is not None and self.pos_label not in self.classes_.tolist():
            raise ValueError(f"pos_label {self.pos_label!r} not among classes {self.classes_.tolist()}")
        n, p = X.shape
        self.n_features_in_ = p
        self.feature_names_ = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
        self.feature_kinds_ = list(feature_kinds) if feature_kinds is not None else _infer_kinds(X)
        mtry = _resolve_max_features(self.max_features, p)
        seed = int(self.random_state)
        args = (X, codes, len(self.classes_))
        kw = (mtry, self.min_samples_leaf, self.max_depth, self.bootstrap, self.feature_kinds_, self.oob_score)
        if self.n_jobs in (None, 1):
            results = [_fit_one(*args, seed, i, *kw) for i in range(self.n_estimators)]
        else:
            results = Parallel(n_jobs=self.n_jobs)(
                delayed(_fit_one)(*args, seed, i, *kw) for i in range(self.n_estimators)
            )
        self.estimators_ = [r[0] for r in results]
        self._set_importances()
        if self.oob_score and self.bootstrap:
            votes = np.zeros((n, len(self.classes_)))
            for _, oob in results:
                hit = oob >= 0
                votes[np.flatnonzero(hit), oob[hit]] += 1
            seen = votes.sum(axis=1) > 0
            self.oob_decision_function_ = np.divide(
                votes, votes.sum(axis=1, keepdims=True), out=np.full_like(votes, np.nan), where=seen[:, None]
            )
            pred = np.argmax(votes, axis=1)
            self.oob_score_ = float(np.mean(pred[seen] == codes[seen])) if seen.any() else float("nan")
        return self

    def _set_importances(self):
        total = np.zeros(self.n_features_in_)
        for tree in self.estimators_:
            internal = tree.feature >= 0
            np.add.at(total, tree.feature[internal], tree.impurity_decrease[internal])
        self.mean_decrease_gini_ = total / len(self.estimators_)
        s = self.mean_decrease_gini_.sum()
        self.feature_importances_ = self.mean_decrease_gini_ / s if s > 0 else np.zeros_like(total)

    @property
    def positive_label_(self):
        check_is_fitted(self, "classes_")
        return self.classes_[-1] if self.pos_label is None else self.pos_label

    def _check_X(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was fitted with {self.n_features_in_}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        """Fraction of trees voting for each class (columns follow ``classes_``)."""
        X = self._check_X(X)
        votes = np.zeros((len(X), len(self.classes_)))
        rows = np.arange(len(X))
        for tree in self.estimators_:
            votes[rows, tree.leaf_vote[tree.apply(X)]] += 1
        return votes / len(self.estimators_)

    def predict_proba_positive(self, X) -> np.ndarray:
        col = self.classes_.tolist().index(self.positive_label_)
        return self.predict_proba(X)[:, col]

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        """Positive label where the positive vote fraction is at least ``threshold``."""
        score = self.predict_proba_positive(X)
        pos = self.positive_label_
        neg = [c for c in self.classes_.tolist() if c != pos][0]
        return np.where(score >= threshold, pos, neg).astype(self.classes_.dtype)

    def importance(self) -> list[tuple[str, float]]:
        """(feature, MDG) pairs, descending; ties keep feature order."""
        check_is_fitted(self, "mean_decrease_gini_")
        order = sorted(range(self.n_features_in_), key=lambda j: (-self.mean_decrease_gini_[j], j))
        return [(self.feature_names_[j], float(self.mean_decrease_gini_[j])) for j in order]


class DecisionTree(RandomForest):
    """A single fully-grown CART tree on all rows, all features considered at every node."""

    n_estimators = 1
    bootstrap = False
    oob_score = False
    n_jobs = None

    def __init__(self, max_features=None, min_samples_leaf=1, max_depth=None, random_state=0, pos_label=None):
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.random_state = random_state
        self.pos_label = pos_label

    @property
    def tree_(self) -> Tree:
        check_is_fitted(self, "estimators_")
        return self.estimators_[0]


# -- table-level API ------------------------------------------------------------------


@dataclass
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None  # None: floor(sqrt(p))
    min_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0
    exact: bool = False  # no bootstrap, every feature at every node
    n_jobs: int | None = None
    oob: bool = False

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be at least 1")

    def estimator(self, pos_label=None) -> RandomForest:
        return RandomForest(
            n_estimators=self.n_trees,
            max_features=None if self.exact else ("sqrt" if self.mtry is None else self.mtry),
            min_samples_leaf=self.min_leaf,
            max_depth=self.max_depth,
            bootstrap=not self.exact,
            oob_score=self.oob,
            random_state=self.seed,
            n_jobs=self.n_jobs,
            pos_label=pos_label,
        )


@dataclass
class ForestModel:
    """A fitted forest together with the encoder that maps tables to its features."""

    forest: RandomForest
    encoder: FeatureEncoder
    target: str

    @property
    def classes(self) -> list:
        return self.forest.classes_.tolist()

    @property
    def positive_label(self):
        return self.forest.positive_label_

    @property
    def trees(self) -> list[Tree]:
        return self.forest.estimators_

    def design(self, t: ColumnTable) -> np.ndarray:
        return self.encoder.transform(t)


def _labels(t, target):
    if target not in t:
        raise TableError(f"unknown column {target!r}")
    if t.missing(target).any():
        raise TableError(f"target {target!r} has missing cells")
    return t.values(target)


def train_forest(t: ColumnTable, target: str, config: ForestConfig | None = None, features=None,
                 pos_label=None, estimator: RandomForest | None = None) -> ForestModel:
    """Fit a forest on ``features`` (default: every non-target column) of ``t``."""
    config = config or ForestConfig()
    y = _labels(t, target)
    features = [n for n in t.names if n != target] if features is None else list(features)
    if not features:
        raise ValueError("no feature columns to train on")
    encoder = FeatureEncoder(columns=features).fit(t)
    X = encoder.transform(t)
    est = estimator if estimator is not None else config.estimator(pos_label)
    est.fit(X, y, feature_names=encoder.feature_names_out_, feature_kinds=encoder.feature_kinds_)
    return ForestModel(est, encoder, target)


def predict_proba(model: ForestModel, t: ColumnTable) -> np.ndarray:
    """Positive-class vote fraction per row."""
    return model.forest.predict_proba_positive(model.design(t))


def predict(model: ForestModel, t: ColumnTable, threshold: float = 0.5) -> np.ndarray:
    return model.forest.predict(model.design(t), threshold)


def importance_mdg(model: ForestModel, aggregate: bool = False) -> list[tuple[str, float]]:
    """MDG per encoded column, or summed per source variable with ``aggregate``."""
    per_col = model.forest.importance()
    if not aggregate:
        return per_col
    names = model.forest.feature_names_
    group_of = dict(zip(names, model.encoder.groups_))
    order = []
    sums: dict[str, float] = {}
    for name in names:
        g = group_of[name]
        if g not in sums:
            sums[g] = 0.0
            order.append(g)
    for name, v in per_col:
        sums[group_of[name]] += v
    return sorted(((g, sums[g]) for g in order), key=lambda gv: (-gv[1], order.index(gv[0])))


# -- serialisation --------------------------------------------------------------------

_CONFIG_KEYS = ("n_estimators", "max_features", "min_samples_leaf", "max_depth", "bootstrap", "random_state")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _label_json(v):
    return v.item() if isinstance(v, np.generic) else v


def dumps_model(model: ForestModel) -> str:
    f = model.forest
    check_is_fitted(f, "estimators_")
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        "config " + _dumps({k: getattr(f, k) for k in _CONFIG_KEYS}),
        "target " + _dumps(model.target),
        "classes " + _dumps([_label_json(c) for c in f.classes_]),
        "positive " + _dumps(_label_json(f.positive_label_)),
        "encoder " + _dumps(model.encoder.to_dict()),
        f"features {f.n_features_in_}",
    ]
    for name, kind, mdg in zip(f.feature_names_, f.feature_kinds_, f.mean_decrease_gini_):
        lines.append("feature " + _dumps([name, kind, float(mdg)]))
    lines.append(f"trees {len(f.estimators_)}")
    for i, tree in enumerate(f.estimators_):
        lines.append(f"tree {i} {tree.node_count}")
        for j in range(tree.node_count):
            c = " ".join(str(int(v)) for v in tree.counts[j])
            if tree.feature[j] >= 0:
                lines.append(
                    f"S {int(tree.feature[j])} {float(tree.threshold[j])!r} {float(tree.impurity[j])!r} "
                    f"{float(tree.impurity_decrease[j])!r} {c}"
                )
            else:
                lines.append(f"L {float(tree.impurity[j])!r} {c}")
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + f"end {digest}\n"


def save_model(model: ForestModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def _parse_tree(lines, pos, n_nodes, n_classes, kinds):
    feature, threshold, left, right, counts, impurity, decrease = [], [], [], [], [], [], []
    pending = []  # parents awaiting a right child
    for k in range(n_nodes):
        parts = lines[pos + k].split()
        nid = len(feature)
        if k > 0 and feature[-1] < 0:
            # the node after a leaf is the right child of the nearest open parent
            if not pending:
                raise ModelFormatError("tree has records beyond its last leaf")
            right[pending.pop()] = nid
        if parts[0] == "S":
            feature.append(int(parts[1]))
            threshold.append(float(parts[2]))
            impurity.append(float(parts[3]))
            decrease.append(float(parts[4]))
            counts.append([int(v) for v in parts[5:]])
            left.append(nid + 1)
            right.append(-1)
            pending.append(nid)
        elif parts[0] == "L":
            feature.append(-1)
            threshold.append(0.0)
            impurity.append(float(parts[1]))
            decrease.append(0.0)
            counts.append([int(v) for v in parts[2:]])
            left.append(-1)
            right.append(-1)
        else:
            raise ModelFormatError(f"bad node record {lines[pos + k]!r}")
        if len(counts[-1]) != n_classes:
            raise ModelFormatError("node class counts do not match the class list")
    if pending or n_nodes == 0 or feature[-1] >= 0:
        raise ModelFormatError("tree records do not form a complete binary tree")
    return Tree(
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.asarray(counts, dtype=np.int64).reshape(-1, n_classes),
        np.asarray(impurity, dtype=float),
        np.asarray(decrease, dtype=float),
        list(kinds),
    )


def loads_model(text: str) -> ForestModel:
    lines = text.split("\n")
    if not lines or not lines[0].startswith(FORMAT_TAG + " "):
        raise ModelFormatError("not a forest model file")
    version = lines[0].split()[1]
    if version != str(FORMAT_VERSION):
        raise ModelFormatError(f"unsupported model format version {version} (expected {FORMAT_VERSION})")
    if len(lines) < 2 or lines[-1] != "" or not lines[-2].startswith("end "):
        raise ModelFormatError("model file is truncated (no end record)")
    body = "\n".join(lines[:-2]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != lines[-2][4:]:
        raise ModelFormatError("model file is corrupt (checksum mismatch)")
    try:
        return _parse_body(lines[:-2])
    except (IndexError, KeyError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"model file is corrupt: {exc}") from exc


def _field(line, key):
    if not line.startswith(key + " "):
        raise ModelFormatError(f"expected {key!r} record, got {line[:40]!r}")
    return line[len(key) + 1:]


def _parse_body(lines) -> ForestModel:
    config = json.loads(_field(lines[1], "config"))
    target = json.loads(_field(lines[2], "target"))
    classes = json.loads(_field(lines[3], "classes"))
    positive = json.loads(_field(lines[4], "positive"))
    encoder = FeatureEncoder.from_dict(json.loads(_field(lines[5], "encoder")))
    p = int(_field(lines[6], "features"))
    names, kinds, mdg = [], [], []
    for k in range(p):
        name, kind, v = json.loads(_field(lines[7 + k], "feature"))
        names.append(name)
        kinds.append(kind)
        mdg.append(v)
    pos = 7 + p
    n_trees = int(_field(lines[pos], "trees"))
    pos += 1
    trees = []
    for i in range(n_trees):
        head = _field(lines[pos], "tree").split()
        if int(head[0]) != i:
            raise ModelFormatError(f"expected tree {i}, found tree {head[0]}")
        n_nodes = int(head[1])
        trees.append(_parse_tree(lines, pos + 1, n_nodes, len(classes), kinds))
        pos += 1 + n_nodes
    if pos != len(lines):
        raise ModelFormatError("unexpected records after the last tree")
    forest = RandomForest(pos_label=positive, **config)
    forest.classes_ = np.asarray(classes)
    forest.n_features_in_ = p
    forest.feature_names_ = names
    forest.feature_kinds_ = kinds
    forest.estimators_ = trees
    forest._set_importances()
    return ForestModel(forest, encoder, target)


def load_model(path) -> ForestModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    return loads_model(text)
