"""Seeded train/test partitioning and class rebalancing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .table import ColumnTable, TableError

REBALANCE_MODES = ("oversample", "undersample", "both")


class PartitionError(ValueError):
    pass


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for the substream ``stream`` of ``seed``.

    Substreams are independent of one another, so work split across workers
    draws the same numbers regardless of scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class SplitResult:
    train: ColumnTable
    test: ColumnTable
    seed: int
    ratio: float
    train_index: np.ndarray
    test_index: np.ndarray


def split_indices(n: int, ratio: float, seed: int, labels=None) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < ratio < 1:
        raise PartitionError(f"ratio must be in (0, 1), got {ratio}")
    if n < 3:
        raise PartitionError(f"need at least 3 rows to split, got {n}")
    if labels is None:
        perm = make_rng(seed).permutation(n)
        k = _round_half_up(ratio * n)
        return np.sort(perm[:k]), np.sort(perm[k:])
    labels = np.asarray(labels)
    train, test = [], []
    for ci, level in enumerate(sorted(set(labels.tolist()), key=str)):
        members = np.flatnonzero(labels == level)
        perm = make_rng(seed, ci).permutation(members)
        k = _round_half_up(ratio * len(members))
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def train_test_split(t: ColumnTable, ratio: float = 2 / 3, seed: int = 0, stratify: str | None = None) -> SplitResult:
    """Shuffle rows with a seeded generator and cut at ``round(ratio * N)``.

    With ``stratify`` the cut is made within each class.  Both partitions keep
    the input's row order.
    """
    labels = None
    if stratify is not None:
        if stratify not in t:
            raise TableError(f"unknown stratify column {stratify!r}")
        labels = t.values(stratify)
    tr, te = split_indices(t.row_count, ratio, seed, labels)
    return SplitResult(t.take(tr), t.take(te), seed, ratio, tr, te)


def kfold_indices(labels, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold partition: list of (train_index, test_index)."""
    labels = np.asarray(labels)
    if k < 2:
        raise PartitionError(f"need at least 2 folds, got {k}")
    fold_of = np.empty(len(labels), dtype=np.intp)
    for ci, level in enumerate(sorted(set(labels.tolist()), key=str)):
        members = make_rng(seed, ci).permutation(np.flatnonzero(labels == level))
        fold_of[members] = np.arange(len(members)) % k
    folds = []
    for f in range(k):
        folds.append((np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)))
    return folds


@dataclass
class RebalanceConfig:
    mode: str = "undersample"
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in REBALANCE_MODES:
            raise PartitionError(f"mode must be one of {REBALANCE_MODES}, got {self.mode!r}")
        if not self.target_ratio > 0:
            raise PartitionError(f"target_ratio must be positive, got {self.target_ratio}")


def _resample(rng, members, size):
    """``size`` rows from ``members``: a subset when shrinking, all originals plus draws when growing."""
    if size <= len(members):
        return rng.choice(members, size=size, replace=False)
    extra = rng.choice(members, size=size - len(members), replace=True)
    return np.concatenate([members, extra])


def class_targets(n_major: int, n_minor: int, cfg: RebalanceConfig) -> tuple[int, int]:
    r = cfg.target_ratio
    if cfg.mode == "undersample":
        return min(n_major, _round_half_up(n_minor / r)), n_minor
    if cfg.mode == "oversample":
        return n_major, max(n_minor, _round_half_up(r * n_major))
    major = _round_half_up(math.sqrt(n_major * n_minor / r))
    return major, _round_half_up(r * major)


def rebalance_indices(labels, cfg: RebalanceConfig) -> np.ndarray:
    labels = np.asarray(labels)
    levels = sorted(set(labels.tolist()), key=str)
    if len(levels) != 2:
        raise PartitionError(f"rebalancing needs exactly two classes, found {len(levels)}")
    members = [np.flatnonzero(labels == lv) for lv in levels]
    # ties: the second level is treated as the minority
    major, minor = (0, 1) if len(members[0]) >= len(members[1]) else (1, 0)
    n_major, n_minor = class_targets(len(members[major]), len(members[minor]), cfg)
    rng = make_rng(cfg.seed)
    picked = [
        _resample(rng, members[major], n_major),
        _resample(rng, members[minor], n_minor),
    ]
    return np.sort(np.concatenate(picked))


def rebalance(t: ColumnTable, target: str, cfg: RebalanceConfig | None = None) -> ColumnTable:
    cfg = cfg or RebalanceConfig()
    if target not in t:
        raise TableError(f"unknown column {target!r}")
    return t.take(rebalance_indices(t.values(target), cfg))
