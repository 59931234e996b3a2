import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from accident_severity.partition import (
    PartitionError, RebalanceConfig, class_targets, kfold_indices, make_rng, rebalance,
    rebalance_indices, split_indices, train_test_split,
)
from accident_severity.table import ColumnSpec, ColumnTable


def labelled(n_major, n_minor):
    y = np.array(["maj"] * n_major + ["min"] * n_minor, dtype=object)
    return ColumnTable([ColumnSpec("id", "numeric"), ColumnSpec("y", "categorical")],
                       {"id": np.arange(len(y), dtype=float), "y": y})


class TestSplit:
    def test_nine_rows(self):
        t = labelled(6, 3)
        s = train_test_split(t, 2 / 3, seed=1)
        assert (s.train.row_count, s.test.row_count) == (6, 3)
        assert not set(s.train.values("id")) & set(s.test.values("id"))

    def test_deterministic(self):
        t = labelled(50, 20)
        a, b = train_test_split(t, seed=4), train_test_split(t, seed=4)
        assert a.train.equals(b.train) and a.test.equals(b.test)
        assert not train_test_split(t, seed=5).train.equals(a.train)

    def test_stratified(self):
        t = labelled(900, 100)
        s = train_test_split(t, 2 / 3, seed=0, stratify="y")
        counts = Counter(s.train.values("y").tolist())
        assert abs(counts["maj"] - 600) <= 1
        assert abs(counts["min"] - 67) <= 1

    def test_order_preserved(self):
        s = train_test_split(labelled(30, 10), seed=2)
        assert list(s.train.values("id")) == sorted(s.train.values("id"))

    @pytest.mark.parametrize("n,ratio", [(2, 0.5), (10, 0.0), (10, 1.0)])
    def test_bad_arguments(self, n, ratio):
        with pytest.raises(PartitionError):
            split_indices(n, ratio, 0)

    def test_unknown_stratify(self):
        with pytest.raises(Exception):
            train_test_split(labelled(5, 5), stratify="nope")

    @settings(max_examples=60, deadline=None)
    @given(st.integers(3, 400), st.floats(0.05, 0.95), st.integers(0, 10**6))
    def test_partition_properties(self, n, ratio, seed):
        tr, te = split_indices(n, ratio, seed)
        assert sorted(np.r_[tr, te].tolist()) == list(range(n))
        assert abs(len(tr) - ratio * n) <= 1


class TestRebalance:
    def test_undersample(self):
        t = labelled(90, 10)
        out = rebalance(t, "y", RebalanceConfig("undersample", 1.0, 0))
        assert Counter(out.values("y").tolist()) == {"maj": 10, "min": 10}
        minority_ids = out.values("id")[out.values("y") == "min"]
        assert sorted(minority_ids) == list(range(90, 100))

    def test_oversample(self):
        t = labelled(90, 10)
        out = rebalance(t, "y", RebalanceConfig("oversample", 1.0, 0))
        assert Counter(out.values("y").tolist()) == {"maj": 90, "min": 90}
        ids = out.values("id")[out.values("y") == "min"]
        assert set(ids) == set(range(90, 100))

    def test_both(self):
        out = rebalance(labelled(90, 10), "y", RebalanceConfig("both", 1.0, 0))
        assert Counter(out.values("y").tolist()) == {"maj": 30, "min": 30}
        assert class_targets(90, 10, RebalanceConfig("both", 1.0)) == (30, 30)

    def test_single_class(self):
        with pytest.raises(PartitionError):
            rebalance(labelled(5, 0), "y")

    def test_bad_mode(self):
        with pytest.raises(PartitionError):
            RebalanceConfig("smote")

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 200), st.integers(1, 60), st.sampled_from(["undersample", "oversample", "both"]),
           st.floats(0.2, 1.0), st.integers(0, 1000))
    def test_ratio_within_one_row(self, n_major, n_minor, mode, ratio, seed):
        if n_minor > n_major:
            n_major, n_minor = n_minor, n_major
        # undersampling cannot grow the majority, oversampling cannot shrink the minority
        if mode == "undersample":
            assume(n_minor / ratio <= n_major)
        if mode == "oversample":
            assume(ratio * n_major >= n_minor)
        y = np.array(["maj"] * n_major + ["min"] * n_minor)
        idx = rebalance_indices(y, RebalanceConfig(mode, ratio, seed))
        c = Counter(y[idx].tolist())
        big, small = c["maj"], c["min"]
        assert abs(small - ratio * big) <= 1 + ratio
        if mode == "undersample":
            assert len(set(idx.tolist())) == len(idx)

    def test_oversample_coverage(self):
        # with 100 draws from 10 rows, missing any single row has probability 0.9**100
        y = np.array(["a"] * 100 + ["b"] * 10)
        for seed in range(100):
            idx = rebalance_indices(y, RebalanceConfig("oversample", 1.0, seed))
            assert set(idx[y[idx] == "b"].tolist()) == set(range(100, 110))


class TestKFold:
    def test_cover_and_stratify(self):
        y = np.array(["a"] * 80 + ["b"] * 20)
        folds = kfold_indices(y, 5, seed=3)
        seen = np.concatenate([te for _, te in folds])
        assert sorted(seen.tolist()) == list(range(100))
        for tr, te in folds:
            assert not set(tr) & set(te)
            assert Counter(y[te].tolist())["b"] == 4


def test_rng_streams_independent_of_order():
    a = make_rng(7, 3).random(4)
    make_rng(7, 1).random(100)
    assert np.array_equal(a, make_rng(7, 3).random(4))
    assert not np.array_equal(a, make_rng(7, 4).random(4))
