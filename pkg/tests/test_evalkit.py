import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remitmatch.boost import HyperParams
from remitmatch.evalkit import (
    PRECISION_GRID,
    REPORT_HEADER,
    aggregate,
    assign_folds,
    evaluate,
    kfold_split,
    mean_ci,
    pr_curve,
    recall_at_precision,
)


def _brute_recall(scores, labels, p_target):
    best = None
    for t in set(scores):
        pred = [s >= t for s in scores]
        tp = sum(p and l for p, l in zip(pred, labels))
        if tp / sum(pred) >= p_target:
            r = tp / sum(labels)
            best = r if best is None else max(best, r)
    return best


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.1, 0.2, 0.4, 0.6, 0.8, 0.95]), st.booleans()), min_size=1, max_size=40),
       st.sampled_from([0.5, 0.8, 0.95, 0.99]))
def test_recall_at_precision_matches_threshold_scan(rows, p):
    scores = [s for s, _ in rows]
    labels = [l for _, l in rows]
    if not any(labels):
        with pytest.raises(ValueError):
            pr_curve(scores, labels)
        return
    got = recall_at_precision(pr_curve(scores, labels), p)
    want = _brute_recall(scores, labels, p)
    assert (got is None) == (want is None)
    if want is not None:
        assert got == pytest.approx(want)


def test_pr_curve_points():
    c = pr_curve([0.9, 0.8, 0.8, 0.1], [1, 0, 1, 0])
    assert c.points() == [(0.9, 1.0, 0.5), (0.8, pytest.approx(2 / 3), 1.0), (0.1, 0.5, 1.0)]
    assert recall_at_precision(c, 0.99) == 0.5
    assert recall_at_precision(pr_curve([0.5, 0.9], [1, 0]), 0.99) is None


def test_mean_ci_student_t():
    mean, half = mean_ci([0.8, 0.9, 1.0, None])
    assert mean == pytest.approx(0.9)
    # t_{0.975, 2} = 4.302653; sd = 0.1
    assert half == pytest.approx(4.302653 * 0.1 / math.sqrt(3), rel=1e-5)
    assert mean_ci([0.5]) is None


def test_aggregate_na_rule():
    assert aggregate([None, None, None, 0.5, 0.6]).mean is None
    c = aggregate([None, None, 0.4, 0.5, 0.6])
    assert c.mean == pytest.approx(0.5) and c.na_count == 2
    assert aggregate([0.7, 0.7]).ci == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from("ABC"), min_size=5, max_size=80), st.integers(2, 5), st.integers(0, 99))
def test_assign_folds_balanced_and_stratified(strata, k, seed):
    if len(strata) < k:
        return
    keys = [f"T{i:03d}" for i in range(len(strata))]
    folds = assign_folds(keys, strata, k, seed)
    sizes = np.bincount(folds, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    for s in set(strata):
        per = np.bincount(folds[np.array(strata) == s], minlength=k)
        assert per.max() - per.min() <= 1
    assert np.array_equal(folds, assign_folds(keys, strata, k, seed))
    # independent of input order
    perm = np.random.default_rng(seed).permutation(len(keys))
    again = assign_folds([keys[i] for i in perm], [strata[i] for i in perm], k, seed)
    assert np.array_equal(again, folds[perm])


def test_assign_folds_rejects_bad_k():
    with pytest.raises(ValueError):
        assign_folds(["a", "b"], ["x", "x"], 3, 0)
    with pytest.raises(ValueError):
        assign_folds(["a", "b"], ["x", "x"], 1, 0)


def test_kfold_split_partitions_transfers(small_generated):
    d, _ = small_generated
    splits = kfold_split(d, k=5, seed=3)
    all_ids = {t.transfer_id for t in d.transfers}
    seen = set()
    for train, test in splits:
        tr = {t.transfer_id for t in train.transfers}
        te = {t.transfer_id for t in test.transfers}
        assert not tr & te and tr | te == all_ids
        assert all(t in te for t, _ in test.gold)
        seen |= te
    assert seen == all_ids


def test_evaluate_oracle_and_baseline(small_pairs):
    report = evaluate(["oracle", "baseline", "baseline+post"], pairs=small_pairs, k=3, seed=0,
                      hyperparams={"baseline": (HyperParams(n_rounds=10, max_depth=2),)})
    assert report.recall("oracle") == 1.0
    for m in ("baseline", "baseline+post"):
        r = report.recall(m, "all", 0.95)
        assert r is not None and 0.5 < r <= 1.0
    lines = report.table_csv().splitlines()
    assert lines[0].split(",") == list(REPORT_HEADER) and len(lines) == 4
    curve = report.curve_csv("baseline", "noid").splitlines()
    assert len(curve) == 1 + len(PRECISION_GRID)
    assert report.hyperparams["baseline+post"] == [HyperParams(n_rounds=10, max_depth=2).as_dict()]
    detail = report.detail_csv().splitlines()
    assert len(detail) == 1 + 3 * 6


def test_evaluate_is_deterministic(small_pairs):
    hp = {"baseline": (HyperParams(n_rounds=5, max_depth=2),)}
    a = evaluate("baseline", pairs=small_pairs, k=3, seed=1, hyperparams=hp)
    b = evaluate("baseline", pairs=small_pairs, k=3, seed=1, hyperparams=hp)
    assert a.table_csv() == b.table_csv()


def test_evaluate_needs_labels(tiny_dataset):
    from remitmatch.core import Dataset
    unlabelled = Dataset(tiny_dataset.transfers, tiny_dataset.members)
    with pytest.raises(ValueError):
        evaluate("baseline", unlabelled, k=2)


def test_mean_ci_two_values():
    mean, half = mean_ci([0.7, 0.9])
    assert mean == pytest.approx(0.8)
    assert half == pytest.approx(12.7062 * 0.141421 / 1.414214, rel=1e-4)
    assert mean_ci([0.8] * 5) == (pytest.approx(0.8), 0.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.booleans()), min_size=1, max_size=30))
def test_recall_at_precision_monotone_in_target(rows):
    labels = [l for _, l in rows]
    if not any(labels):
        return
    curve = pr_curve([s for s, _ in rows], labels)
    values = [recall_at_precision(curve, p) for p in (0.5, 0.7, 0.9, 0.95, 0.99, 1.0)]
    seen_na = False
    for a, b in zip(values, values[1:]):
        if a is None:
            seen_na = True
        if seen_na:
            assert b is None
        elif b is not None:
            assert b <= a


def test_subgroup_counts_partition_each_fold(small_pairs):
    report = evaluate("oracle", pairs=small_pairs, k=4, seed=2)
    for counts in report["oracle"].pair_counts:
        assert counts["withid"] + counts["noid"] == counts["all"]
    assert sum(c["all"] for c in report["oracle"].pair_counts) == len(small_pairs)
