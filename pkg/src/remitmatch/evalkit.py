"""Precision-recall evaluation, cross-validation folds and confidence intervals."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import Dataset

TARGET_PRECISIONS = (0.95, 0.99)
SUBGROUPS = ("all", "withid", "noid")
PRECISION_GRID = tuple(round(0.95 + 0.005 * i, 3) for i in range(11))
REPORT_HEADER = ("method", "all_95", "all_99", "withid_95", "withid_99", "noid_95", "noid_99")
CURVE_HEADER = ("precision", "recall_mean", "recall_ci_halfwidth")
CURVE_METADATA = "mean curve: recall at matched precision grid points, averaged over folds"


@dataclass(frozen=True)
class PRCurve:
    """Points ordered by strictly decreasing threshold."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def __len__(self) -> int:
        return len(self.thresholds)

    def points(self) -> list[tuple[float, float, float]]:
        return [(float(t), float(p), float(r)) for t, p, r in zip(self.thresholds, self.precision, self.recall)]


def pr_curve(scores, labels) -> PRCurve:
    """One point per distinct score; a pair is predicted a match iff ``score >= threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("no positive labels: recall undefined")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(labels[order])
    # last index of every run of tied scores
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = tp[last].astype(np.float64)
    predicted = (last + 1).astype(np.float64)
    return PRCurve(s[last], tp / predicted, tp / n_pos)


def recall_at_precision(curve: PRCurve, p_target: float) -> Optional[float]:
    """Highest recall among points with precision >= ``p_target``; ``None`` (NA) if none qualify."""
    ok = curve.precision >= p_target
    if not ok.any():
        return None
    return float(curve.recall[ok].max())


def mean_ci(values: Iterable[Optional[float]], confidence: float = 0.95) -> Optional[tuple[float, float]]:
    """Mean and Student-t half-width over the non-NA values; ``None`` with fewer than two."""
    v = np.array([x for x in values if x is not None], dtype=np.float64)
    if len(v) < 2:
        return None
    t = stats.t.ppf(0.5 + confidence / 2, len(v) - 1)
    return float(v.mean()), float(t * v.std(ddof=1) / math.sqrt(len(v)))


def assign_folds(keys: Sequence[str], strata: Sequence[str], k: int, seed: int) -> np.ndarray:
    """Fold index per key: shuffled within each stratum, then dealt round-robin.

    The dealing continues across strata so fold sizes differ by at most one.
    """
    keys = np.asarray(keys, dtype=str)
    strata = np.asarray(strata, dtype=str)
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(keys) < k:
        raise ValueError(f"cannot split {len(keys)} transfers into {k} folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(keys), dtype=np.int64)
    base = np.lexsort((keys, strata))
    pos = 0
    for stratum in np.unique(strata):
        idx = base[strata[base] == stratum]
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = (pos + np.arange(len(idx))) % k
        pos += len(idx)
    return folds


def kfold_split(d: Dataset, k: int = 5, seed: int = 0) -> list[tuple[Dataset, Dataset]]:
    """Transfer-level, club-stratified k-fold split into (train, test) datasets."""
    ts = sorted(d.transfers, key=lambda t: t.transfer_id)
    folds = assign_folds([t.transfer_id for t in ts], [t.club_id for t in ts], k, seed)
    out = []
    for f in range(k):
        test_ids = [t.transfer_id for t, fi in zip(ts, folds) if fi == f]
        train_ids = [t.transfer_id for t, fi in zip(ts, folds) if fi != f]
        out.append((d.subset(train_ids), d.subset(test_ids)))
    return out


def group_folds(pairs, k: int, seed: int) -> np.ndarray:
    """Fold index per transfer group of a pair table (same rule as :func:`kfold_split`)."""
    return assign_folds(pairs.group_transfer_ids, pairs.group_club, k, seed)


def safe_recall(scores, labels, p_target: float) -> Optional[float]:
    labels = np.asarray(labels, dtype=bool)
    if not labels.any():
        return None
    return recall_at_precision(pr_curve(scores, labels), p_target)


# --------------------------------------------------------------------------- reports


@dataclass
class Cell:
    mean: Optional[float]
    ci: Optional[float]
    per_fold: list[Optional[float]]

    @property
    def na_count(self) -> int:
        return sum(v is None for v in self.per_fold)


@dataclass
class MethodResult:
    method: str
    cells: dict[tuple[str, float], Cell]
    curves: dict[str, list[tuple[float, Optional[float], Optional[float]]]]
    pair_counts: list[dict[str, int]] = field(default_factory=list)


@dataclass
class EvalReport:
    results: list[MethodResult]
    k: int
    seed: int
    hyperparams: dict[str, dict] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=lambda: {"curve": CURVE_METADATA})

    def __getitem__(self, method: str) -> MethodResult:
        for r in self.results:
            if r.method == method:
                return r
        raise KeyError(method)

    def recall(self, method: str, subgroup: str = "all", precision: float = 0.99) -> Optional[float]:
        return self[method].cells[(subgroup, precision)].mean

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.results:
            row = [r.method]
            for sg in SUBGROUPS:
                for p in TARGET_PRECISIONS:
                    row.append(_fmt(r.cells[(sg, p)].mean))
            w.writerow(row)
        return buf.getvalue()

    def detail_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "subgroup", "precision", "recall_mean", "recall_ci_halfwidth", "na_folds",
                    *[f"fold_{i}" for i in range(self.k)]])
        for r in self.results:
            for sg in SUBGROUPS:
                for p in TARGET_PRECISIONS:
                    c = r.cells[(sg, p)]
                    w.writerow([r.method, sg, p, _fmt(c.mean), _fmt(c.ci), c.na_count, *(_fmt(v) for v in c.per_fold)])
        return buf.getvalue()

    def curve_csv(self, method: str, subgroup: str = "all") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for p, mean, ci in self[method].curves[subgroup]:
            w.writerow([f"{p:.3f}", _fmt(mean), _fmt(ci)])
        return buf.getvalue()


def _fmt(v: Optional[float]) -> str:
    return "NA" if v is None else f"{v:.6f}"


def aggregate(per_fold: list[Optional[float]]) -> Cell:
    """Fold aggregation: NA when a majority of folds are NA or fewer than two remain."""
    na = sum(v is None for v in per_fold)
    if 2 * na > len(per_fold):
        return Cell(None, None, per_fold)
    mc = mean_ci(per_fold)
    if mc is None:
        return Cell(None, None, per_fold)
    return Cell(mc[0], mc[1], per_fold)


def subgroup_masks(pairs) -> dict[str, np.ndarray]:
    has_id = pairs.group_has_id[pairs.group_of]
    return {"all": np.ones(len(pairs), dtype=bool), "withid": has_id, "noid": ~has_id}


def evaluate(methods, dataset=None, k: int = 5, seed: int = 0, *, pairs=None, grid=None,
             tune_folds: int = 3, hyperparams: Optional[dict] = None) -> EvalReport:
    """Cross-validated recall at 95% and 99% precision for one or more methods.

    ``methods`` are names understood by :func:`remitmatch.stack.make_method`
    (``"baseline"``, ``"cascade+post"``, ...) or already-built method objects.
    With a ``grid``, each method is tuned once on the whole data before the
    outer folds run (``+post`` methods on post-processed scores).  Methods
    sharing a base model and hyperparameters are fitted once per fold.
    """
    from . import stack
    from .featgen import build_pairs

    if isinstance(methods, (str, stack.Method)):
        methods = [methods]
    if pairs is None:
        pairs = build_pairs(dataset)
    if pairs.y is None or not pairs.y.any():
        raise ValueError("evaluation needs a labelled dataset")

    specs = [stack.make_method(m) if isinstance(m, str) else m for m in methods]
    # hyperparameters may be given per method name ("cascade+post") or per family ("cascade")
    hyperparams = {key: tuple(hps) for key, hps in (hyperparams or {}).items()}

    def known(s):
        return hyperparams.get(s.name) or hyperparams.get(s.family)

    if grid is not None:
        missing = [s for s in specs if s.family in stack.TUNABLE and not s.hps and not known(s)]
        hyperparams.update(stack.tune(missing, pairs, grid, k=tune_folds, seed=seed))
    specs = [replace(s, hps=known(s)) if known(s) and not s.hps else s for s in specs]

    folds = group_folds(pairs, k, seed)
    masks = subgroup_masks(pairs)
    per_fold: dict[str, dict[tuple[str, float], list]] = {s.name: {} for s in specs}
    grid_rec: dict[str, dict[str, list[list]]] = {s.name: {sg: [] for sg in SUBGROUPS} for s in specs}
    counts: dict[str, list[dict[str, int]]] = {s.name: [] for s in specs}
    for f in range(k):
        train = pairs.take_groups(folds != f)
        test_groups = np.flatnonzero(folds == f)
        test = pairs.take_groups(test_groups)
        test_masks = {sg: m[np.concatenate([np.arange(pairs.offsets[g], pairs.offsets[g + 1]) for g in test_groups])]
                      for sg, m in masks.items()}
        fitted: dict[tuple, object] = {}
        for s in specs:
            key = s.fit_key
            if key not in fitted:
                fitted[key] = s.fit(train, seed=seed)
            scores = s.score(fitted[key], test)
            counts[s.name].append({sg: int(m.sum()) for sg, m in test_masks.items()})
            for sg, m in test_masks.items():
                lab = test.y[m]
                curve = pr_curve(scores[m], lab) if lab.any() else None
                for p in TARGET_PRECISIONS:
                    r = None if curve is None else recall_at_precision(curve, p)
                    per_fold[s.name].setdefault((sg, p), []).append(r)
                grid_rec[s.name][sg].append(
                    [None if curve is None else recall_at_precision(curve, p) for p in PRECISION_GRID])

    results = []
    for s in specs:
        cells = {key: aggregate(v) for key, v in per_fold[s.name].items()}
        curves = {}
        for sg in SUBGROUPS:
            pts = []
            for j, p in enumerate(PRECISION_GRID):
                c = aggregate([fold[j] for fold in grid_rec[s.name][sg]])
                pts.append((p, c.mean, c.ci))
            curves[sg] = pts
        results.append(MethodResult(s.name, cells, curves, counts[s.name]))
    hp_out = {s.name: [hp.as_dict() for hp in s.hps] for s in specs}
    return EvalReport(results, k, seed, hp_out)
