"""Score post-processing, cascade and chain stacking over a base scorer."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import boost, evalkit
from .boost import HyperParams, ScorerModel, SchemaMismatch, TrainingError
from .featgen import FEATURE_NAMES, PairTable, build_pairs

log = logging.getLogger(__name__)

CHAIN_THRESHOLD = 0.8
CHAIN_MAX_ITERATIONS = 3
INNER_FOLDS = 5
CONTAINER_TAG = "remitmatch-model"
CONTAINER_VERSION = 1


# --------------------------------------------------------------------------- score tables


class ScoreTable(Mapping):
    """transfer_id -> [(member_id, score), ...], stored columnar and grouped by transfer."""

    def __init__(self, transfer_ids, member_ids, scores, offsets):
        self.transfer_ids = np.asarray(transfer_ids, dtype=str)
        self.member_ids = np.asarray(member_ids, dtype=str)
        self.scores = np.asarray(scores, dtype=np.float64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self._index = {str(self.transfer_ids[s]): g for g, s in enumerate(self.offsets[:-1])}

    @classmethod
    def from_pairs(cls, pairs: PairTable, scores) -> "ScoreTable":
        return cls(pairs.transfer_ids, pairs.member_ids, scores, pairs.offsets)

    @classmethod
    def from_dict(cls, table: Mapping) -> "ScoreTable":
        t_ids, m_ids, scores, offsets = [], [], [], [0]
        for tid, row in table.items():
            if isinstance(row, Mapping):
                row = list(row.items())
            for mid, s in row:
                t_ids.append(tid)
                m_ids.append(mid)
                scores.append(s)
            offsets.append(len(t_ids))
        return cls(t_ids, m_ids, scores, offsets)

    def __getitem__(self, transfer_id):
        g = self._index[transfer_id]
        lo, hi = self.offsets[g], self.offsets[g + 1]
        return [(str(m), float(s)) for m, s in zip(self.member_ids[lo:hi], self.scores[lo:hi])]

    def __iter__(self):
        return iter(self._index)

    def __len__(self) -> int:
        return len(self._index)

    def with_scores(self, scores) -> "ScoreTable":
        return ScoreTable(self.transfer_ids, self.member_ids, scores, self.offsets)

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {tid: dict(self[tid]) for tid in self}


def _group_sums(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    sizes = np.diff(offsets)
    sums = np.zeros(len(sizes))
    nz = sizes > 0
    if nz.any():
        sums[nz] = np.add.reduceat(values, offsets[:-1][nz])
    return sums


def normalize_scores(scores, offsets) -> np.ndarray:
    """Divide each group's scores by their sum; all-zero groups are left as they are."""
    scores = np.asarray(scores, dtype=np.float64)
    sums = _group_sums(scores, offsets)
    per_row = np.repeat(sums, np.diff(offsets))
    return np.where(per_row > 0, scores / np.where(per_row > 0, per_row, 1.0), scores)


def postprocess_scores(t) -> ScoreTable:
    """Rescale every transfer's member scores to sum to one.

    Accepts a :class:`ScoreTable` or a plain ``{transfer_id: {member_id: score}}`` mapping.
    """
    if not isinstance(t, ScoreTable):
        t = ScoreTable.from_dict(t)
    return t.with_scores(normalize_scores(t.scores, t.offsets))


# --------------------------------------------------------------------------- cascade


def extended_schema(base: Sequence[str] = FEATURE_NAMES) -> tuple[str, ...]:
    return (*base, "p_max", *(f"dist_{n}" for n in base), "p_i", "rank_i", "gap_i")


@dataclass(frozen=True)
class ExtendedFeatureVector:
    base: tuple
    p_max: float
    dist: tuple
    p_i: float
    rank_i: int
    gap_i: float

    def as_array(self) -> np.ndarray:
        return np.array([*self.base, self.p_max, *self.dist, self.p_i, self.rank_i, self.gap_i], dtype=np.float64)

    def __len__(self) -> int:
        return 2 * len(self.base) + 4


def _group_ranking(scores: np.ndarray, offsets: np.ndarray):
    """Per-row rank within its group (best = 0) and the row order realizing it.

    Descending score; ties go to the earlier row, i.e. the smaller member_id
    since groups are sorted by member_id.
    """
    n = len(scores)
    group = np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))
    order = np.lexsort((np.arange(n), -scores, group))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n) - np.repeat(offsets[:-1], np.diff(offsets))
    return rank, order, group


def extend_features(X, scores, offsets) -> np.ndarray:
    """Cascade-extended vectors for every row of a grouped feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    if len(X) == 0:
        return np.zeros((0, 2 * X.shape[1] + 4))
    rank, order, group = _group_ranking(scores, offsets)
    starts = offsets[:-1][np.diff(offsets) > 0]
    best_row = np.empty(len(offsets) - 1, dtype=np.int64)
    best_row[group[order[starts]]] = order[starts]
    best = best_row[group]
    s_sorted = scores[order]
    prev = np.r_[s_sorted[0], s_sorted[:-1]]
    gap_sorted = np.where(rank[order] == 0, 0.0, prev - s_sorted)
    gap = np.empty(len(X))
    gap[order] = gap_sorted
    dist = (X != X[best]).astype(np.float64)
    return np.hstack([X, scores[best][:, None], dist, scores[:, None], rank[:, None].astype(np.float64), gap[:, None]])


def cascade_extend(members) -> list[ExtendedFeatureVector]:
    """Extended vectors for one transfer's candidates, returned in input order.

    ``members`` is a sequence of ``(member_id, score, features)``.
    """
    members = list(members)
    if not members:
        raise ValueError("cascade_extend needs at least one member")
    order = sorted(range(len(members)), key=lambda i: members[i][0])
    X = np.array([tuple(members[i][2]) for i in order], dtype=np.float64)
    s = np.array([members[i][1] for i in order], dtype=np.float64)
    ext = extend_features(X, s, np.array([0, len(order)]))
    nf = X.shape[1]
    out: list[Optional[ExtendedFeatureVector]] = [None] * len(members)
    for row, i in zip(ext, order):
        out[i] = ExtendedFeatureVector(
            tuple(members[i][2]), float(row[nf]), tuple(int(v) for v in row[nf + 1: 2 * nf + 1]),
            float(row[2 * nf + 1]), int(row[2 * nf + 2]), float(row[2 * nf + 3]))
    return out


def out_of_fold_scores(pairs: PairTable, hp: HyperParams, k: int = INNER_FOLDS, seed: int = 0) -> np.ndarray:
    """Score every pair with a model that never saw its transfer."""
    return cross_fit(pairs, hp, k, seed)[0]


def cross_fit(pairs: PairTable, hp: HyperParams, k: int = INNER_FOLDS, seed: int = 0):
    """Out-of-fold scores plus the ``k`` inner models that produced them."""
    folds = evalkit.group_folds(pairs, k, seed)
    per_row = folds[pairs.group_of]
    out = np.empty(len(pairs))
    models = []
    for f in range(k):
        model = boost.train(pairs.take_groups(folds != f), hp)
        rows = per_row == f
        out[rows] = model.predict_proba(pairs.X[rows])
        models.append(model)
    return out, models


@dataclass
class CascadeModel:
    c1: ScorerModel
    c2: ScorerModel

    def __post_init__(self):
        if tuple(self.c2.feature_schema) != extended_schema(self.c1.feature_schema):
            raise SchemaMismatch("c2 schema is not the extension of the c1 schema")

    @property
    def feature_schema(self) -> tuple[str, ...]:
        return self.c1.feature_schema

    def scores(self, pairs: PairTable) -> np.ndarray:
        _check_schema(self.feature_schema, pairs)
        s1 = self.c1.predict_proba(pairs.X)
        return self.c2.predict_proba(extend_features(pairs.X, s1, pairs.offsets))


def cascade_train(pairs: PairTable, hp1: HyperParams = HyperParams(), hp2: HyperParams = HyperParams(),
                  seed: int = 0, inner_folds: int = INNER_FOLDS) -> CascadeModel:
    """C1 on base features; C2 on extended vectors built from out-of-fold C1 scores.

    C1 is the margin average of the inner-fold models that produced the
    out-of-fold scores, so C2 sees scores of the same kind at training and
    prediction time.  (A separate full-data C1 shifts scores slightly, and
    C2's splits on score values do not survive that shift.)
    """
    oof, inner = cross_fit(pairs, hp1, inner_folds, seed)
    c1 = boost.average_models(inner)
    X2 = extend_features(pairs.X, oof, pairs.offsets)
    c2 = boost.fit(X2, pairs.y, hp2, extended_schema(pairs.schema))
    return CascadeModel(c1, c2)


def cascade_predict(m: CascadeModel, d) -> ScoreTable:
    """Final C2 scores for a dataset (or an already built pair table); no thresholding."""
    pairs = d if isinstance(d, PairTable) else build_pairs(d)
    return ScoreTable.from_pairs(pairs, m.scores(pairs))


# --------------------------------------------------------------------------- chain


def chain_schema(base: Sequence[str], iteration: int) -> tuple[str, ...]:
    """Schema of classifier ``iteration`` (0-based): own features plus every earlier best's."""
    out = list(base)
    for k in range(1, iteration + 1):
        out += [f"best{k}_{n}" for n in base] + [f"best{k}_score"]
    return tuple(out)


@dataclass
class ChainModel:
    classifiers: list[ScorerModel]
    thresholds: list[float] = field(default_factory=lambda: [CHAIN_THRESHOLD] * CHAIN_MAX_ITERATIONS)
    prior_only: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if len(self.classifiers) != len(self.thresholds) or len(self.classifiers) > CHAIN_MAX_ITERATIONS:
            raise ValueError("chain needs equally many classifiers and thresholds, at most 3")
        if any(not 0.0 < t < 1.0 for t in self.thresholds):
            raise ValueError("chain thresholds must lie in (0, 1)")
        base = self.classifiers[0].feature_schema
        for n, c in enumerate(self.classifiers):
            if tuple(c.feature_schema) != chain_schema(base, n):
                raise SchemaMismatch(f"classifier {n + 1} schema does not match chain layout")
        if not self.prior_only:
            self.prior_only = [False] * len(self.classifiers)

    @property
    def max_iterations(self) -> int:
        return len(self.classifiers)

    @property
    def feature_schema(self) -> tuple[str, ...]:
        return self.classifiers[0].feature_schema

    def run(self, pairs: PairTable) -> tuple[np.ndarray, np.ndarray]:
        """Chain inference over all transfers at once.

        Returns per-pair scores and an accepted mask.  An accepted member keeps
        the score it was accepted with; every other member keeps the lowest
        score any iteration gave it, so a later stage can only demote a
        candidate it did not accept.
        """
        _check_schema(self.feature_schema, pairs)
        X = pairs.X.astype(np.float64)
        group = pairs.group_of
        n_groups = pairs.n_groups
        scores = np.full(len(pairs), np.inf)
        accepted = np.zeros(len(pairs), dtype=bool)
        alive = np.ones(n_groups, dtype=bool)
        context: list[tuple[np.ndarray, np.ndarray]] = []
        for clf, thr in zip(self.classifiers, self.thresholds):
            rows = np.flatnonzero(~accepted & alive[group])
            if len(rows) == 0:
                break
            g = group[rows]
            parts = [X[rows]]
            for best_row, best_score in context:
                parts += [X[best_row[g]], best_score[g][:, None]]
            s = clf.predict_proba(np.hstack(parts))
            scores[rows] = np.minimum(scores[rows], s)
            order = np.lexsort((rows, -s, g))
            first = np.r_[True, g[order][1:] != g[order][:-1]]
            top = order[first]
            top_groups, top_rows, top_scores = g[top], rows[top], s[top]
            ok = top_scores >= thr
            accepted[top_rows[ok]] = True
            scores[top_rows[ok]] = top_scores[ok]
            alive[:] = False
            alive[top_groups[ok]] = True
            best_row = np.full(n_groups, -1, dtype=np.int64)
            best_score = np.zeros(n_groups)
            best_row[top_groups] = top_rows
            best_score[top_groups] = top_scores
            context.append((best_row, best_score))
        return np.where(np.isinf(scores), 0.0, scores), accepted


def chain_predict(m: ChainModel, members) -> set[str]:
    """Members accepted for one transfer; ``members`` is a sequence of ``(member_id, features)``."""
    members = sorted(members, key=lambda mf: mf[0])
    if not members:
        raise ValueError("chain_predict needs at least one member")
    X = np.array([tuple(f) for _, f in members], dtype=np.float64)
    ids = [mid for mid, _ in members]
    pairs = PairTable(["t"] * len(ids), ids, X.astype(np.uint8) if np.all(X == X.round()) else X,
                      None, [0, len(ids)], [False], [""], m.feature_schema)
    _, accepted = m.run(pairs)
    return {ids[i] for i in np.flatnonzero(accepted)}


def chain_scores(m: ChainModel, d) -> ScoreTable:
    pairs = d if isinstance(d, PairTable) else build_pairs(d)
    return ScoreTable.from_pairs(pairs, m.run(pairs)[0])


def _prior_model(rate: float, schema: Sequence[str]) -> ScorerModel:
    rate = min(max(rate, 1e-6), 1 - 1e-6)
    return ScorerModel([], float(np.log(rate / (1 - rate))), tuple(schema), HyperParams(n_rounds=0))


def chain_training_sets(pairs: PairTable, oof: np.ndarray, iteration: int):
    """Teacher-forced rows for classifier ``iteration`` (1-based, >= 2).

    For every transfer with at least ``iteration`` gold members, the gold
    members ranked highest by ``oof`` play the earlier bests; all other
    members of the transfer become rows labelled by gold.
    Returns ``(rows, best_rows)`` where ``best_rows[:, j]`` is the row of the
    j-th earlier best for each training row.
    """
    rows, bests = [], []
    for gi in range(pairs.n_groups):
        lo, hi = pairs.offsets[gi], pairs.offsets[gi + 1]
        gold = np.flatnonzero(pairs.y[lo:hi]) + lo
        if len(gold) < iteration:
            continue
        ranked = gold[np.lexsort((gold, -oof[gold]))][: iteration - 1]
        rest = np.setdiff1d(np.arange(lo, hi), ranked)
        rows.append(rest)
        bests.append(np.tile(ranked, (len(rest), 1)))
    if not rows:
        return np.zeros(0, dtype=np.int64), np.zeros((0, iteration - 1), dtype=np.int64)
    return np.concatenate(rows), np.vstack(bests)


def chain_train(pairs: PairTable, hps: Sequence[HyperParams] = (HyperParams(),) * 3, seed: int = 0,
                thresholds: Sequence[float] = (CHAIN_THRESHOLD,) * 3, inner_folds: int = INNER_FOLDS) -> ChainModel:
    """Train C1 on base features and C2, C3 by teacher forcing on multi-member transfers."""
    hps = list(hps)
    if len(hps) == 1:
        hps = hps * 3
    n_iter = len(thresholds)
    base_schema = pairs.schema
    c1 = boost.train(pairs, hps[0])
    classifiers = [c1]
    prior_only = [False]
    if n_iter > 1:
        oof = out_of_fold_scores(pairs, hps[0], inner_folds, seed)
    X = pairs.X.astype(np.float64)
    for it in range(2, n_iter + 1):
        schema = chain_schema(base_schema, it - 1)
        rows, bests = chain_training_sets(pairs, oof, it)
        y = pairs.y[rows]
        if len(rows) == 0 or y.all() or not y.any():
            classifiers.append(_prior_model(float(y.mean()) if len(rows) else float(pairs.y.mean()), schema))
            prior_only.append(True)
            continue
        parts = [X[rows]]
        for j in range(it - 1):
            b = bests[:, j]
            # earlier bests carry the score they would have been accepted with
            bscore = classifiers[j].predict_proba(_chain_row(X, b, bests[:, :j], classifiers, j))
            parts += [X[b], bscore[:, None]]
        classifiers.append(boost.fit(np.hstack(parts), y, hps[it - 1], schema))
        prior_only.append(False)
    return ChainModel(classifiers, list(thresholds), prior_only)


def _chain_row(X, rows, earlier, classifiers, j):
    """Input rows of classifier ``j`` for ``rows`` given the earlier bests in ``earlier``."""
    parts = [X[rows]]
    for i in range(j):
        b = earlier[:, i]
        s = classifiers[i].predict_proba(_chain_row(X, b, earlier[:, :i], classifiers, i))
        parts += [X[b], s[:, None]]
    return np.hstack(parts)


# --------------------------------------------------------------------------- methods


FAMILIES = ("baseline", "cascade", "chain", "oracle")
TUNABLE = ("baseline", "cascade", "chain")


@dataclass(frozen=True)
class Method:
    """A scorer family plus the optional score post-processing ("+post")."""

    family: str
    post: bool = False
    hps: tuple = ()
    inner_folds: int = INNER_FOLDS

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown method {self.family!r}; expected one of {', '.join(FAMILIES)}")

    @property
    def name(self) -> str:
        return self.family + ("+post" if self.post else "")

    @property
    def fit_key(self):
        return self.family, self.hps, self.inner_folds

    def _hp(self, i: int) -> HyperParams:
        if not self.hps:
            return HyperParams()
        return self.hps[min(i, len(self.hps) - 1)]

    def fit(self, pairs: PairTable, seed: int = 0):
        if self.family == "baseline":
            return boost.train(pairs, self._hp(0))
        if self.family == "cascade":
            return cascade_train(pairs, self._hp(0), self._hp(1), seed, self.inner_folds)
        if self.family == "chain":
            return chain_train(pairs, [self._hp(0), self._hp(1), self._hp(2)], seed, inner_folds=self.inner_folds)
        return None

    def raw_scores(self, model, pairs: PairTable) -> np.ndarray:
        if self.family == "baseline":
            _check_schema(model.feature_schema, pairs)
            return model.predict_proba(pairs.X)
        if self.family == "cascade":
            return model.scores(pairs)
        if self.family == "chain":
            return model.run(pairs)[0]
        return pairs.y.astype(np.float64)

    def score(self, model, pairs: PairTable) -> np.ndarray:
        s = self.raw_scores(model, pairs)
        return normalize_scores(s, pairs.offsets) if self.post else s


def make_method(name: str, hps=None, inner_folds: int = INNER_FOLDS) -> Method:
    """``"cascade+post"`` -> Method("cascade", post=True, ...)."""
    family, _, suffix = name.partition("+")
    if suffix not in ("", "post"):
        raise ValueError(f"unknown composition {suffix!r} in {name!r}")
    if isinstance(hps, HyperParams):
        hps = (hps,)
    return Method(family, suffix == "post", tuple(hps or ()), inner_folds)


# --------------------------------------------------------------------------- tuning


def _recall99(scores, labels, offsets=None) -> float:
    """Recall at 99% precision (0 when unreachable), optionally after post-processing."""
    if offsets is not None:
        scores = normalize_scores(scores, offsets)
    r = evalkit.safe_recall(scores, labels, 0.99)
    return 0.0 if r is None else r


def tune(methods, pairs: PairTable, grid: Sequence[HyperParams], k: int = 3, seed: int = 0,
         inner_folds: int = INNER_FOLDS) -> dict[str, tuple[HyperParams, ...]]:
    """Grid-search winners per method, keyed by method name.

    ``methods`` are names such as ``"cascade+post"``; each is tuned for the
    composition it names, so a ``+post`` method is judged on post-processed
    scores.  The baseline winner (for the same composition) serves as C1 of
    the cascade and chain; the cascade's C2 and the chain's later classifiers
    are then searched over the same grid.
    """
    specs = [m if isinstance(m, Method) else make_method(m) for m in methods]
    specs = [s for s in dict.fromkeys(specs) if s.family in TUNABLE]
    if not specs:
        return {}
    folds = evalkit.group_folds(pairs, k, seed)
    splits = [(pairs.take_groups(folds != f), pairs.take_groups(folds == f)) for f in range(k)]
    base_best: dict[bool, HyperParams] = {}
    prepared_cache: dict[bool, list] = {}
    out = {}
    for spec in specs:
        post = spec.post
        if post not in base_best:
            base_best[post] = boost.grid_search(pairs, grid, k=k, seed=seed, post=post).best
        hp1 = base_best[post]
        if spec.family == "baseline":
            out[spec.name] = (hp1,)
        elif spec.family == "cascade":
            if post not in prepared_cache:
                prepared_cache[post] = _cascade_folds(splits, hp1, seed, inner_folds)
            prepared = prepared_cache[post]
            schema = extended_schema(pairs.schema)

            def cascade_cell(hp, prepared=prepared, post=post):
                vals = []
                for prep in prepared:
                    if prep is None:
                        raise TrainingError("fold could not be prepared")
                    Xtr, ytr, Xte, yte, offsets = prep
                    s = boost.fit(Xtr, ytr, hp, schema).predict_proba(Xte)
                    vals.append(_recall99(s, yte, offsets if post else None))
                return float(np.mean(vals))

            out[spec.name] = (hp1, boost.select_best(grid, cascade_cell).best)
        else:
            def chain_cell(hp, hp1=hp1, post=post):
                vals = []
                for train, test in splits:
                    model = chain_train(train, [hp1, hp, hp], seed, inner_folds=inner_folds)
                    vals.append(_recall99(model.run(test)[0], test.y, test.offsets if post else None))
                return float(np.mean(vals))

            best = boost.select_best(grid, chain_cell).best
            out[spec.name] = (hp1, best, best)
    return out


def _cascade_folds(splits, hp1: HyperParams, seed: int, inner_folds: int) -> list:
    """Per tuning fold: extended training rows from out-of-fold C1 scores, extended test rows from C1."""
    prepared = []
    for train, test in splits:
        try:
            oof, inner = cross_fit(train, hp1, inner_folds, seed)
            c1 = boost.average_models(inner)
        except TrainingError:
            prepared.append(None)
            continue
        prepared.append((extend_features(train.X, oof, train.offsets), train.y,
                         extend_features(test.X, c1.predict_proba(test.X), test.offsets), test.y, test.offsets))
    return prepared


# --------------------------------------------------------------------------- persistence


def _check_schema(schema: Sequence[str], pairs: PairTable) -> None:
    if tuple(schema) != tuple(pairs.schema):
        from .featgen import schema_digest
        raise SchemaMismatch(
            f"model schema {schema_digest(schema)} does not match data schema {schema_digest(pairs.schema)}")


def model_to_dict(model, family: Optional[str] = None) -> dict:
    """Container document: the boost model files of every stage plus a manifest."""
    from .featgen import schema_digest
    if isinstance(model, ScorerModel):
        family, stages, manifest = "baseline", [model], {}
    elif isinstance(model, CascadeModel):
        family, stages, manifest = "cascade", [model.c1, model.c2], {}
    elif isinstance(model, ChainModel):
        family, stages = "chain", list(model.classifiers)
        manifest = {"thresholds": list(model.thresholds), "prior_only": list(model.prior_only)}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    manifest.update({
        "stage_formats": [f"{boost.FORMAT_TAG}/{boost.FORMAT_VERSION}"] * len(stages),
        "stage_schema_digests": [s.digest for s in stages],
        "schema_digest": schema_digest(stages[0].feature_schema),
    })
    return {"format": CONTAINER_TAG, "version": CONTAINER_VERSION, "kind": family,
            "manifest": manifest, "models": [s.to_dict() for s in stages]}


def model_from_dict(doc: dict):
    if doc.get("format") == boost.FORMAT_TAG:
        return ScorerModel.from_dict(doc)
    if doc.get("format") != CONTAINER_TAG:
        raise ValueError("not a model document")
    if doc.get("version") != CONTAINER_VERSION:
        raise ValueError(f"unsupported model container version {doc.get('version')}")
    stages = [ScorerModel.from_dict(d) for d in doc["models"]]
    kind = doc["kind"]
    if kind == "baseline":
        return stages[0]
    if kind == "cascade":
        return CascadeModel(*stages)
    if kind == "chain":
        man = doc["manifest"]
        return ChainModel(stages, list(man["thresholds"]), list(man.get("prior_only", [])))
    raise ValueError(f"unknown model kind {kind!r}")


def dumps_model(model) -> str:
    return json.dumps(model_to_dict(model), indent=1)


def loads_model(text: str):
    return model_from_dict(json.loads(text))


def model_family(model) -> str:
    if isinstance(model, CascadeModel):
        return "cascade"
    if isinstance(model, ChainModel):
        return "chain"
    return "baseline"


def model_scores(model, pairs: PairTable) -> np.ndarray:
    """Raw final scores of any supported model on a pair table."""
    return Method(model_family(model)).raw_scores(model, pairs)
