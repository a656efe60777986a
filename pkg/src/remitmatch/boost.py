"""Second-order gradient-boosted trees for binary classification.

Logistic loss, exact greedy split search, L2-regularized Newton leaf
weights.  Rows with identical feature vectors receive identical predictions
in every round, so training runs on the distinct rows weighted by their
positive and negative counts; gradient and hessian sums are unchanged by
that compression.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .featgen import FEATURE_NAMES, schema_digest

log = logging.getLogger(__name__)

FORMAT_TAG = "remitmatch-gbdt"
FORMAT_VERSION = 1
MIN_SPLIT_GAIN = 1e-6
SWEEP_MIN_BINS = 64
_PROB_EPS = 1e-15


class TrainingError(ValueError):
    """Training data cannot produce a model (empty or single-class)."""


class SchemaMismatch(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    n_rounds: int = 100
    max_depth: int = 3
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        d = dict(d)
        if "lambda" in d:
            d["reg_lambda"] = d.pop("lambda")
        return cls(**d)


def default_grid() -> list[HyperParams]:
    return [
        HyperParams(n_rounds=r, max_depth=dp, learning_rate=lr, reg_lambda=1.0, min_child_weight=1.0)
        for r, dp, lr in itertools.product((50, 100, 200), (2, 3, 4), (0.1, 0.3))
    ]


@dataclass(frozen=True)
class TreeNode:
    """A split (``feature >= 0``) or a leaf carrying an additive weight.

    Rows with ``x[feature] < threshold`` go left.
    """

    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.weight}
        return {"split": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "leaf" in d:
            return cls(weight=float(d["leaf"]))
        return cls(int(d["split"]), float(d["threshold"]), cls.from_dict(d["left"]), cls.from_dict(d["right"]))


@dataclass
class ScorerModel:
    trees: list[TreeNode]
    base_score: float
    feature_schema: tuple[str, ...]
    hyperparams: HyperParams
    loss_history: list[float] = field(default_factory=list, compare=False)
    _flat: Optional[list] = field(default=None, init=False, repr=False, compare=False)

    @property
    def digest(self) -> str:
        return schema_digest(self.feature_schema)

    def _compiled(self):
        if self._flat is None:
            self._flat = [_flatten(t) for t in self.trees]
        return self._flat

    def margin(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_schema):
            raise SchemaMismatch(
                f"feature vector length {X.shape[-1]} does not match schema of length {len(self.feature_schema)}")
        packed = _binary_keys(X)
        if packed is not None and len(X) > 64:
            U, inverse = _unique_rows(X, packed)
            return self._walk(U)[inverse]
        return self._walk(X)

    def _walk(self, X: np.ndarray) -> np.ndarray:
        out = np.full(len(X), self.base_score, dtype=np.float64)
        rows = np.arange(len(X))
        for feat, thr, left, right, value in self._compiled():
            node = np.zeros(len(X), dtype=np.int64)
            while True:
                internal = feat[node] >= 0
                if not internal.any():
                    break
                r = rows[internal]
                n = node[internal]
                go_left = X[r, feat[n]] < thr[n]
                node[internal] = np.where(go_left, left[n], right[n])
            out += value[node]
        return out

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "feature_schema": list(self.feature_schema),
            "schema_digest": self.digest,
            "hyperparams": self.hyperparams.as_dict(),
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScorerModel":
        if d.get("format") != FORMAT_TAG:
            raise ValueError(f"not a {FORMAT_TAG} document")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported {FORMAT_TAG} version {d.get('version')}")
        return cls(
            trees=[TreeNode.from_dict(t) for t in d["trees"]],
            base_score=float(d["base_score"]),
            feature_schema=tuple(d["feature_schema"]),
            hyperparams=HyperParams.from_dict(d["hyperparams"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "ScorerModel":
        return cls.from_dict(json.loads(text))


def sigmoid(m):
    p = 1.0 / (1.0 + np.exp(-np.asarray(m, dtype=np.float64)))
    return np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)


def _flatten(root: TreeNode):
    feat, thr, left, right, value = [], [], [], [], []

    def visit(node: TreeNode) -> int:
        i = len(feat)
        feat.append(node.feature)
        thr.append(node.threshold)
        left.append(-1)
        right.append(-1)
        value.append(node.weight)
        if not node.is_leaf:
            left[i] = visit(node.left)
            right[i] = visit(node.right)
        return i

    visit(root)
    return (np.array(feat, dtype=np.int64), np.array(thr, dtype=np.float64),
            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), np.array(value, dtype=np.float64))


def predict(model: ScorerModel, f):
    """Score one feature vector (returns a float) or a matrix of them (returns an array)."""
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim == 1:
        return float(model.predict_proba(arr[None, :])[0])
    return model.predict_proba(arr)


# --------------------------------------------------------------------------- training


def _binary_keys(X: np.ndarray) -> Optional[np.ndarray]:
    """One integer per row when every entry is 0 or 1 and the rows fit in 62 bits."""
    if X.shape[1] > 62 or len(X) == 0 or not np.all((X == 0) | (X == 1)):
        return None
    return X.astype(np.int64) @ (np.int64(1) << np.arange(X.shape[1], dtype=np.int64))


def _unique_rows(X: np.ndarray, keys: Optional[np.ndarray] = None):
    """Distinct rows of ``X`` and the index of every row's distinct row."""
    if keys is None:
        keys = _binary_keys(X)
    if keys is None:
        return _unique_mixed_rows(X)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    return X[first], inverse.reshape(-1)


def _unique_mixed_rows(X: np.ndarray):
    """Distinct rows in lexicographic order, packing the two-valued 0/1 columns into one key."""
    if len(X) == 0:
        return X[:0], np.zeros(0, dtype=np.int64)
    is_bin = np.all((X == 0) | (X == 1), axis=0)
    if is_bin.sum() > 62 or is_bin.sum() < 2:
        U, inverse = np.unique(X, axis=0, return_inverse=True)
        return U, inverse.reshape(-1)
    keys = [X[:, j] for j in np.flatnonzero(~is_bin)[::-1]]
    keys.append(X[:, is_bin].astype(np.int64) @ (np.int64(1) << np.arange(is_bin.sum(), dtype=np.int64)))
    order = np.lexsort(keys)
    Xs = X[order]
    new = np.r_[True, np.any(Xs[1:] != Xs[:-1], axis=1)]
    group = np.cumsum(new) - 1
    inverse = np.empty(len(X), dtype=np.int64)
    inverse[order] = group
    return Xs[new], inverse


def _weighted_logloss(margin, n_pos, n_neg) -> float:
    return float(n_pos @ np.logaddexp(0.0, -margin) + n_neg @ np.logaddexp(0.0, margin))


class _Binned:
    """Distinct rows with per-feature bin indices over the sorted distinct values."""

    def __init__(self, U: np.ndarray):
        self.U = U
        self.values = []
        self.bins = []
        self.order = []
        for j in range(U.shape[1]):
            vals, inv = np.unique(U[:, j], return_inverse=True)
            self.values.append(vals)
            self.bins.append(inv.astype(np.int64))
            # rows in value order, used by the sweep for columns with many distinct values
            self.order.append(np.argsort(inv, kind="stable") if len(vals) > SWEEP_MIN_BINS else None)
        # two-valued columns are searched together through the distinct patterns they form
        self.binary = np.array([j for j, v in enumerate(self.values) if len(v) == 2], dtype=np.int64)
        if len(self.binary):
            Z = np.stack([self.bins[j] for j in self.binary], axis=1)
            P, self.pattern = _unique_rows(Z.astype(np.float64))
            self.pattern_bits = P.astype(bool)
        else:
            self.pattern = np.zeros(len(U), dtype=np.int64)
            self.pattern_bits = np.zeros((1, 0), dtype=bool)


def _binary_splits(B: _Binned, idx, active, g_act, h_act, G, H, lam, min_child_weight):
    """Gain per node for every two-valued column; the upper value goes right."""
    n_nodes = len(G)
    n_pat = len(B.pattern_bits)
    flat = idx * n_pat + B.pattern[active]
    Ag = np.bincount(flat, weights=g_act, minlength=n_nodes * n_pat).reshape(n_nodes, n_pat)
    Ah = np.bincount(flat, weights=h_act, minlength=n_nodes * n_pat).reshape(n_nodes, n_pat)
    out = []
    for c in range(len(B.binary)):
        upper = B.pattern_bits[:, c]
        GR, HR = Ag[:, upper].sum(axis=1), Ah[:, upper].sum(axis=1)
        GL, HL = G - GR, H - HR
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam))
        ok = (HL >= min_child_weight) & (HR >= min_child_weight) & (HL > 0) & (HR > 0)
        out.append(np.where(ok, gain, -np.inf))
    return out


def _sweep_splits(B: _Binned, j: int, node_of, g, h, G, H, lam, min_child_weight):
    """Best split per node on column ``j`` by a cumulative sweep over value-sorted rows.

    Returns (gain, threshold) per node; gain is -inf where no valid split exists.
    The first (lowest) threshold among equal gains wins, as in the dense search.
    """
    n_nodes = len(G)
    o = B.order[j]
    o = o[node_of[o] >= 0]
    nodes = node_of[o]
    # small integer keys make the stable sort a linear radix sort
    o = o[np.argsort(nodes.astype(np.int16) if n_nodes < 2 ** 15 else nodes, kind="stable")]
    nodes = node_of[o]
    b = B.bins[j][o]
    cg, ch = np.cumsum(g[o]), np.cumsum(h[o])
    start = np.searchsorted(nodes, np.arange(n_nodes))
    base = start[nodes]
    GL = cg - np.where(base > 0, cg[base - 1], 0.0)
    HL = ch - np.where(base > 0, ch[base - 1], 0.0)
    cand = np.flatnonzero((nodes[:-1] == nodes[1:]) & (b[:-1] != b[1:]))
    best_gain = np.full(n_nodes, -np.inf)
    best_thr = np.zeros(n_nodes)
    if len(cand) == 0:
        return best_gain, best_thr
    nc = nodes[cand]
    gl, hl = GL[cand], HL[cand]
    gr, hr = G[nc] - gl, H[nc] - hl
    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - G[nc] ** 2 / (H[nc] + lam))
    ok = (hl >= min_child_weight) & (hr >= min_child_weight) & (hl > 0) & (hr > 0)
    gain = np.where(ok, gain, -np.inf)
    np.maximum.at(best_gain, nc, gain)
    hit = np.flatnonzero((gain == best_gain[nc]) & np.isfinite(gain))
    nodes_hit, first = np.unique(nc[hit], return_index=True)
    pick = cand[hit[first]]
    vals = B.values[j]
    best_thr[nodes_hit] = 0.5 * (vals[b[pick]] + vals[b[pick + 1]])
    return best_gain, best_thr


def _grow_tree(B: _Binned, g: np.ndarray, h: np.ndarray, hp: HyperParams) -> tuple[dict, np.ndarray]:
    """Level-wise exact greedy growth.

    Returns the tree as nested dicts and the leaf weight reached by every row.
    """
    n = len(g)
    step = np.zeros(n)
    lam = hp.reg_lambda
    node_of = np.zeros(n, dtype=np.int64)
    # nodes of the current level, each a dict filled in once decided
    root: dict = {}
    level = [root]
    for depth in range(hp.max_depth + 1):
        active = node_of >= 0
        n_nodes = len(level)
        idx = node_of[active]
        G = np.bincount(idx, weights=g[active], minlength=n_nodes)
        H = np.bincount(idx, weights=h[active], minlength=n_nodes)
        parent_score = G * G / (H + lam)

        best_gain = np.full(n_nodes, MIN_SPLIT_GAIN)
        best_feat = np.full(n_nodes, -1, dtype=np.int64)
        best_thr = np.zeros(n_nodes)
        if depth < hp.max_depth:
            g_act, h_act = g[active], h[active]
            binary_gain = dict(zip(B.binary.tolist(),
                                   _binary_splits(B, idx, active, g_act, h_act, G, H, lam, hp.min_child_weight)))
            for j, (vals, bins) in enumerate(zip(B.values, B.bins)):
                nb = len(vals)
                if nb < 2:
                    continue
                if nb == 2:
                    gbest = binary_gain[j]
                    better = gbest > best_gain
                    best_gain[better] = gbest[better]
                    best_feat[better] = j
                    best_thr[better] = 0.5 * (vals[0] + vals[1])
                    continue
                if B.order[j] is not None:
                    gbest, thr = _sweep_splits(B, j, node_of, g, h, G, H, lam, hp.min_child_weight)
                    better = gbest > best_gain
                    best_gain[better] = gbest[better]
                    best_feat[better] = j
                    best_thr[better] = thr[better]
                    continue
                flat = idx * nb + bins[active]
                GL = np.bincount(flat, weights=g_act, minlength=n_nodes * nb).reshape(n_nodes, nb).cumsum(axis=1)[:, :-1]
                HL = np.bincount(flat, weights=h_act, minlength=n_nodes * nb).reshape(n_nodes, nb).cumsum(axis=1)[:, :-1]
                GR = G[:, None] - GL
                HR = H[:, None] - HL
                gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent_score[:, None])
                ok = (HL >= hp.min_child_weight) & (HR >= hp.min_child_weight) & (HL > 0) & (HR > 0)
                gain = np.where(ok, gain, -np.inf)
                pos = gain.argmax(axis=1)
                gbest = gain[np.arange(n_nodes), pos]
                better = gbest > best_gain
                best_gain[better] = gbest[better]
                best_feat[better] = j
                best_thr[better] = 0.5 * (vals[pos[better]] + vals[pos[better] + 1])

        next_level = []
        new_id = np.full(n_nodes, -1, dtype=np.int64)
        leaf_w = np.zeros(n_nodes)
        for i, node in enumerate(level):
            if best_feat[i] >= 0:
                node["feature"] = int(best_feat[i])
                node["threshold"] = float(best_thr[i])
                node["left"], node["right"] = {}, {}
                new_id[i] = len(next_level)
                next_level += [node["left"], node["right"]]
            else:
                node["weight"] = float(-G[i] / (H[i] + lam) * hp.learning_rate)
                leaf_w[i] = node["weight"]
        rows = np.flatnonzero(active)
        split = new_id[idx] >= 0
        step[rows[~split]] = leaf_w[idx[~split]]
        if not next_level:
            break
        r = rows[split]
        n_parent = idx[split]
        feat = best_feat[n_parent]
        go_left = B.U[r, feat] < best_thr[n_parent]
        node_of[rows[~split]] = -1
        node_of[r] = new_id[n_parent] + np.where(go_left, 0, 1)
        level = next_level
    return root, step


def _freeze(d: dict, scale: float = 1.0) -> TreeNode:
    if "feature" in d:
        return TreeNode(d["feature"], d["threshold"], _freeze(d["left"], scale), _freeze(d["right"], scale))
    return TreeNode(weight=d["weight"] * scale)


def _rows_of(pairs):
    """Feature matrix, labels and schema from a PairTable, CandidatePair list or ``(X, y)``."""
    if isinstance(pairs, tuple) and len(pairs) == 2:
        X, y = pairs
        return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=bool), None
    if hasattr(pairs, "X"):
        if pairs.y is None:
            raise TrainingError("training pairs carry no labels")
        return pairs.X.astype(np.float64), pairs.y, pairs.schema
    pairs = list(pairs)
    if not pairs:
        return np.zeros((0, len(FEATURE_NAMES))), np.zeros(0, dtype=bool), None
    if any(p.label is None for p in pairs):
        raise TrainingError("training pairs carry no labels")
    X = np.array([tuple(p.features) for p in pairs], dtype=np.float64)
    schema = getattr(pairs[0].features, "_fields", None)
    return X, np.array([bool(p.label) for p in pairs]), schema


def fit(X, y, hp: HyperParams = HyperParams(), feature_schema: Optional[Sequence[str]] = None) -> ScorerModel:
    """Train on a feature matrix and boolean labels."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool)
    if X.ndim != 2 or len(X) == 0:
        raise TrainingError("empty training set")
    if len(X) != len(y):
        raise TrainingError("X and y differ in length")
    if feature_schema is None:
        feature_schema = tuple(f"f{i}" for i in range(X.shape[1]))
    feature_schema = tuple(feature_schema)
    if len(feature_schema) != X.shape[1]:
        raise SchemaMismatch("feature_schema length differs from the number of columns")
    pos_rate = y.mean()
    if pos_rate in (0.0, 1.0):
        raise TrainingError("training labels contain a single class")

    U, inverse = _unique_rows(X)
    n_pos = np.bincount(inverse, weights=y, minlength=len(U))
    n_all = np.bincount(inverse, minlength=len(U)).astype(np.float64)
    n_neg = n_all - n_pos
    B = _Binned(U)

    base = float(np.log(pos_rate / (1.0 - pos_rate)))
    margin = np.full(len(U), base)
    loss = _weighted_logloss(margin, n_pos, n_neg)
    history = [loss]
    trees = []
    for rnd in range(hp.n_rounds):
        p = 1.0 / (1.0 + np.exp(-margin))
        g = n_all * p - n_pos
        h = n_all * p * (1.0 - p)
        raw, step = _grow_tree(B, g, h, hp)
        scale = 1.0
        new_loss = _weighted_logloss(margin + step, n_pos, n_neg)
        # a damped Newton step can still overshoot; halve until the loss does not rise
        while new_loss > loss and scale > 2.0 ** -30:
            scale *= 0.5
            new_loss = _weighted_logloss(margin + scale * step, n_pos, n_neg)
        if new_loss > loss:
            scale, new_loss = 0.0, loss
        if scale != 1.0:
            log.debug("round %d: leaf weights damped by %g", rnd, scale)
        tree = _freeze(raw, scale)
        margin = margin + scale * step
        new_loss = _weighted_logloss(margin, n_pos, n_neg)
        if new_loss > loss * (1.0 + 1e-12) + 1e-12:
            raise RuntimeError(f"training loss increased in round {rnd}: {loss!r} -> {new_loss!r}")
        loss = new_loss
        history.append(loss)
        trees.append(tree)
    return ScorerModel(trees, base, feature_schema, hp, history)


def train(pairs, hp: HyperParams = HyperParams(), seed: int = 0,
          feature_schema: Optional[Sequence[str]] = None) -> ScorerModel:
    """Train a scorer on labelled candidate pairs.

    ``pairs`` may be a :class:`~remitmatch.featgen.PairTable`, a list of
    ``CandidatePair`` or an ``(X, y)`` tuple.  Training is deterministic; the
    seed is accepted for interface symmetry and never consumed.
    """
    X, y, schema = _rows_of(pairs)
    return fit(X, y, hp, feature_schema or schema)


def average_models(models: Sequence[ScorerModel]) -> ScorerModel:
    """One model whose margin is the mean of the given models' margins."""
    models = list(models)
    if not models:
        raise ValueError("nothing to average")
    schema = models[0].feature_schema
    if any(tuple(m.feature_schema) != tuple(schema) for m in models):
        raise SchemaMismatch("averaged models must share a feature schema")
    w = 1.0 / len(models)
    trees = [_scaled(t, w) for m in models for t in m.trees]
    return ScorerModel(trees, float(np.mean([m.base_score for m in models])), schema, models[0].hyperparams)


def _scaled(node: TreeNode, w: float) -> TreeNode:
    if node.is_leaf:
        return TreeNode(weight=node.weight * w)
    return TreeNode(node.feature, node.threshold, _scaled(node.left, w), _scaled(node.right, w))


# --------------------------------------------------------------------------- grid search


@dataclass
class GridResult:
    best: HyperParams
    cells: list[tuple[HyperParams, Optional[float]]]


def _cell_order(item):
    i, hp, value = item
    return -value, hp.n_rounds, hp.max_depth, i


def select_best(grid: Sequence[HyperParams], evaluate_cell) -> GridResult:
    """Run ``evaluate_cell`` on every cell; highest value wins.

    Ties go to fewer rounds, then shallower trees, then grid order.  A cell
    whose training fails is recorded with value ``None``.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    cells = []
    for hp in grid:
        try:
            value = float(evaluate_cell(hp))
        except TrainingError as exc:
            log.warning("grid cell %s failed: %s", hp, exc)
            value = None
        cells.append((hp, value))
    scored = [(i, hp, v) for i, (hp, v) in enumerate(cells) if v is not None]
    if not scored:
        raise TrainingError("every grid cell failed")
    return GridResult(min(scored, key=_cell_order)[1], cells)


def grid_search(pairs, grid: Sequence[HyperParams], k: int = 3, seed: int = 0, post: bool = False) -> GridResult:
    """Mean recall at 99% precision over ``k`` transfer-level folds for every cell.

    With ``post`` the scores are rescaled per transfer before measuring, so
    the search targets the post-processed composition.
    """
    from . import evalkit
    from .featgen import PairTable

    if not isinstance(pairs, PairTable):
        pairs = PairTable.from_candidates(pairs)
    folds = evalkit.group_folds(pairs, k, seed)
    splits = [(pairs.take_groups(folds != f), pairs.take_groups(folds == f)) for f in range(k)]

    def cell(hp):
        vals = []
        for train_part, test_part in splits:
            model = train(train_part, hp)
            scores = model.predict_proba(test_part.X)
            if post:
                from .stack import normalize_scores
                scores = normalize_scores(scores, test_part.offsets)
            r = evalkit.safe_recall(scores, test_part.y, 0.99)
            vals.append(0.0 if r is None else r)
        return float(np.mean(vals))

    return select_best(grid, cell)
