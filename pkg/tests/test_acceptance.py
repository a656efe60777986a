"""Acceptance criteria.  Each test prints one ``[ACCEPT n] PASS|FAIL ...`` line.

The lines are repeated in the terminal summary of every pytest run; the
end-to-end benchmark (criterion 5) takes a few minutes.
"""

import itertools
import json
import time

import numpy as np
import pytest

from remitmatch import cli, evalkit
from remitmatch.boost import HyperParams, ScorerModel, TreeNode, fit, predict
from remitmatch.featgen import FEATURE_NAMES, build_pairs
from remitmatch.stack import (
    ChainModel,
    cascade_extend,
    cascade_train,
    chain_predict,
    chain_schema,
    chain_train,
    extended_schema,
    postprocess_scores,
)
from remitmatch.synthgen import GenConfig, generate
from remitmatch.textnorm import levenshtein
from remitmatch.formats import dumps_dataset

BENCHMARK_GRID = [HyperParams(n_rounds=r, max_depth=d, learning_rate=0.3) for r in (50, 100) for d in (2, 3)]
BENCHMARK_METHODS = ["baseline", "baseline+post", "cascade+post", "chain+post"]


ACCEPT_LINES = []


def report(n, ok, detail):
    line = f"[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPT_LINES.append(line)
    print("\n" + line)
    assert ok, detail


# --------------------------------------------------------------------------- oracles


def _lev_oracle(a, b):
    d = [[i + j if i * j == 0 else 0 for j in range(len(b) + 1)] for i in range(len(a) + 1)]
    for i, j in itertools.product(range(1, len(a) + 1), range(1, len(b) + 1)):
        d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a)][len(b)]


def _walk_oracle(model, x):
    m = model.base_score
    for tree in model.trees:
        node = tree
        while not node.is_leaf:
            node = node.left if x[node.feature] < node.threshold else node.right
        m += node.weight
    return float(np.clip(1 / (1 + np.exp(-m)), 1e-15, 1 - 1e-15))


def _curve_oracle(scores, labels):
    pts = []
    for t in sorted(set(scores), reverse=True):
        pred = [s >= t for s in scores]
        tp = sum(p and l for p, l in zip(pred, labels))
        pts.append((t, tp / sum(pred), tp / sum(labels)))
    return pts


def test_criterion_1_oracle_equivalences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    alphabet = list("abcdeąęłóż")
    pairs = [("".join(rng.choice(alphabet, rng.integers(0, 12))), "".join(rng.choice(alphabet, rng.integers(0, 12))))
             for _ in range(1000)]
    lev_bad = sum(levenshtein(a, b) != _lev_oracle(a, b) for a, b in pairs)

    X = rng.integers(0, 2, (3000, len(FEATURE_NAMES))).astype(float)
    y = rng.random(3000) < 1 / (1 + np.exp(-(X[:, 0] * 2 - X[:, 3] + X[:, 5] * X[:, 7] - 0.5)))
    model = fit(X, y, HyperParams(n_rounds=30, max_depth=3), FEATURE_NAMES)
    V = rng.integers(0, 2, (1000, len(FEATURE_NAMES))).astype(float)
    batch = predict(model, V)
    walk_bad = sum(predict(model, v) != _walk_oracle(model, v) or batch[i] != _walk_oracle(model, v)
                   for i, v in enumerate(V))

    curve_bad = 0
    for _ in range(200):
        n = int(rng.integers(1, 30))
        scores = rng.choice([0.05, 0.2, 0.4, 0.5, 0.7, 0.9, 0.99], n).tolist()
        labels = (rng.random(n) < 0.5).tolist()
        labels[0] = True
        got = evalkit.pr_curve(scores, labels).points()
        curve_bad += got != _curve_oracle(scores, labels)
    elapsed = time.perf_counter() - t0
    report(1, lev_bad == walk_bad == curve_bad == 0 and elapsed < 30,
           f"levenshtein mismatches={lev_bad}/1000, predict mismatches={walk_bad}/1000, "
           f"pr_curve mismatches={curve_bad}/200, {elapsed:.1f}s (< 30s)")


def test_criterion_2_formula_checks():
    rng = np.random.default_rng(2)
    table, n = {}, 0
    while n < 10_000:
        k = int(rng.integers(1, 20))
        table[f"T{len(table):05d}"] = {f"M{j:02d}": float(s) for j, s in
                                       enumerate(rng.random(k) * (rng.random() < 0.95))}
        n += k
    post = postprocess_scores(table).to_dict()
    worst, order_bad = 0.0, 0
    for tid, members in table.items():
        raw = np.array(list(members.values()))
        new = np.array([post[tid][m] for m in members])
        if raw.sum() > 0:
            worst = max(worst, abs(new.sum() - 1.0))
        order_bad += not np.array_equal(np.argsort(raw, kind="stable"), np.argsort(new, kind="stable"))
    curve = evalkit.pr_curve([0.9, 0.8, 0.7], [1, 0, 1])
    r95 = evalkit.recall_at_precision(curve, 0.95)
    r60 = evalkit.recall_at_precision(curve, 0.6)
    report(2, worst <= 1e-9 and order_bad == 0 and r95 == 0.5 and r60 == 1.0,
           f"{n} pairs: max |sum-1|={worst:.1e} (<= 1e-9), argsort changes={order_bad}; "
           f"3-point curve recall@0.95={r95} (0.5), recall@0.6={r60} (1.0)")


def test_criterion_3_structural_invariants():
    f = tuple(np.random.default_rng(3).integers(0, 2, len(FEATURE_NAMES)))
    (self_ext,) = cascade_extend([("M1", 0.7, f)])
    self_ok = set(self_ext.dist) == {0} and self_ext.rank_i == 0 and self_ext.gap_i == 0.0
    ext = cascade_extend([("M1", 0.7, f), ("M2", 0.2, f)])
    length_ok = all(len(e) == len(e.as_array()) == 2 * len(FEATURE_NAMES) + 4 == len(extended_schema())
                    for e in ext)

    def always(k):
        schema = chain_schema(FEATURE_NAMES, k)
        return ScorerModel([TreeNode(weight=0.0)], 30.0, schema, HyperParams(n_rounds=1))

    chain = ChainModel([always(0), always(1), always(2)])
    rng = np.random.default_rng(4)
    most = max(len(chain_predict(chain, [(f"M{i:02d}", tuple(rng.integers(0, 2, len(FEATURE_NAMES))))
                                         for i in range(50)])) for _ in range(20))
    report(3, self_ok and length_ok and most <= 3,
           f"self-comparison dist all-zero & rank 0: {self_ok}; extended length 2|F|+4={2 * len(FEATURE_NAMES) + 4}: "
           f"{length_ok}; max accepted of 50 all-high members={most} (<= 3)")


def test_criterion_4_generator_calibration():
    t0 = time.perf_counter()
    c = GenConfig(n_transfers=10_000, transfers_per_club_cap=None, seed=4)
    d1, rep = generate(c)
    d2, _ = generate(c)
    identical = dumps_dataset(d1) == dumps_dataset(d2)
    elapsed = time.perf_counter() - t0
    idr, err, multi = rep["id_rate"].realized, rep["id_error_rate"].realized, rep["multi_member_rate"].realized
    ok = (abs(idr - 0.65) <= 0.02 and abs(err - 0.04) <= 0.01 and abs(multi - 0.05) <= 0.01
          and identical and elapsed < 60)
    report(4, ok, f"n={len(d1.transfers)}: id rate={idr:.4f} (0.65±0.02), id error={err:.4f} (0.04±0.01), "
                  f"multi-member={multi:.4f} (0.05±0.01), byte-identical={identical}, {elapsed:.1f}s (< 60s)")


@pytest.fixture(scope="module")
def benchmark_pairs():
    d, _ = generate(GenConfig())
    return build_pairs(d)


@pytest.mark.slow
def test_criterion_5_end_to_end_ordering(benchmark_pairs):
    t0 = time.perf_counter()
    rep = evalkit.evaluate(BENCHMARK_METHODS, pairs=benchmark_pairs, k=5, seed=0, grid=BENCHMARK_GRID)
    elapsed = time.perf_counter() - t0
    r = {m: rep.recall(m, "all", 0.99) for m in BENCHMARK_METHODS}
    noid = {m: rep.recall(m, "noid", 0.99) for m in BENCHMARK_METHODS}
    best_stacked = max(r["cascade+post"], r["chain+post"])
    best_noid = max(noid["cascade+post"], noid["chain+post"])
    ok = (r["baseline"] < r["baseline+post"] and best_stacked >= r["baseline+post"] - 0.01
          and best_noid - noid["baseline"] >= 0.05 and elapsed < 15 * 60)
    print("\n" + rep.table_csv())
    report(5, ok, f"{benchmark_pairs.n_groups} transfers; recall@0.99 baseline={r['baseline']:.3f} < "
                  f"baseline+post={r['baseline+post']:.3f}; best stacked={best_stacked:.3f} (>= post-0.01); "
                  f"no-ID gain={best_noid - noid['baseline']:+.3f} (>= 0.05); {elapsed:.0f}s (< 900s)")


def test_criterion_6_perfect_scorer(benchmark_pairs):
    rep = evalkit.evaluate("oracle", pairs=benchmark_pairs, k=5, seed=0)
    folds = [v for p in evalkit.TARGET_PRECISIONS for v in rep["oracle"].cells[("all", p)].per_fold]
    report(6, all(v == 1.0 for v in folds), f"oracle per-fold recall at 0.95/0.99: {folds}")


def test_criterion_7_determinism(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"n_clubs": 3, "n_transfers": 600, "transfers_per_club_cap": 200,
                               "members_per_club": [25, 50], "multi_member_rate": 0.1, "seed": 7}))
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"n_rounds": [10, 20], "max_depth": [2]}))

    def run(tag):
        out = tmp_path / tag
        data = out / "data.jsonl"
        codes = [cli.main(["generate", "--config", str(cfg), "--out", str(data)])]
        for method in ("baseline", "cascade", "chain"):
            codes.append(cli.main(["train", "--data", str(data), "--method", method, "--grid", str(grid),
                                   "--folds", "2", "--seed", "5", "--out", str(out / f"{method}.json")]))
        codes.append(cli.main(["evaluate", "--data", str(data), "--methods", "baseline", "cascade", "chain",
                               "--post", "--folds", "3", "--tune-folds", "2", "--grid", str(grid),
                               "--seed", "5", "--out", str(out / "eval")]))
        files = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*"))
                 if p.is_file() and "manifest" not in p.name}
        return codes, files

    codes_a, a = run("a")
    codes_b, b = run("b")
    differ = sorted(str(k) for k in a if a[k] != b.get(k))
    ok = codes_a == codes_b == [0] * 5 and a.keys() == b.keys() and not differ
    report(7, ok, f"{len(a)} primary outputs compared across two runs; differing={differ or 'none'}")


def test_criterion_8_training_monotonicity(benchmark_pairs):
    hp = HyperParams(n_rounds=100, max_depth=3)
    histories = [fit(benchmark_pairs.X, benchmark_pairs.y, hp).loss_history]
    # every boost.fit call (including cascade and chain stages) checks the loss in-run
    # and raises if a round increases it; these calls would fail otherwise
    cascade_train(benchmark_pairs, hp, hp)
    chain_train(benchmark_pairs, [hp])
    worst = max(float(np.max(np.diff(h))) for h in histories)
    report(8, worst <= 0.0, f"{len(histories[0]) - 1} rounds on {len(benchmark_pairs)} pairs; "
                            f"largest round-to-round loss change={worst:.3e} (<= 0); stacked stages trained "
                            f"without an in-run increase")
