"""Command line: generate -> train -> evaluate -> match.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 schema mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, evalkit, stack
from .boost import SchemaMismatch, TrainingError
from .core import validate_dataset
from .featgen import build_pairs
from .formats import (
    DataFormatError,
    RunManifest,
    digest,
    file_digest,
    load_dataset,
    load_grid,
    save_dataset,
)
from .synthgen import ConfigError, GenConfig, generate

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_SCHEMA = 0, 2, 3, 4
TRAINABLE = ("baseline", "cascade", "chain")

log = logging.getLogger("remitmatch")


class ValidationError(ValueError):
    pass


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_valid_dataset(path: str):
    d = load_dataset(path)
    problems = validate_dataset(d)
    if problems:
        shown = "; ".join(str(v) for v in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise ValidationError(f"{path}: {len(problems)} invalid record(s): {shown}{more}")
    return d


def _grid(path: Optional[str]):
    return None if path is None else load_grid(path)


# --------------------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise ValidationError(f"{args.config}: configuration must be a JSON object")
    if args.seed is not None:
        doc["seed"] = args.seed
    config = GenConfig.from_dict(doc)
    d, report = generate(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(d, out)
    report_path = _sidecar(out, ".genreport.csv")
    _write(report_path, report.to_csv())
    manifest = RunManifest("generate", digest(config.to_dict()), config.seed,
                           outputs={str(p): file_digest(p) for p in (out, report_path)},
                           timings={"total_s": round(time.perf_counter() - t0, 3)})
    manifest.save(_sidecar(out, ".manifest.json"))
    failed = [r.statistic for r in report.rows if r.passed is False]
    print(f"wrote {len(d.transfers)} transfers, {len(d.members)} members, {len(d.gold)} matches to {out}")
    if failed:
        print(f"warning: realized statistics outside tolerance: {', '.join(failed)}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    d = _load_valid_dataset(args.data)
    grid = _grid(args.grid)
    pairs = build_pairs(d)
    if pairs.y is None or not pairs.y.any() or pairs.y.all():
        raise TrainingError("training data must contain matching and non-matching pairs")
    method = stack.make_method(args.method)
    timings = {"features_s": round(time.perf_counter() - t0, 3)}
    if grid is not None:
        method = stack.make_method(args.method, stack.tune([method], pairs, grid, k=args.folds, seed=args.seed)[method.name])
    timings["search_s"] = round(time.perf_counter() - t0 - timings["features_s"], 3)
    model = method.fit(pairs, seed=args.seed)
    if isinstance(model, stack.ChainModel) and any(model.prior_only[1:]):
        idx = [f"C{i + 1}" for i, p in enumerate(model.prior_only) if p]
        verb = "is a prior-only model" if len(idx) == 1 else "are prior-only models"
        print(f"warning: {'/'.join(idx)} {verb}: too few transfers with enough gold members "
              "to train later chain stages", file=sys.stderr)
    out = Path(args.out)
    _write(out, stack.dumps_model(model) + "\n")
    timings["total_s"] = round(time.perf_counter() - t0, 3)
    config = {"method": args.method, "grid": None if grid is None else [h.as_dict() for h in grid],
              "folds": args.folds, "hyperparams": [h.as_dict() for h in method.hps]}
    RunManifest("train", digest(config), args.seed, inputs={args.data: file_digest(args.data)},
                outputs={str(out): file_digest(out)}, timings=timings).save(_sidecar(out, ".manifest.json"))
    print(f"trained {args.method} on {len(pairs)} pairs; model written to {out}")
    return EXIT_OK


def _expand_methods(names: Sequence[str], post: bool) -> list[str]:
    out: list[str] = []
    for name in names:
        for n in (name, name + "+post") if post and not name.endswith("+post") else (name,):
            if n not in out:
                out.append(n)
    return out


def cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    names = _expand_methods([m for spec in args.methods for m in spec.split(",") if m], args.post)
    for n in names:
        stack.make_method(n)  # reject unknown names before any work
    d = _load_valid_dataset(args.data)
    grid = _grid(args.grid)
    pairs = build_pairs(d)
    report = evalkit.evaluate(names, pairs=pairs, k=args.folds, seed=args.seed, grid=grid,
                              tune_folds=args.tune_folds)
    out = Path(args.out)
    written = {out / "report.csv": report.table_csv(), out / "report_detail.csv": report.detail_csv(),
               out / "hyperparams.json": json.dumps(report.hyperparams, indent=1, sort_keys=True) + "\n"}
    for r in report.results:
        for sg in evalkit.SUBGROUPS:
            written[out / "curves" / f"{r.method}.{sg}.csv"] = report.curve_csv(r.method, sg)
    for path, text in written.items():
        _write(path, text)
    config = {"methods": names, "folds": args.folds, "tune_folds": args.tune_folds,
              "grid": None if grid is None else [h.as_dict() for h in grid],
              "curve_metadata": report.metadata["curve"]}
    RunManifest("evaluate", digest(config), args.seed, inputs={args.data: file_digest(args.data)},
                outputs={str(p): file_digest(p) for p in written},
                timings={"total_s": round(time.perf_counter() - t0, 3)}).save(out / "manifest.json")
    sys.stdout.write(report.table_csv())
    return EXIT_OK


def match_rows(transfer_ids, member_ids, scores, threshold: float) -> list[tuple[str, str, float]]:
    """Pairs scoring at least ``threshold``, sorted by transfer then member."""
    keep = np.flatnonzero(np.asarray(scores) >= threshold)
    rows = [(str(transfer_ids[i]), str(member_ids[i]), float(scores[i])) for i in keep]
    return sorted(rows)


def cmd_match(args) -> int:
    t0 = time.perf_counter()
    try:
        model = stack.loads_model(Path(args.model).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"{args.model}: not a model file ({exc})") from None
    d = _load_valid_dataset(args.data)
    pairs = build_pairs(d)
    scores = stack.model_scores(model, pairs)
    if args.post:
        scores = stack.normalize_scores(scores, pairs.offsets)
    rows = match_rows(pairs.transfer_ids, pairs.member_ids, scores, args.threshold)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["transfer_id", "member_id", "score"])
    for t, m, s in rows:
        w.writerow([t, m, f"{s:.6f}"])
    out = Path(args.out)
    _write(out, buf.getvalue())
    config = {"threshold": args.threshold, "post": args.post}
    RunManifest("match", digest(config), None,
                inputs={args.model: file_digest(args.model), args.data: file_digest(args.data)},
                outputs={str(out): file_digest(out)},
                timings={"total_s": round(time.perf_counter() - t0, 3)}).save(_sidecar(out, ".manifest.json"))
    print(f"{len(rows)} matches at threshold {args.threshold} written to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="remitmatch", description="Match bank transfers to club members.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset and its statistics report")
    g.add_argument("--config", help="JSON object of generator settings (defaults otherwise)")
    g.add_argument("--out", required=True, help="dataset JSONL path")
    g.add_argument("--seed", type=int, help="overrides the configured seed")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit a model (optionally grid-searched) on a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--method", required=True, choices=TRAINABLE)
    t.add_argument("--grid", help="JSON grid of hyperparameters")
    t.add_argument("--folds", type=int, default=3, help="internal folds of the grid search")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="model file path")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="cross-validated recall at 95%% and 99%% precision")
    e.add_argument("--data", required=True)
    e.add_argument("--methods", nargs="+", default=["baseline"],
                   help="method names, e.g. baseline baseline+post cascade+post chain+post")
    e.add_argument("--post", action="store_true", help="also report the +post composition of every method")
    e.add_argument("--folds", type=int, default=5)
    e.add_argument("--tune-folds", type=int, default=3)
    e.add_argument("--grid", help="JSON grid; each method is tuned before the outer folds")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("match", help="list candidate pairs scoring at least a threshold")
    m.add_argument("--model", required=True)
    m.add_argument("--data", required=True)
    m.add_argument("--threshold", type=float, required=True)
    m.add_argument("--post", action="store_true", help="rescale scores per transfer before thresholding")
    m.add_argument("--out", required=True, help="matches CSV path")
    m.set_defaults(func=cmd_match)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SchemaMismatch as exc:
        print(f"error: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ConfigError, DataFormatError, ValidationError, TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: {name + ': ' if name else ''}{exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
