"""On-disk formats: dataset JSON Lines, hyperparameter grids and run manifests."""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import platform
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Union

from .boost import FORMAT_TAG, FORMAT_VERSION, HyperParams
from .core import Dataset, MatchSet, Member, Transfer

DATASET_FORMAT = "remitmatch-dataset"
DATASET_VERSION = 1
MANIFEST_FORMAT = "remitmatch-manifest"
MANIFEST_VERSION = 1

PathLike = Union[str, os.PathLike]

_TRANSFER_FIELDS = tuple(f.name for f in fields(Transfer))
_MEMBER_FIELDS = tuple(f.name for f in fields(Member))


class DataFormatError(ValueError):
    """A file parsed but does not follow the expected format."""


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(obj) -> str:
    """Platform-independent digest of a JSON-serializable object."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def file_digest(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --------------------------------------------------------------------------- datasets


def dataset_lines(d: Dataset) -> Iterable[str]:
    yield canonical_json({"format": DATASET_FORMAT, "version": DATASET_VERSION})
    for t in d.transfers:
        rec = {"record": "transfer", **{k: getattr(t, k) for k in _TRANSFER_FIELDS}}
        rec["date"] = t.date.isoformat()
        yield json.dumps(rec, ensure_ascii=False)
    for m in d.members:
        yield json.dumps({"record": "member", **{k: getattr(m, k) for k in _MEMBER_FIELDS}}, ensure_ascii=False)
    for t_id, m_id in sorted(d.gold.matches):
        yield json.dumps({"record": "match", "transfer_id": t_id, "member_id": m_id}, ensure_ascii=False)


def dumps_dataset(d: Dataset) -> str:
    return "".join(line + "\n" for line in dataset_lines(d))


def save_dataset(d: Dataset, path: PathLike) -> None:
    Path(path).write_text(dumps_dataset(d), encoding="utf-8")


def _fields(rec: dict, names: tuple, lineno: int, kind: str, optional=()) -> dict:
    missing = [n for n in names if n not in rec and n not in optional]
    if missing:
        raise DataFormatError(f"line {lineno}: {kind} record lacks field(s) {', '.join(missing)}")
    extra = sorted(set(rec) - set(names) - {"record"})
    if extra:
        raise DataFormatError(f"line {lineno}: {kind} record has unknown field(s) {', '.join(extra)}")
    return {n: rec.get(n) for n in names}


def loads_dataset(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise DataFormatError("empty dataset file (missing format header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"line 1: invalid JSON ({exc.msg})") from None
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise DataFormatError(f"line 1: expected a {DATASET_FORMAT} header")
    if header.get("version") != DATASET_VERSION:
        raise DataFormatError(f"unsupported dataset version {header.get('version')!r}")
    transfers, members, matches = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        kind = rec.get("record") if isinstance(rec, dict) else None
        if kind == "transfer":
            f = _fields(rec, _TRANSFER_FIELDS, lineno, kind)
            try:
                f["date"] = date.fromisoformat(f["date"])
            except (TypeError, ValueError):
                raise DataFormatError(f"line {lineno}: date {f['date']!r} is not an ISO calendar date") from None
            transfers.append(Transfer(**f))
        elif kind == "member":
            members.append(Member(**_fields(rec, _MEMBER_FIELDS, lineno, kind,
                                            optional=("guardian_name", "address"))))
        elif kind == "match":
            f = _fields(rec, ("transfer_id", "member_id"), lineno, kind)
            matches.append((f["transfer_id"], f["member_id"]))
        else:
            raise DataFormatError(f"line {lineno}: unknown record type {kind!r}")
    return Dataset(tuple(transfers), tuple(members), MatchSet(matches))


def load_dataset(path: PathLike) -> Dataset:
    return loads_dataset(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------- grids


def parse_grid(doc) -> list[HyperParams]:
    """A list of cells, or a mapping of field -> list of values expanded as a product."""
    if isinstance(doc, dict):
        keys = list(doc)
        values = [v if isinstance(v, list) else [v] for v in doc.values()]
        doc = [dict(zip(keys, combo)) for combo in itertools.product(*values)]
    if not isinstance(doc, list) or not doc:
        raise DataFormatError("grid must be a non-empty list of cells or a mapping of value lists")
    try:
        return [HyperParams.from_dict(cell) for cell in doc]
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid grid cell: {exc}") from None


def load_grid(path: PathLike) -> list[HyperParams]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc.msg})") from None
    return parse_grid(doc)


# --------------------------------------------------------------------------- manifests


@dataclass
class RunManifest:
    command: str
    config_digest: str
    seed: Optional[int]
    format_versions: dict = field(default_factory=lambda: {
        DATASET_FORMAT: DATASET_VERSION, FORMAT_TAG: FORMAT_VERSION})
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    environment: dict = field(default_factory=lambda: {"python": platform.python_version()})

    def to_dict(self) -> dict:
        return {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION, **asdict(self)}

    def save(self, path: PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
