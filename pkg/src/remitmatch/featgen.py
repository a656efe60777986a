"""Club-level blocking and the binary pairwise feature vector."""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import Dataset, Member, Transfer
from .textnorm import (
    DEFAULT_MAX_REL,
    declension_stems,
    extract_member_codes,
    normalize,
    soft_match,
)

# street-type abbreviations carry no identity
ADDRESS_STOPWORDS = frozenset({"ul", "al", "os", "pl", "m"})
MIN_ADDRESS_OVERLAP = 2


class FeatureVector(NamedTuple):
    id_exact: int
    id_sloppy: int
    id_other_member: int
    name_in_title: int
    surname_in_title: int
    name_in_sender: int
    surname_in_sender: int
    guardian_name_in_title: int
    guardian_surname_in_title: int
    guardian_in_sender: int
    address_in_sender: int
    name_soft_title: int
    surname_soft_title: int


FEATURE_NAMES: tuple[str, ...] = FeatureVector._fields


def schema_digest(names: Sequence[str]) -> str:
    """Stable hash of an ordered feature schema."""
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()[:16]


def export_schema(names: Sequence[str] = FEATURE_NAMES) -> str:
    return "".join(f"{n}\n" for n in names)


@dataclass(frozen=True)
class CandidatePair:
    transfer_id: str
    member_id: str
    features: FeatureVector
    label: Optional[bool] = None


class _TransferView:
    __slots__ = ("title_tokens", "title_stems", "sender_stems", "sender_addr", "codes", "has_code")

    def __init__(self, t: Transfer):
        self.title_tokens = normalize(t.title)
        self.title_stems = _stem_set(self.title_tokens)
        self.sender_stems = _stem_set(normalize(t.sender_name))
        self.sender_addr = frozenset(normalize(t.sender_address))
        self.codes = extract_member_codes(t.title)
        self.has_code = bool(self.codes)


class _MemberView:
    __slots__ = ("club", "code", "key", "first", "surname", "g_first", "g_surname", "addr")

    def __init__(self, m: Member):
        club, number = m.code_parts
        self.club = m.club_id
        self.code = (club, number)
        self.key = (club, int(number)) if number else None
        self.first = _name_stems(m.first_name)
        self.surname = _name_stems(m.surname)
        g = normalize(m.guardian_name or "")
        self.g_first = declension_stems(g[0]) if g else frozenset()
        self.g_surname = declension_stems(g[-1]) if len(g) > 1 else frozenset()
        self.addr = street_tokens(m.address or "")


def street_tokens(address: str) -> frozenset[str]:
    """Identity-bearing tokens of the street line (the text before the first comma)."""
    return frozenset(normalize(address.split(",", 1)[0])) - ADDRESS_STOPWORDS


def _stem_set(tokens) -> frozenset[str]:
    out: set[str] = set()
    for tok in tokens:
        out |= declension_stems(tok)
    return frozenset(out)


def _name_stems(name: str) -> frozenset[str]:
    return _stem_set(normalize(name))


@lru_cache(maxsize=1_000_000)
def _soft(a: str, b: str, max_rel: float) -> bool:
    return soft_match(a, b, max_rel)


def _soft_hits(tv: _TransferView, candidates, max_rel: float) -> frozenset[str]:
    """Subset of ``candidates`` (name stems) within soft-match range of a title stem."""
    hits = set()
    for cand in candidates:
        for s in tv.title_stems:
            if _soft(s, cand, max_rel):
                hits.add(cand)
                break
    return frozenset(hits)


def _features(tv: _TransferView, mv: _MemberView, soft_hits: frozenset[str]) -> FeatureVector:
    id_exact = id_sloppy = id_other = 0
    for c in tv.codes:
        if mv.key is not None and c.key == mv.key:
            if c.well_formed and (c.club_part, c.number_part) == mv.code:
                id_exact = 1
            else:
                id_sloppy = 1
        else:
            id_other = 1
    if id_exact:
        id_sloppy = 0
    name_t = bool(mv.first & tv.title_stems)
    surname_t = bool(mv.surname & tv.title_stems)
    return FeatureVector(
        id_exact,
        id_sloppy,
        id_other,
        int(name_t),
        int(surname_t),
        int(bool(mv.first & tv.sender_stems)),
        int(bool(mv.surname & tv.sender_stems)),
        int(bool(mv.g_first & tv.title_stems)),
        int(bool(mv.g_surname & tv.title_stems)),
        int(bool(mv.g_first & tv.sender_stems) and bool(mv.g_surname & tv.sender_stems)),
        int(len(mv.addr & tv.sender_addr) >= MIN_ADDRESS_OVERLAP),
        int(name_t or bool(mv.first & soft_hits)),
        int(surname_t or bool(mv.surname & soft_hits)),
    )


def featurize(t: Transfer, m: Member, max_rel: float = DEFAULT_MAX_REL) -> FeatureVector:
    """Feature vector for one transfer/member pair of the same club."""
    if t.club_id != m.club_id:
        raise ValueError(f"cross-club pair: transfer {t.transfer_id} ({t.club_id}) vs member {m.member_id} ({m.club_id})")
    tv, mv = _TransferView(t), _MemberView(m)
    return _features(tv, mv, _soft_hits(tv, mv.first | mv.surname, max_rel))


class PairTable(Sequence):
    """Columnar candidate pairs, grouped contiguously by transfer.

    Pairs are ordered by transfer_id then member_id.  ``offsets[g]`` and
    ``offsets[g + 1]`` delimit the pairs of transfer group ``g``; transfers
    without any same-club member form no group.
    """

    def __init__(self, transfer_ids, member_ids, X, y, offsets, group_has_id, group_club,
                 schema: Sequence[str] = FEATURE_NAMES):
        self.transfer_ids = np.asarray(transfer_ids, dtype=str)
        self.member_ids = np.asarray(member_ids, dtype=str)
        X = np.asarray(X)
        X = X.astype(np.float64 if X.dtype.kind == "f" else np.uint8, copy=False)
        self.X = X.reshape(len(self.transfer_ids), len(schema))
        self.y = None if y is None else np.asarray(y, dtype=bool)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.group_has_id = np.asarray(group_has_id, dtype=bool)
        self.group_club = np.asarray(group_club, dtype=str)
        self.schema = tuple(schema)

    def __len__(self) -> int:
        return len(self.transfer_ids)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return CandidatePair(
            str(self.transfer_ids[i]),
            str(self.member_ids[i]),
            FeatureVector(*(int(v) for v in self.X[i])),
            None if self.y is None else bool(self.y[i]),
        )

    @property
    def n_groups(self) -> int:
        return len(self.offsets) - 1

    @property
    def group_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def group_of(self) -> np.ndarray:
        """Group index of every pair."""
        return np.repeat(np.arange(self.n_groups), self.group_sizes)

    @property
    def group_transfer_ids(self) -> np.ndarray:
        return self.transfer_ids[self.offsets[:-1]]

    def take_groups(self, groups) -> "PairTable":
        groups = np.asarray(groups)
        groups = np.flatnonzero(groups) if groups.dtype == bool else groups.astype(np.int64)
        sizes = self.group_sizes[groups]
        rows = np.concatenate([np.arange(self.offsets[g], self.offsets[g + 1]) for g in groups]) \
            if len(groups) else np.zeros(0, dtype=np.int64)
        return PairTable(
            self.transfer_ids[rows],
            self.member_ids[rows],
            self.X[rows],
            None if self.y is None else self.y[rows],
            np.concatenate([[0], np.cumsum(sizes)]),
            self.group_has_id[groups],
            self.group_club[groups],
            self.schema,
        )

    @classmethod
    def from_candidates(cls, pairs: Sequence[CandidatePair]) -> "PairTable":
        """Group a flat list of candidate pairs by transfer (club strata unknown)."""
        pairs = sorted(pairs, key=lambda p: (p.transfer_id, p.member_id))
        offsets = [0]
        for i in range(1, len(pairs) + 1):
            if i == len(pairs) or pairs[i].transfer_id != pairs[i - 1].transfer_id:
                offsets.append(i)
        if not pairs:
            offsets = [0]
        schema = getattr(pairs[0].features, "_fields", FEATURE_NAMES) if pairs else FEATURE_NAMES
        labelled = bool(pairs) and all(p.label is not None for p in pairs)
        return cls(
            [p.transfer_id for p in pairs],
            [p.member_id for p in pairs],
            np.array([tuple(p.features) for p in pairs]).reshape(len(pairs), len(schema)),
            [bool(p.label) for p in pairs] if labelled else None,
            offsets,
            [False] * (len(offsets) - 1),
            [""] * (len(offsets) - 1),
            schema,
        )

    def with_X(self, X, schema: Sequence[str]) -> "PairTable":
        return PairTable(self.transfer_ids, self.member_ids, X, self.y, self.offsets,
                         self.group_has_id, self.group_club, schema)


def build_pairs(d: Dataset, max_rel: float = DEFAULT_MAX_REL) -> PairTable:
    """Every within-club (transfer, member) pair, featurized and labelled from ``d.gold``."""
    members_by_club: dict[str, list[Member]] = defaultdict(list)
    for m in sorted(d.members, key=lambda m: m.member_id):
        members_by_club[m.club_id].append(m)
    views = {m.member_id: _MemberView(m) for m in d.members}
    club_stems = {
        club: sorted(frozenset().union(*(views[m.member_id].first | views[m.member_id].surname for m in ms)))
        for club, ms in members_by_club.items()
    }
    labelled = bool(d.gold.matches)
    gold = d.gold.matches

    t_ids, m_ids, rows, labels = [], [], [], []
    offsets, has_id, clubs = [0], [], []
    for t in sorted(d.transfers, key=lambda t: t.transfer_id):
        club_members = members_by_club.get(t.club_id, [])
        if not club_members:
            continue
        tv = _TransferView(t)
        hits = _soft_hits(tv, club_stems[t.club_id], max_rel)
        for m in club_members:
            t_ids.append(t.transfer_id)
            m_ids.append(m.member_id)
            rows.append(_features(tv, views[m.member_id], hits))
            labels.append((t.transfer_id, m.member_id) in gold)
        offsets.append(len(t_ids))
        has_id.append(tv.has_code)
        clubs.append(t.club_id)

    X = np.array(rows, dtype=np.uint8).reshape(len(rows), len(FEATURE_NAMES))
    return PairTable(t_ids, m_ids, X, labels if labelled else None, offsets, has_id, clubs)
