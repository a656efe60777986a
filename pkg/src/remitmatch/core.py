"""Domain model: transfers, members, gold matches and scored pairs."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Optional

_CODE_RE = re.compile(r"^([A-Za-z]+)-(\d+)$")


@dataclass(frozen=True)
class Transfer:
    """One bank transfer as received. Text fields are never normalized here."""

    transfer_id: str
    club_id: str
    sender_name: str
    sender_address: str
    title: str
    date: date
    amount: int  # minor units


@dataclass(frozen=True)
class Member:
    member_id: str
    club_id: str
    member_code: str
    first_name: str
    surname: str
    guardian_name: Optional[str] = None
    address: Optional[str] = None

    @property
    def code_parts(self) -> tuple[str, str]:
        """``("WK", "0123")`` for ``"WK-0123"``; empty strings if malformed."""
        m = _CODE_RE.match(self.member_code)
        if m is None:
            return "", ""
        return m.group(1), m.group(2)


@dataclass(frozen=True)
class MatchSet:
    matches: frozenset = field(default_factory=frozenset)

    def __init__(self, matches: Iterable[tuple[str, str]] = ()):
        object.__setattr__(self, "matches", frozenset((str(t), str(m)) for t, m in matches))

    def __contains__(self, pair) -> bool:
        return pair in self.matches

    def __iter__(self):
        return iter(sorted(self.matches))

    def __len__(self) -> int:
        return len(self.matches)

    def members_of(self, transfer_id: str) -> list[str]:
        return sorted(m for t, m in self.matches if t == transfer_id)


@dataclass(frozen=True)
class Dataset:
    transfers: tuple[Transfer, ...]
    members: tuple[Member, ...]
    gold: MatchSet = field(default_factory=MatchSet)

    def __post_init__(self):
        object.__setattr__(self, "transfers", tuple(self.transfers))
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def clubs(self) -> list[str]:
        return sorted({t.club_id for t in self.transfers} | {m.club_id for m in self.members})

    def gold_by_transfer(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for t, m in sorted(self.gold.matches):
            out.setdefault(t, []).append(m)
        return out

    def subset(self, transfer_ids: Iterable[str]) -> "Dataset":
        """Keep the given transfers, all members, and the gold pairs they touch."""
        keep = set(transfer_ids)
        return Dataset(
            transfers=tuple(t for t in self.transfers if t.transfer_id in keep),
            members=self.members,
            gold=MatchSet((t, m) for t, m in self.gold.matches if t in keep),
        )


@dataclass(frozen=True)
class ScoredPair:
    transfer_id: str
    member_id: str
    score: float
    label: Optional[bool] = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score!r} outside [0, 1]")


@dataclass(frozen=True)
class Violation:
    record: str
    rule: str

    def __str__(self) -> str:
        return f"{self.record}: {self.rule}"


def validate_dataset(d: Dataset) -> list[Violation]:
    """Check every type invariant of ``d``; an empty list means the dataset is valid."""
    out: list[Violation] = []

    transfers: dict[str, Transfer] = {}
    for t in d.transfers:
        rec = f"transfer {t.transfer_id}"
        if t.transfer_id in transfers:
            out.append(Violation(rec, "duplicate transfer_id"))
        transfers.setdefault(t.transfer_id, t)
        if not isinstance(t.amount, int) or isinstance(t.amount, bool) or t.amount < 0:
            out.append(Violation(rec, "amount must be a non-negative integer"))
        if not isinstance(t.date, date):
            out.append(Violation(rec, "date must be a calendar date"))

    members: dict[str, Member] = {}
    for m in d.members:
        rec = f"member {m.member_id}"
        if m.member_id in members:
            out.append(Violation(rec, "duplicate member_id"))
        members.setdefault(m.member_id, m)
        match = _CODE_RE.match(m.member_code)
        if match is None:
            out.append(Violation(rec, f"member_code {m.member_code!r} is not of the form AA-BBBB"))
            continue
        prefix, number = match.groups()
        if prefix != m.club_id:
            out.append(Violation(rec, f"member_code prefix {prefix!r} differs from club_id {m.club_id!r}"))
        if not 1 <= len(number) <= 6:
            out.append(Violation(rec, "member_code numeric part must have 1-6 digits"))

    for t_id, m_id in sorted(d.gold.matches):
        rec = f"match ({t_id}, {m_id})"
        t = transfers.get(t_id)
        m = members.get(m_id)
        if t is None:
            out.append(Violation(rec, "unknown transfer_id"))
        if m is None:
            out.append(Violation(rec, "unknown member_id"))
        if t is not None and m is not None and t.club_id != m.club_id:
            out.append(Violation(rec, "transfer and member belong to different clubs"))
    return out
