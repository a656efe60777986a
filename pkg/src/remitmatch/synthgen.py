"""Seeded synthetic corpus of club members and their bank transfers.

Clubs are generated with skewed transfer volumes and then balanced by
sampling at most ``transfers_per_club_cap`` transfers per club.  Large clubs
get a higher share of titles carrying a member code, so the code share
before balancing (``id_rate``) is higher than after it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import date, timedelta
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import Dataset, MatchSet, Member, Transfer
from .featgen import featurize
from .textnorm import extract_member_codes, fold, normalize, read_resource, soft_match

START_DATE = date(2018, 2, 5)
END_DATE = date(2020, 9, 10)
CODE_ERROR_VARIANTS = ("nohyphen", "spaces", "space", "lower")
UNMATCHED_TITLES = ("darowizna", "darowizna na klub", "wsparcie klubu", "datek")
_TYPO_LETTERS = "abcdefghijklmnoprstuwyz"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class GenConfig:
    n_clubs: int = 7
    n_transfers: int = 19000
    transfers_per_club_cap: Optional[int] = 500
    club_size_skew: float = 25.0
    id_rate: float = 0.65
    # logit slope of the per-club code share against standardized club-size rank
    id_size_slope: float = 1.1
    id_error_rate: float = 0.04
    wrong_id_rate: float = 0.02
    multi_member_rate: float = 0.05
    name_in_title_rate: float = 0.71
    surname_in_title_rate: float = 0.70
    description_rate: float = 0.68
    typo_rate: float = 0.05
    members_per_club: tuple[int, int] = (60, 250)
    minor_share: float = 0.7
    guardian_pays_rate: float = 0.85
    guardian_in_title_rate: float = 0.1
    sender_address_rate: float = 0.75
    # share of payments made by someone outside the family (grandparent, employer, ...)
    third_party_sender_rate: float = 0.15
    # share of guardians who do not carry the family surname
    guardian_other_surname_rate: float = 0.2
    # popularity skew of first names and surnames (0 = uniform pools)
    name_zipf_exponent: float = 0.9
    include_unmatched: bool = False
    unmatched_rate: float = 0.05
    seed: int = 0

    RATE_FIELDS = ("id_rate", "id_error_rate", "wrong_id_rate", "multi_member_rate", "name_in_title_rate",
                   "surname_in_title_rate", "description_rate", "typo_rate", "minor_share", "guardian_pays_rate",
                   "guardian_in_title_rate", "sender_address_rate", "unmatched_rate",
                   "third_party_sender_rate", "guardian_other_surname_rate")

    def __post_init__(self):
        object.__setattr__(self, "members_per_club", tuple(self.members_per_club))
        self.validate()

    def validate(self) -> None:
        for name in self.RATE_FIELDS:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                raise ConfigError(name, f"rate must lie in [0, 1], got {v!r}")
        for name in ("n_clubs", "n_transfers", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < (0 if name == "seed" else 1):
                raise ConfigError(name, f"expected a positive integer, got {v!r}")
        cap = self.transfers_per_club_cap
        if cap is not None and (isinstance(cap, bool) or not isinstance(cap, int) or cap < 1):
            raise ConfigError("transfers_per_club_cap", f"cap must be >= 1, got {cap!r}")
        if not self.name_zipf_exponent >= 0.0:
            raise ConfigError("name_zipf_exponent", "exponent must be >= 0")
        if not self.club_size_skew >= 1.0:
            raise ConfigError("club_size_skew", "skew must be >= 1")
        lo, hi = self.members_per_club
        if not 1 <= lo <= hi:
            raise ConfigError("members_per_club", f"need 1 <= low <= high, got {self.members_per_club!r}")
        if hi > 9999:
            raise ConfigError("members_per_club", "member numbers are four digits")

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration field")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["members_per_club"] = list(self.members_per_club)
        return d


# --------------------------------------------------------------------------- resources


@dataclass(frozen=True)
class _Pools:
    male: tuple
    female: tuple
    forms: dict
    surnames: tuple
    streets: tuple
    cities: tuple
    descriptions: tuple
    months: tuple
    templates: tuple
    template_weights: np.ndarray = field(compare=False)


def _rows(name: str) -> list[str]:
    return [ln.strip() for ln in read_resource(name).splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def load_pools() -> _Pools:
    male, female, forms = [], [], {}
    for row in _rows("first_names.txt"):
        name, gender, rest = row.split("|")
        (male if gender == "m" else female).append(name)
        forms[name] = tuple(f for f in rest.split(",") if f)
    templates, weights = [], []
    for row in _rows("templates.txt"):
        w, t = row.split("|", 1)
        templates.append(t)
        weights.append(float(w))
    weights = np.array(weights)
    return _Pools(
        tuple(male), tuple(female), forms,
        tuple(dict.fromkeys(_rows("surnames.txt"))),
        tuple(_rows("streets.txt")),
        tuple(tuple(r.split("|")) for r in _rows("cities.txt")),
        tuple(_rows("descriptions.txt")),
        tuple(_rows("months.txt")),
        tuple(templates), weights / weights.sum(),
    )


@lru_cache(maxsize=None)
def description_vocabulary() -> frozenset[str]:
    """Normalized tokens that mark a title as carrying a description."""
    pools = load_pools()
    vocab = set()
    for phrase in pools.descriptions:
        vocab |= {t for t in normalize(phrase) if len(t) >= 4}
    return frozenset(vocab)


# --------------------------------------------------------------------------- morphology


def gendered_surname(surname: str, gender: str) -> str:
    if gender == "f":
        for m, f in (("ski", "ska"), ("cki", "cka"), ("dzki", "dzka")):
            if surname.endswith(m):
                return surname[: -len(m)] + f
    return surname


def surname_forms(surname: str, gender: str) -> tuple[str, ...]:
    """Inflected forms of a gendered surname, aligned with the first-name forms of the pools.

    Masculine: genitive, dative, instrumental.  Feminine: genitive, accusative.
    Empty when the surname does not decline.
    """
    s = surname
    if s.endswith(("ski", "cki", "dzki")):
        return (s[:-1] + "iego", s[:-1] + "iemu", s + "m")
    if s.endswith(("ska", "cka", "dzka")):
        return (s[:-1] + "iej", s[:-1] + "ą")
    if gender == "f" or s[-1] in "aeiouyąę":
        return ()
    if s.endswith("ek"):
        return (s[:-2] + "ka", s[:-2] + "kowi", s[:-2] + "kiem")
    if s.endswith("ec"):
        return (s[:-2] + "ca", s[:-2] + "cowi", s[:-2] + "cem")
    return (s + "a", s + "owi", s + "em")


# --------------------------------------------------------------------------- club structure


def club_volumes(c: GenConfig) -> tuple[np.ndarray, np.ndarray]:
    """Transfers per club before and after balancing, smallest club first."""
    n = c.n_clubs
    w = c.club_size_skew ** (np.arange(n) / max(n - 1, 1))
    raw = c.n_transfers * w / w.sum()
    counts = np.floor(raw).astype(np.int64)
    # largest remainder keeps the total exact
    short = c.n_transfers - counts.sum()
    counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
    kept = counts if c.transfers_per_club_cap is None else np.minimum(counts, c.transfers_per_club_cap)
    return counts, kept


def club_id_rates(c: GenConfig) -> np.ndarray:
    """Per-club probability that a matched transfer's title carries a code.

    Logistic in the standardized club-size rank, shifted so that the
    volume-weighted mean before balancing equals ``id_rate``.
    """
    n = c.n_clubs
    if c.id_rate in (0.0, 1.0) or n == 1 or c.id_size_slope == 0:
        return np.full(n, float(c.id_rate))
    counts, _ = club_volumes(c)
    z = np.arange(n) - (n - 1) / 2
    z = z / z.std()
    w = counts / counts.sum()

    def excess(shift):
        return float(w @ (1.0 / (1.0 + np.exp(-(shift + c.id_size_slope * z))))) - c.id_rate

    shift = brentq(excess, -50.0, 50.0, xtol=1e-14)
    return 1.0 / (1.0 + np.exp(-(shift + c.id_size_slope * z)))


def expected_id_rate(c: GenConfig) -> float:
    _, kept = club_volumes(c)
    return float(club_id_rates(c) @ kept / kept.sum())


def _club_codes(rng, n: int) -> list[str]:
    letters = "ABCDEGHIKLMNOPRSTWZ"
    combos = [a + b for a in letters for b in letters if a != b]
    idx = rng.choice(len(combos), size=n, replace=False)
    return [combos[i] for i in idx]


@dataclass
class _Family:
    surname: str
    address: str
    guardian: Optional[tuple[str, str, str]]  # first, surname, gender
    members: list = field(default_factory=list)  # indices into club member list


@dataclass
class _Person:
    member: Member
    gender: str
    family: int


class _NameSampler:
    """Popularity-weighted draws: the i-th most popular name has weight 1 / (i + 1) ** exponent.

    Surnames are ranked by their order in the pool file; first-name popularity
    ranks are a seeded permutation of the pool.
    """

    def __init__(self, rng, pools: _Pools, exponent: float):
        self.rng = rng
        self.pools = {"m": pools.male, "f": pools.female, "s": pools.surnames}
        self.weights = {}
        for key, pool in self.pools.items():
            w = 1.0 / (np.arange(len(pool)) + 1.0) ** exponent
            if key != "s":
                w = w[rng.permutation(len(pool))]
            self.weights[key] = np.cumsum(w) / w.sum()

    def draw(self, key: str) -> str:
        cdf = self.weights[key]
        i = min(int(np.searchsorted(cdf, self.rng.random(), side="right")), len(cdf) - 1)
        return self.pools[key][i]


def _build_club(rng, pools: _Pools, names: "_NameSampler", club: str, n_members: int, c: GenConfig,
                first_id: int):
    people: list[_Person] = []
    families: list[_Family] = []
    numbers = rng.choice(np.arange(1, 10000), size=n_members, replace=False)
    home = int(rng.integers(len(pools.cities)))
    while len(people) < n_members:
        size = int(min(rng.choice([1, 2, 3], p=[0.6, 0.3, 0.1]), n_members - len(people)))
        base_surname = names.draw("s")
        city, postal = pools.cities[home if rng.random() < 0.7 else int(rng.integers(len(pools.cities)))]
        street = pools.streets[int(rng.integers(len(pools.streets)))]
        address = f"ul. {street} {int(rng.integers(1, 150))}, {postal}-{int(rng.integers(100, 1000))} {city}"
        minors = rng.random() < c.minor_share
        guardian = None
        if minors:
            g_gender = "f" if rng.random() < 0.7 else "m"
            g_surname = names.draw("s") if rng.random() < c.guardian_other_surname_rate else base_surname
            guardian = (names.draw(g_gender), gendered_surname(g_surname, g_gender), g_gender)
        fam = _Family(base_surname, address, guardian)
        used = set()
        for _ in range(size):
            gender = "f" if rng.random() < 0.45 else "m"
            first = names.draw(gender)
            while first in used:
                first = names.draw(gender)
            used.add(first)
            k = len(people)
            m = Member(
                member_id=f"M{first_id + k:06d}",
                club_id=club,
                member_code=f"{club}-{int(numbers[k]):04d}",
                first_name=first,
                surname=gendered_surname(base_surname, gender),
                guardian_name=f"{guardian[0]} {guardian[1]}" if guardian else None,
                address=address,
            )
            fam.members.append(k)
            people.append(_Person(m, gender, len(families)))
        families.append(fam)
    return people, families


# --------------------------------------------------------------------------- titles


def _malform(code: str, variant: str) -> list[str]:
    club, number = code.split("-")
    if variant == "nohyphen":
        return [club + number]
    if variant == "spaces":
        return [club, "-", number]
    if variant == "space":
        return [club, number]
    return [code.lower()]


def _typo(rng, token: str) -> str:
    if rng.random() < 0.3:
        return fold(token)
    chars = list(token)
    op = int(rng.integers(4))
    i = int(rng.integers(len(chars)))
    letter = _TYPO_LETTERS[int(rng.integers(len(_TYPO_LETTERS)))]
    if op == 0:
        chars[i] = letter
    elif op == 1 and len(chars) > 3:
        del chars[i]
    elif op == 2:
        chars.insert(i, letter)
    elif len(chars) > 1:
        j = min(i, len(chars) - 2)
        chars[j], chars[j + 1] = chars[j + 1], chars[j]
    return "".join(chars)


def _inflect(rng, nominative: str, forms: tuple, case: int) -> str:
    """``case`` 0 is the nominative; 1.. index the form list, saturating at its end."""
    if case == 0 or not forms:
        return nominative
    return forms[min(case, len(forms)) - 1]


class _TitleBuilder:
    """Assembles a title as (token, is_code) pieces so typos never touch codes."""

    def __init__(self, rng, pools: _Pools, c: GenConfig):
        self.rng, self.pools, self.c = rng, pools, c

    def names_part(self, gold: list[_Person], fam: _Family, with_name: bool, with_surname: bool) -> list[str]:
        rng, pools = self.rng, self.pools
        case = 0 if rng.random() < 0.55 else int(rng.integers(1, 4))
        out: list[str] = []
        if with_name and fam.guardian and rng.random() < self.c.guardian_in_title_rate:
            g_first, g_surname, g_gender = fam.guardian
            out += ["od", g_first] + ([g_surname] if with_surname else [])
        shared = len({p.member.surname for p in gold}) == 1
        surname_first = rng.random() < 0.3
        for i, p in enumerate(gold):
            first = _inflect(rng, p.member.first_name, pools.forms.get(p.member.first_name, ()), case)
            sur = _inflect(rng, p.member.surname, surname_forms(p.member.surname, p.gender), case)
            show_sur = with_surname and (not shared or i == len(gold) - 1)
            piece = []
            if with_name:
                piece.append(first)
            if show_sur:
                piece = [sur] + piece if surname_first else piece + [sur]
            if i and piece and with_name:
                out.append("i")
            out += piece
        return out

    def desc_part(self) -> list[str]:
        rng, pools = self.rng, self.pools
        words = pools.descriptions[int(rng.integers(len(pools.descriptions)))].split()
        if rng.random() < 0.5:
            words.append(pools.months[int(rng.integers(len(pools.months)))])
        return words

    def assemble(self, code: list[str], names: list[str], desc: list[str]) -> str:
        rng, c = self.rng, self.c
        template = self.pools.templates[int(rng.choice(len(self.pools.templates), p=self.pools.template_weights))]
        parts = {"{code}": [(t, True) for t in code], "{names}": [(t, False) for t in names],
                 "{desc}": [(t, False) for t in desc]}
        pieces: list[tuple[str, bool]] = []
        for slot in template.split():
            pieces += parts.get(slot, [(slot, False)])
        upper = rng.random() < 0.15
        out = []
        for tok, is_code in pieces:
            if not is_code:
                if rng.random() < c.typo_rate:
                    tok = _typo(rng, tok)
                if upper:
                    tok = tok.upper()
            out.append(tok)
        return " ".join(out)


def _sender(rng, names: _NameSampler, p: _Person, fam: _Family, c: GenConfig) -> tuple[str, str]:
    if rng.random() < c.third_party_sender_rate:
        gender = "f" if rng.random() < 0.5 else "m"
        first, surname = names.draw(gender), gendered_surname(names.draw("s"), gender)
        name = f"{surname} {first}".upper() if rng.random() < 0.4 else f"{first} {surname}"
        return name, ""
    if fam.guardian and rng.random() < c.guardian_pays_rate:
        first, surname = fam.guardian[0], fam.guardian[1]
    else:
        first, surname = p.member.first_name, p.member.surname
    name = f"{surname} {first}".upper() if rng.random() < 0.4 else f"{first} {surname}"
    if rng.random() < 0.3:
        name = fold(name)
    address = ""
    if rng.random() < c.sender_address_rate:
        street_line, rest = fam.address.split(", ", 1)
        style = rng.random()
        if style < 0.4:
            address = fam.address
        elif style < 0.7:
            address = f"{street_line} {rest.split(' ', 1)[1]}".upper()
        else:
            address = street_line
    return name, address


# --------------------------------------------------------------------------- generation


def generate(c: GenConfig = GenConfig()) -> tuple[Dataset, "GenReport"]:
    """Generate a dataset and the statistics realized by it."""
    c.validate()
    rng = np.random.default_rng(c.seed)
    pools = load_pools()
    counts, kept = club_volumes(c)
    id_rates = club_id_rates(c)
    clubs = _club_codes(rng, c.n_clubs)
    names = _NameSampler(rng, pools, c.name_zipf_exponent)
    lo, hi = c.members_per_club
    sizes = np.rint(lo + (hi - lo) * np.arange(c.n_clubs) / max(c.n_clubs - 1, 1)).astype(int)
    if c.multi_member_rate > 0 and sizes.max() < 2:
        raise ConfigError("members_per_club", "multi-member transfers need clubs with at least two members")

    members: list[Member] = []
    transfers: list[Transfer] = []
    gold: list[tuple[str, str]] = []
    builder = _TitleBuilder(rng, pools, c)
    n_days = (END_DATE - START_DATE).days
    next_transfer = 0
    for ci, club in enumerate(clubs):
        people, families = _build_club(rng, pools, names, club, int(sizes[ci]), c, len(members))
        members += [p.member for p in people]
        multi_families = [f for f in families if len(f.members) >= 2]
        if c.multi_member_rate > 0 and not multi_families:
            raise ConfigError("multi_member_rate", f"club {club} has no family with two or more members")
        club_transfers, club_gold = [], []
        for _ in range(int(counts[ci])):
            tid = f"T{next_transfer:07d}"
            next_transfer += 1
            when = START_DATE + timedelta(days=int(rng.integers(n_days + 1)))
            if c.include_unmatched and rng.random() < c.unmatched_rate:
                g = pools.female if rng.random() < 0.5 else pools.male
                sender = f"{g[int(rng.integers(len(g)))]} {pools.surnames[int(rng.integers(len(pools.surnames)))]}"
                title = UNMATCHED_TITLES[int(rng.integers(len(UNMATCHED_TITLES)))]
                club_transfers.append(Transfer(tid, club, sender, "", title, when, int(rng.integers(10, 500)) * 100))
                club_gold.append([])
                continue
            if rng.random() < c.multi_member_rate:
                fam = multi_families[int(rng.integers(len(multi_families)))]
                k = int(min(rng.choice([2, 3], p=[0.8, 0.2]), len(fam.members)))
                chosen = sorted(rng.choice(fam.members, size=k, replace=False).tolist())
            else:
                chosen = [int(rng.integers(len(people)))]
                fam = families[people[chosen[0]].family]
            gold_people = [people[i] for i in chosen]

            code: list[str] = []
            if rng.random() < id_rates[ci]:
                codes = [p.member.member_code for p in gold_people]
                if rng.random() < c.wrong_id_rate:
                    others = [i for i in fam.members if i not in chosen] or \
                             [i for i in range(len(people)) if i not in chosen]
                    if others:
                        codes[0] = people[others[int(rng.integers(len(others)))]].member.member_code
                variant = CODE_ERROR_VARIANTS[int(rng.integers(4))] if rng.random() < c.id_error_rate else None
                for cd in codes:
                    code += [cd] if variant is None else _malform(cd, variant)
            with_name = rng.random() < c.name_in_title_rate
            with_surname = rng.random() < c.surname_in_title_rate
            name_tokens = builder.names_part(gold_people, fam, with_name, with_surname) if (with_name or with_surname) else []
            desc = builder.desc_part() if rng.random() < c.description_rate else []
            title = builder.assemble(code, name_tokens, desc)
            sender_name, sender_address = _sender(rng, names, gold_people[0], fam, c)
            amount = int(rng.integers(50, 300)) * 100 * len(gold_people)
            club_transfers.append(Transfer(tid, club, sender_name, sender_address, title, when, amount))
            club_gold.append([p.member.member_id for p in gold_people])

        keep = np.arange(len(club_transfers))
        if len(keep) > kept[ci]:
            keep = np.sort(rng.choice(len(club_transfers), size=int(kept[ci]), replace=False))
        for i in keep:
            t = club_transfers[i]
            transfers.append(t)
            gold += [(t.transfer_id, m) for m in club_gold[i]]

    d = Dataset(tuple(transfers), tuple(members), MatchSet(gold))
    return d, validate_stats(d, c)


# --------------------------------------------------------------------------- statistics


@dataclass(frozen=True)
class StatRow:
    statistic: str
    expected: Optional[float]
    realized: Optional[float]
    count: int
    total: int
    tolerance: Optional[float]

    @property
    def passed(self) -> Optional[bool]:
        if self.expected is None or self.realized is None or self.tolerance is None:
            return None
        return abs(self.realized - self.expected) <= self.tolerance + 1e-12


@dataclass
class GenReport:
    rows: list[StatRow]

    def __getitem__(self, statistic: str) -> StatRow:
        for r in self.rows:
            if r.statistic == statistic:
                return r
        raise KeyError(statistic)

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "expected", "realized", "count", "total", "tolerance", "pass"])
        for r in self.rows:
            w.writerow([r.statistic, _f(r.expected), _f(r.realized), r.count, r.total, _f(r.tolerance),
                        "NA" if r.passed is None else str(r.passed).lower()])
        return buf.getvalue()


def _f(v) -> str:
    return "NA" if v is None else f"{v:.6f}"


# base tolerances; widened to three binomial standard errors on small samples
BASE_TOLERANCE = {
    "id_rate": 0.02,
    "id_error_rate": 0.01,
    "multi_member_rate": 0.01,
    "name_in_title_rate": 0.03,
    "surname_in_title_rate": 0.03,
    "description_rate": 0.03,
}


def _row(name: str, expected: float, count: int, total: int) -> StatRow:
    if total == 0:
        return StatRow(name, expected, None, 0, 0, None)
    se = math.sqrt(max(expected * (1 - expected), 0.0) / total)
    return StatRow(name, expected, count / total, count, total, max(BASE_TOLERANCE[name], 3 * se))


def _mentions(stems_of_name, title_tokens) -> bool:
    for tok in title_tokens:
        for cand in stems_of_name:
            if soft_match(tok, cand):
                return True
    return False


def validate_stats(d: Dataset, c: GenConfig = GenConfig()) -> GenReport:
    """Recompute the configured statistics from the dataset alone and compare."""
    members = {m.member_id: m for m in d.members}
    gold = d.gold_by_transfer()
    matched = [t for t in d.transfers if gold.get(t.transfer_id)]
    vocab = description_vocabulary()

    n_id = n_bad = n_multi = n_name = n_surname = n_desc = 0
    for t in matched:
        codes = extract_member_codes(t.title)
        if codes:
            n_id += 1
            if not any(cd.well_formed for cd in codes):
                n_bad += 1
        gm = [members[m] for m in gold[t.transfer_id] if m in members]
        if len(gm) > 1:
            n_multi += 1
        feats = [featurize(t, m) for m in gm if m.club_id == t.club_id]
        if any(f.name_in_title or f.name_soft_title for f in feats):
            n_name += 1
        if any(f.surname_in_title or f.surname_soft_title for f in feats):
            n_surname += 1
        if any(_mentions((v,), normalize(t.title)) for v in vocab):
            n_desc += 1

    n = len(matched)
    return GenReport([
        _row("id_rate", expected_id_rate(c), n_id, n),
        _row("id_error_rate", c.id_error_rate, n_bad, n_id),
        _row("multi_member_rate", c.multi_member_rate, n_multi, n),
        _row("name_in_title_rate", c.name_in_title_rate, n_name, n),
        _row("surname_in_title_rate", c.surname_in_title_rate, n_surname, n),
        _row("description_rate", c.description_rate, n_desc, n),
    ])
