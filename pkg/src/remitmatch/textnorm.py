"""Text normalization and string-similarity primitives.

Everything here is pure.  The diacritic folding table and the inflection
suffix list are plain-text resources (one entry per line, UTF-8); a
directory named by ``REMITMATCH_CONFIG_DIR`` takes precedence over the
bundled copies.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

CONFIG_DIR_ENV = "REMITMATCH_CONFIG_DIR"
DEFAULT_MAX_REL = 0.2
MIN_STEM_LEN = 3

_TOKEN_RE = re.compile(r"[^\W_]+")
# two letters, optional separator, 1-6 digits; not glued to other alphanumerics
_CODE_RE = re.compile(r"(?<![^\W_])([A-Za-z]{2})(\s*-\s*|\s+|)(\d{1,6})(?!\d)")


def read_resource(name: str) -> str:
    """Text of a config resource, honouring the config-directory override."""
    override = os.environ.get(CONFIG_DIR_ENV)
    if override:
        path = Path(override) / name
        if path.is_file():
            return path.read_text(encoding="utf-8")
    return resources.files("remitmatch.resources").joinpath(name).read_text(encoding="utf-8")


def _lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def load_folding_table(path: Optional[os.PathLike] = None) -> dict[str, str]:
    """Parse ``"ą a"`` lines into a character map."""
    text = Path(path).read_text(encoding="utf-8") if path else read_resource("folding.txt")
    table = {}
    for line in _lines(text):
        src, dst = line.split()
        table[src] = dst
    return table


def load_suffixes(path: Optional[os.PathLike] = None) -> tuple[str, ...]:
    text = Path(path).read_text(encoding="utf-8") if path else read_resource("suffixes.txt")
    return tuple(_lines(text))


@lru_cache(maxsize=None)
def _default_translation() -> dict[int, str]:
    table = load_folding_table()
    return str.maketrans({k: v for k, v in table.items()} | {k.upper(): v.upper() for k, v in table.items()})


@lru_cache(maxsize=None)
def _default_suffixes() -> tuple[str, ...]:
    return tuple(sorted({fold(s) for s in load_suffixes()}, key=lambda s: (-len(s), s)))


def fold(text: str) -> str:
    """Map Polish diacritics to their Latin counterparts, keeping case."""
    return text.translate(_default_translation())


def normalize(text: str) -> list[str]:
    """Lowercase, fold diacritics and split on runs of non-alphanumerics.

    >>> normalize("Składka Jan KOWALSKI")
    ['skladka', 'jan', 'kowalski']
    """
    return _TOKEN_RE.findall(fold(text.lower()))


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def soft_match(a: str, b: str, max_rel: float = DEFAULT_MAX_REL) -> bool:
    """True iff ``levenshtein(a, b) <= floor(max_rel * max(len(a), len(b)))``."""
    if not 0.0 <= max_rel <= 1.0:
        raise ValueError(f"max_rel must lie in [0, 1], got {max_rel}")
    if a == b:
        return True
    limit = int(max_rel * max(len(a), len(b)))
    if abs(len(a) - len(b)) > limit:
        return False
    return levenshtein(a, b) <= limit


def declension_stems(name: str, suffixes: Optional[Iterable[str]] = None) -> frozenset[str]:
    """The name itself plus every stem left after stripping one inflection suffix.

    Stems shorter than three characters are discarded, so short names such as
    ``"jan"`` only ever stem to themselves.
    """
    sfx = _default_suffixes() if suffixes is None else tuple(fold(s) for s in suffixes)
    return _stems(name, sfx)


@lru_cache(maxsize=200_000)
def _stems(name: str, suffixes: tuple[str, ...]) -> frozenset[str]:
    out = {name}
    for s in suffixes:
        if name.endswith(s) and len(name) - len(s) >= MIN_STEM_LEN:
            out.add(name[: -len(s)])
    return frozenset(out)


@dataclass(frozen=True)
class CodeCandidate:
    club_part: str
    number_part: str
    well_formed: bool

    @property
    def key(self) -> tuple[str, int]:
        """Club and numeric value, the identity used for sloppy comparisons."""
        return self.club_part, int(self.number_part)


def extract_member_codes(title: str) -> list[CodeCandidate]:
    """Member-code candidates in a raw title, in order of appearance.

    Only the exact ``AA-BBBB`` shape (upper-case letters, a bare hyphen) is
    well formed; lower-case letters, a missing hyphen or spaces around it give
    a malformed candidate.
    """
    out = []
    for m in _CODE_RE.finditer(title):
        letters, sep, digits = m.groups()
        well = sep == "-" and letters.isupper()
        out.append(CodeCandidate(letters.upper(), digits, well))
    return out
