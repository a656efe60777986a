import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remitmatch import textnorm
from remitmatch.textnorm import (
    declension_stems,
    extract_member_codes,
    fold,
    levenshtein,
    normalize,
    soft_match,
)


def dp_levenshtein(a, b):
    """Full-table dynamic programme, kept independent of the library version."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        table[i][0] = i
    for j in range(len(b) + 1):
        table[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            table[i][j] = min(table[i - 1][j] + 1, table[i][j - 1] + 1,
                              table[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return table[-1][-1]


@pytest.mark.parametrize("text, tokens", [
    ("Składka Jan KOWALSKI", ["skladka", "jan", "kowalski"]),
    ("", []),
    ("WK-0123,luty", ["wk", "0123", "luty"]),
    ("Łódź, ŻÓŁW źrebię", ["lodz", "zolw", "zrebie"]),
])
def test_normalize_examples(text, tokens):
    assert normalize(text) == tokens


@given(st.text(alphabet=string.ascii_letters + "ąćęłńóśźżĄĆĘŁŃÓŚŹŻ0123456789 -,._/", max_size=40))
def test_normalize_idempotent_and_clean(text):
    tokens = normalize(text)
    assert normalize(" ".join(tokens)) == tokens
    assert all(tok and tok.isalnum() and tok == tok.lower() for tok in tokens)


def test_fold_keeps_case():
    assert fold("Żółć") == "Zolc"


@pytest.mark.parametrize("a, b, d", [("abc", "abc", 0), ("", "nowak", 5), ("kowalski", "kowalsky", 1),
                                     ("kitten", "sitting", 3)])
def test_levenshtein_examples(a, b, d):
    assert levenshtein(a, b) == d


words = st.text(alphabet="abcde", max_size=20)


@settings(max_examples=300)
@given(words, words, words)
def test_levenshtein_metric_properties(a, b, c):
    assert levenshtein(a, b) == levenshtein(b, a) == dp_levenshtein(a, b)
    assert levenshtein(a, a) == 0
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


@pytest.mark.parametrize("a, b, expected", [("jan", "jan", True), ("kowalski", "kowalsky", True),
                                            ("jan", "ewa", False), ("nowak", "lis", False)])
def test_soft_match_examples(a, b, expected):
    assert soft_match(a, b, 0.2) is expected


@given(words, words, st.floats(0, 1))
def test_soft_match_definition(a, b, r):
    expected = a == b or levenshtein(a, b) <= int(r * max(len(a), len(b)))
    assert soft_match(a, b, r) is expected


def test_soft_match_rejects_bad_ratio():
    with pytest.raises(ValueError):
        soft_match("a", "b", 1.5)


def test_declension_stems_examples():
    assert declension_stems("jan") == {"jan"}
    assert declension_stems("jana") == {"jana", "jan"}
    assert "kowalski" in declension_stems("kowalskiego")
    assert "kowalsk" in declension_stems("kowalska")


def test_declension_stems_custom_suffixes():
    assert declension_stems("nowakowi", ["owi"]) == {"nowakowi", "nowak"}


@pytest.mark.parametrize("title, expected", [
    ("WK-0123 skladka", [("WK", "0123", True)]),
    ("wk 0123", [("WK", "0123", False)]),
    ("przelew za luty", []),
    ("WK0123", [("WK", "0123", False)]),
    ("WK - 0123", [("WK", "0123", False)]),
    ("wk-0123", [("WK", "0123", False)]),
    ("AB-1 i CD-22", [("AB", "1", True), ("CD", "22", True)]),
    ("KOWALSKI 2020", []),
])
def test_extract_member_codes(title, expected):
    got = [(c.club_part, c.number_part, c.well_formed) for c in extract_member_codes(title)]
    assert got == expected


@given(st.text(max_size=60))
def test_extracted_numbers_are_digits(title):
    for c in extract_member_codes(title):
        assert c.number_part.isdigit() and c.number_part.isascii()
        assert len(c.club_part) == 2


def test_config_directory_override(tmp_path, monkeypatch):
    (tmp_path / "suffixes.txt").write_text("ski\n", encoding="utf-8")
    monkeypatch.setenv(textnorm.CONFIG_DIR_ENV, str(tmp_path))
    assert textnorm.load_suffixes() == ("ski",)
    monkeypatch.delenv(textnorm.CONFIG_DIR_ENV)
    assert "owi" in textnorm.load_suffixes()


def test_folding_table_from_file(tmp_path):
    path = tmp_path / "fold.txt"
    path.write_text("# comment\nä a\n", encoding="utf-8")
    assert textnorm.load_folding_table(path) == {"ä": "a"}
