import sys
from datetime import date

import pytest

from remitmatch.core import Dataset, MatchSet, Member, Transfer
from remitmatch.featgen import build_pairs
from remitmatch.synthgen import GenConfig, generate


def make_transfer(tid, club="WK", title="", sender="", address="", amount=1000):
    return Transfer(tid, club, sender, address, title, date(2020, 1, 15), amount)


def make_member(mid, code, first, surname, guardian=None, address=None):
    return Member(mid, code.split("-")[0], code, first, surname, guardian, address)


@pytest.fixture
def tiny_dataset():
    members = (
        make_member("M1", "WK-0012", "Jan", "Kowalski", "Anna Kowalska", "ul. Lipowa 3, 00-950 Warszawa"),
        make_member("M2", "WK-0013", "Ola", "Kowalska", "Anna Kowalska", "ul. Lipowa 3, 00-950 Warszawa"),
        make_member("M3", "WK-0200", "Piotr", "Nowak"),
    )
    transfers = (
        make_transfer("T1", title="WK-0012 Jan Kowalski", sender="Anna Kowalska"),
        make_transfer("T2", title="skladka za Piotra", sender="Piotr Nowak"),
        make_transfer("T3", title="Jan i Ola Kowalscy oboz", sender="ANNA KOWALSKA",
                      address="ul. Lipowa 3 Warszawa"),
    )
    gold = MatchSet([("T1", "M1"), ("T2", "M3"), ("T3", "M1"), ("T3", "M2")])
    return Dataset(transfers, members, gold)


SMALL_CONFIG = GenConfig(n_clubs=3, n_transfers=900, transfers_per_club_cap=150, members_per_club=(25, 60),
                         multi_member_rate=0.1, seed=11)


@pytest.fixture(scope="session")
def small_generated():
    return generate(SMALL_CONFIG)


@pytest.fixture(scope="session")
def small_pairs(small_generated):
    return build_pairs(small_generated[0])


def pytest_terminal_summary(terminalreporter):
    accept = sys.modules.get("test_acceptance")
    lines = getattr(accept, "ACCEPT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
