import math

import pytest

from sitnikov.bounds import continuation_constants
from sitnikov.circular import build_catalog, find_branch_roots
from sitnikov.dynamics import OrbitConfig
from sitnikov.stability import HillContext

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def cfg1():
    return OrbitConfig(N=1)


@pytest.fixture(scope="session")
def roots1():
    return find_branch_roots(1)


@pytest.fixture(scope="session")
def roots3():
    return find_branch_roots(3)


@pytest.fixture(scope="session")
def catalog1():
    """N = 1 catalog with the refined envelope supremum."""
    return build_catalog(1)


@pytest.fixture(scope="session")
def ledgers1(catalog1):
    return {p: continuation_constants(catalog1, p) for p in (1, 2)}


@pytest.fixture(scope="session")
def hill1(roots1):
    return {p: HillContext(roots1, p) for p in (1, 2)}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rel(a, b):
    return abs(a - b) / abs(b)


SQRT8 = 2.0 * math.sqrt(2.0)
