"""Shared fixtures: number fields, reference configurations, acceptance summary."""

import pytest
from hypothesis import HealthCheck, settings

from gridgas.exactfield import NumberField
from gridgas.gridalg import Grid, canonical_presentation

settings.register_profile(
    "gridgas",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("gridgas")

# One pass/fail line per acceptance criterion, appended by
# tests/test_acceptance.py and echoed after the pytest summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def F1():
    """The rationals, presented as a degree-1 field (alpha = 0)."""
    return NumberField([0, 1], (-1, 1))


@pytest.fixture(scope="session")
def F2():
    """Q(sqrt(2))."""
    return NumberField([-2, 0, 1], (1, 2))


def identity_matrix(field):
    one, zero = field.one(), field.zero()
    return ((one, zero), (zero, one))


def skew_matrix(field):
    """The unimodular matrix ((1, sqrt2), (1, 1 + sqrt2)).

    Incommensurable with the identity: the ratio matrix has both
    rational and irrational entries, so no scalar multiple is rational.
    """
    one = field.one()
    r2 = field.alpha()
    return ((one, r2), (one, one + r2))


@pytest.fixture(scope="session")
def z2(F1):
    """The square lattice Z^2, the one-scatterer-per-cell baseline."""
    g = Grid(F1, F1.one(), (F1.zero(), F1.zero()), identity_matrix(F1))
    return canonical_presentation([g])


@pytest.fixture(scope="session")
def z2m2(F2):
    """Z^2 together with Z^2 M2: two incommensurable classes, one grid each."""
    one, zero = F2.one(), F2.zero()
    g1 = Grid(F2, one, (zero, zero), identity_matrix(F2))
    g2 = Grid(F2, one, (zero, zero), skew_matrix(F2))
    return canonical_presentation([g1, g2])


@pytest.fixture(scope="session")
def union3(F2):
    """Z^2, Z^2 + (0, sqrt2), and Z^2 M2: two classes of sizes 2 and 1."""
    one, zero = F2.one(), F2.zero()
    r2 = F2.alpha()
    ident = identity_matrix(F2)
    g1 = Grid(F2, one, (zero, zero), ident)
    g2 = Grid(F2, one, (zero, r2), ident)
    g3 = Grid(F2, one, (zero, zero), skew_matrix(F2))
    return canonical_presentation([g1, g2, g3])


@pytest.fixture(scope="session")
def adm_pair(F2):
    """Z^2 union (2Z^2 + (sqrt2, 0)): admissible, one class of two members."""
    one, zero, two = F2.one(), F2.zero(), F2.rational(2)
    r2 = F2.alpha()
    half = F2.rational(1) / two
    ident = identity_matrix(F2)
    g1 = Grid(F2, one, (zero, zero), ident)
    g2 = Grid(F2, two, (r2 * half, zero), ident)
    return canonical_presentation([g1, g2])


@pytest.fixture(scope="session")
def inadm_pair(F2):
    """Z^2 union (2Z^2 + (1/2, 0)): rational offset, not admissible."""
    from fractions import Fraction

    one, zero, two = F2.one(), F2.zero(), F2.rational(2)
    ident = identity_matrix(F2)
    g1 = Grid(F2, one, (zero, zero), ident)
    g2 = Grid(F2, two, (F2.rational(Fraction(1, 4)), zero), ident)
    return canonical_presentation([g1, g2])
