import numpy as np
import pytest

from lpvi import Box
from lpvi.mappings import Affine, ResidualOfContraction, ScaledIdentity

P_VALUES = (1.5, 2.0, 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_square():
    return Box([0.0, 0.0], [1.0, 1.0])


def constant_target(a):
    """B(x) = x - a, i.e. I - T with T the constant map a."""
    return ResidualOfContraction(Affine.constant(a), 0.0)


def scaled_target(a, s=0.1):
    """B(x) = s (x - a); with lam = 4.5, I - lam B contracts by 1 - 4.5 s."""
    a = np.asarray(a, dtype=float)
    return Affine(s * np.eye(a.size), -s * a)


def box_grid(lo, hi, h):
    axes = [np.linspace(a, b, int(round((b - a) / h)) + 1) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Store (passed, detail) for an acceptance criterion; the terminal
    summary prints one line per criterion."""
    table = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, title, passed, detail):
        table[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_CRITERIA, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        title, passed, detail = table[number]
        terminalreporter.write_line(f"AC{number} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
