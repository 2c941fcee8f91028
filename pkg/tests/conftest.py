import numpy as np
import pytest
from hypothesis import settings

from qdecon.states import (
    ghz,
    maximally_entangled,
    maximally_mixed,
    random_markov_state,
    tensor,
)

settings.register_profile("qdecon", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("qdecon")


@pytest.fixture
def ghz3():
    return ghz(3)


@pytest.fixture
def phi_pi():
    return tensor(maximally_entangled(2, ("A", "B")), maximally_mixed(2, "E"))


@pytest.fixture
def markov():
    return random_markov_state(2, 2, [(1, 2), (2, 1)], seed=7)


def ginibre(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def random_hermitian(rng, n):
    g = ginibre(rng, n)
    return (g + g.conj().T) / 2


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
