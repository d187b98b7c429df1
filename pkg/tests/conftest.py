import numpy as np
import pytest

from toeplitz_matvec.core import BlockVector, Layout
from toeplitz_matvec.pipeline import BlockColumn


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rel(x, ref):
    x = np.asarray(x).ravel()
    ref = np.asarray(ref).ravel()
    return np.linalg.norm(x - ref) / np.linalg.norm(ref)


def random_problem(rng, n_m, n_d, n_t):
    col = BlockColumn(rng.standard_normal((n_t, n_d, n_m)))
    m = BlockVector.from_space_time(rng.standard_normal((n_m, n_t)), Layout.SOTI)
    d = BlockVector.from_space_time(rng.standard_normal((n_d, n_t)), Layout.SOTI)
    return col, m, d


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
