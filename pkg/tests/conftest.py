import numpy as np
import pytest

from trailbayes.hypothesis import HypothesisMatrix

STATES = "ABCDE"

# Geographic beliefs between five restaurants; 1.0 for the two nearest
# pairs, then 0.9 and 0.7. Weight total 7.2.
GEO_PAIRS = {("A", "B"): 0.7, ("A", "C"): 0.9, ("B", "C"): 1.0, ("D", "E"): 1.0}


def geo_toy_dense():
    idx = {s: i for i, s in enumerate(STATES)}
    q = np.zeros((5, 5))
    for (a, b), v in GEO_PAIRS.items():
        q[idx[a], idx[b]] = q[idx[b], idx[a]] = v
    return q


@pytest.fixture
def geo_toy():
    return HypothesisMatrix.from_dense(geo_toy_dense())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
