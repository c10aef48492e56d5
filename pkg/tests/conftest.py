import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from simcf import RatingMatrix
from simcf.ratings import MOVIELENS_100K_SHAPE, load_ratings

from oracles import Naive

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_triples(rng, max_users=8, max_items=8, integral=True):
    """Random sparse matrix with density drawn from [0.2, 0.9]."""
    nu = int(rng.integers(2, max_users + 1))
    nv = int(rng.integers(1, max_items + 1))
    density = rng.uniform(0.2, 0.9)
    mask = rng.random((nu, nv)) < density
    if integral:
        vals = rng.integers(1, 6, size=(nu, nv)).astype(float)
    else:
        vals = np.round(rng.uniform(1, 5, size=(nu, nv)), 3)
    triples = [(u + 1, i + 1, float(vals[u, i])) for u, i in zip(*np.nonzero(mask))]
    return triples, nu, nv


def build(triples, nu, nv):
    matrix = RatingMatrix([t[0] for t in triples], [t[1] for t in triples], [t[2] for t in triples], num_users=nu, num_items=nv)
    return matrix, Naive(triples, nu, nv)


@st.composite
def small_matrices(draw, max_users=8, max_items=8):
    """(RatingMatrix, Naive) pairs with |U| <= 8, |V| <= 8."""
    nu = draw(st.integers(2, max_users))
    nv = draw(st.integers(1, max_items))
    value = st.one_of(st.integers(1, 5).map(float), st.floats(1, 5, allow_nan=False).map(lambda x: round(x, 3)))
    cells = draw(st.lists(st.tuples(st.integers(1, nu), st.integers(1, nv), value), max_size=nu * nv, unique_by=lambda t: t[:2]))
    return build(cells, nu, nv)


def find_movielens():
    """Location of u.data: $SIMCF_DATA_DIR, then ~/data/ml-100k."""
    for root in (os.environ.get("SIMCF_DATA_DIR"), str(Path.home() / "data" / "ml-100k")):
        if root and (Path(root) / "u.data").is_file():
            return Path(root) / "u.data"
    return None


@pytest.fixture(scope="session")
def movielens_path():
    path = find_movielens()
    if path is None:
        pytest.skip("MovieLens-100K u.data not found; set SIMCF_DATA_DIR")
    return path


@pytest.fixture(scope="session")
def movielens(movielens_path):
    return load_ratings(movielens_path, num_users=MOVIELENS_100K_SHAPE[0], num_items=MOVIELENS_100K_SHAPE[1])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Store one summary line per acceptance criterion; printed at session end."""

    def record(number, passed, detail, soft=False):
        status = "PASS" if passed else "FAIL"
        tag = " (soft)" if soft else ""
        ACCEPTANCE_LINES.append(f"criterion {number}{tag}: {status} - {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
