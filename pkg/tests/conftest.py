from pathlib import Path

import numpy as np
import pytest

from shillkit import dataset

ROOT = Path(__file__).resolve().parents[1]
ML100K = ROOT / "data" / "ml-100k" / "u.data"


def random_matrix(rng, n, m, density=0.5, rating_max=5):
    """Dense int matrix with zeros as missing; every row and column has a rating."""
    X = rng.integers(1, rating_max + 1, size=(n, m)) * (rng.random((n, m)) < density)
    for u in range(n):
        if not X[u].any():
            X[u, rng.integers(m)] = rng.integers(1, rating_max + 1)
    for i in range(m):
        if not X[:, i].any():
            X[rng.integers(n), i] = rng.integers(1, rating_max + 1)
    return X


@pytest.fixture(scope="session")
def ml100k_path():
    if not ML100K.exists():
        pytest.skip("ML-100K missing: run `python scripts/fetch_ml100k.py` first")
    return ML100K


@pytest.fixture(scope="session")
def ml100k(ml100k_path):
    return dataset.load_movielens(ml100k_path)


@pytest.fixture(scope="session")
def ml100k_split(ml100k):
    return dataset.split(ml100k, 0.1, seed=0)


@pytest.fixture
def small_matrix():
    rng = np.random.default_rng(7)
    return dataset.RatingMatrix.from_dense(random_matrix(rng, 12, 15, density=0.5))


ACCEPTANCE_DETAIL = {}


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, whatever the capture mode."""
    outcomes = {}
    for status in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::" in nodeid and getattr(rep, "when", "call") in ("call", "setup"):
                name = nodeid.split("::")[-1]
                if name not in outcomes or status != "passed":
                    outcomes[name] = status
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcomes):
        verdict = "PASS" if outcomes[name] == "passed" else outcomes[name].upper()
        if verdict == "FAILED":
            verdict = "FAIL"
        detail = ACCEPTANCE_DETAIL.get(name, "")
        terminalreporter.write_line(f"{name}: {verdict} {detail}".rstrip())
