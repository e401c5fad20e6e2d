import numpy as np
import pytest

from sketchrank.synthetic import FAMILIES, GAP_SPECTRUM, FactorKind, make_test_matrix

ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        ok, detail = results[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    """Record ``(passed, detail)`` per criterion for the terminal summary."""
    store = pytestconfig.stash[ACCEPTANCE_KEY]

    def record(criterion, ok, detail):
        store[criterion] = (bool(ok), detail)
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def gap_incoherent():
    return make_test_matrix(2000, 2000, GAP_SPECTRUM, FactorKind.HAAR_INCOHERENT, seed=101)


@pytest.fixture(scope="session")
def gap_coherent():
    return make_test_matrix(2000, 2000, GAP_SPECTRUM, FactorKind.COHERENT_DIAGONAL)


@pytest.fixture(scope="session")
def se_matrix():
    return make_test_matrix(2000, 2000, FAMILIES["se"], seed=202)


@pytest.fixture(scope="session")
def fp_matrix():
    return make_test_matrix(2000, 2000, FAMILIES["fp"], seed=303)
