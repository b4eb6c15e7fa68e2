import sys
import time

import numpy as np
import pytest

from pvtol.experiments import MonteCarloConfig, canonical_scenario, compare_nominal, monte_carlo


@pytest.fixture(scope="session")
def canonical():
    return canonical_scenario()


@pytest.fixture(scope="session")
def nominal(canonical):
    """Both controllers on the canonical scenario at the default step."""
    return compare_nominal(canonical)


@pytest.fixture(scope="session")
def mc_invopt(canonical):
    """100-run batch on a single worker; wall time kept for the runtime check."""
    t0 = time.perf_counter()
    res = monte_carlo(canonical, MonteCarloConfig(), "invopt", jobs=1)
    res.elapsed = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def mc_fbl(canonical):
    return monte_carlo(canonical, MonteCarloConfig(), "fbl", jobs=None)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
