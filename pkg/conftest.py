import os
import tempfile

os.environ.setdefault("IKZM_ARTIFACT_DIR", tempfile.mkdtemp(prefix="ikzm-test-"))

import pytest  # noqa: E402

from equilibrium import solve_ground_state  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run long statistical checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def chain50():
    return solve_ground_state(50)


@pytest.fixture(scope="session")
def chain20():
    return solve_ground_state(20)


@pytest.fixture(scope="session")
def chain10():
    return solve_ground_state(10)


@pytest.fixture(scope="session")
def chain6():
    return solve_ground_state(6)
