"""
Shared pytest fixtures for the HessCraft test suite.
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from bench.family_manager import reset_family_manager  # noqa: E402
from core.config import reset_config  # noqa: E402
from core.tape import exp, record  # noqa: E402

# (x0 + e^{x1}) * (3 x1 + x2^2) at (1, 0, 2)
WORKED_POINT = (1.0, 0.0, 2.0)
WORKED_HESSIAN = {(1, 0): 3.0, (2, 0): 4.0, (1, 1): 10.0, (2, 1): 4.0, (2, 2): 4.0}


def worked_program(x):
    return (x[0] + exp(x[1])) * (3 * x[1] + x[2] ** 2)


def product_sum_program(x):
    return (x[0] * x[1]) * (x[0] + x[1])


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: timing and large finite-difference checks, run with HESSCRAFT_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("HESSCRAFT_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set HESSCRAFT_RUN_SLOW=1 to run timing checks")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Point the config singleton at a throwaway file and clear overrides."""
    monkeypatch.setenv("HESSCRAFT_CONFIG_FILE", str(tmp_path / "hesscraft_config.json"))
    for name in ("HESSCRAFT_DENSE_CAP", "HESSCRAFT_PATH_ENUM_CAP", "HESSCRAFT_DEBUG_CHECKS"):
        monkeypatch.delenv(name, raising=False)
    reset_config()
    reset_family_manager()
    yield
    reset_config()
    reset_family_manager()


@pytest.fixture
def worked_tape():
    return record(worked_program, 3)


@pytest.fixture
def product_sum_tape():
    return record(product_sum_program, 2)
