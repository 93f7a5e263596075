"""
Shared pytest fixtures for the FSR3D test suites
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size acceptance and timing runs")


@pytest.fixture
def rng():
    """Seeded generator so every test draws the same data"""
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    """Isolate tests from FSR_* variables in the caller's environment"""
    for key in list(os.environ):
        if key.startswith("FSR_"):
            monkeypatch.delenv(key, raising=False)
    from core.config import reload_config
    reload_config()
    yield
    monkeypatch.undo()
    reload_config()
