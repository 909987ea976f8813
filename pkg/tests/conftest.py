"""
Shared fixtures for the bbm-extremes test suite.
"""
import logging

import pytest

from bbm_extremes.core_model import ModelParams
from bbm_extremes.stochastic_kernels import RngStream


@pytest.fixture
def rng():
    """A fixed root stream; tests derive children from it."""
    return RngStream(20240601)


@pytest.fixture
def params2():
    """Planar BBM parameters."""
    return ModelParams(2)


@pytest.fixture
def params1():
    """One-dimensional BBM parameters."""
    return ModelParams(1)


@pytest.fixture(autouse=True)
def quiet_logging(caplog):
    """Capture INFO logs so tests can assert on them."""
    caplog.set_level(logging.INFO)
    return caplog
