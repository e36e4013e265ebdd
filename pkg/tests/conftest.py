"""Shared fixtures: small systems, constellations, and the LDPC code."""
import numpy as np
import pytest

from llrkit.channel import SystemConfig
from llrkit.ldpc import build_code
from llrkit.modem import build_constellation


@pytest.fixture(scope="session")
def code():
    return build_code()


@pytest.fixture(scope="session")
def qpsk():
    return build_constellation(2)


@pytest.fixture(scope="session")
def qam16():
    return build_constellation(4)


@pytest.fixture(scope="session")
def qam64():
    return build_constellation(6)


@pytest.fixture(scope="session")
def sys22():
    return SystemConfig(nt=2, nr=2, k=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
