import numpy as np
import pytest

from gnmqsim.structure import load_bundled_structure, synthetic_chain
from gnmqsim.network import build_gnm


@pytest.fixture(scope="session")
def crambin():
    return load_bundled_structure()


@pytest.fixture(scope="session")
def crambin_gnm(crambin):
    return build_gnm(crambin)


@pytest.fixture(scope="session")
def chain5_gnm():
    return build_gnm(synthetic_chain(5))
