import numpy as np
import pytest

from lrkf.harness import builtin_model
from lrkf.model import lift


@pytest.fixture(scope="session")
def unstable10():
    return builtin_model("unstable10")


@pytest.fixture(scope="session")
def unstable10_lifted(unstable10):
    return lift(unstable10)


@pytest.fixture(scope="session")
def symmetric20():
    return builtin_model("symmetric20")


@pytest.fixture(scope="session")
def symmetric20_lifted(symmetric20):
    return lift(symmetric20)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
