import numpy as np
import pytest

from qhuff.ensembles import builtin
from qhuff.qmath import source_model


@pytest.fixture(scope="session")
def e1():
    return builtin("e1")


@pytest.fixture(scope="session")
def e2():
    return builtin("e2")


@pytest.fixture(scope="session")
def m1(e1):
    return source_model(e1)


@pytest.fixture(scope="session")
def m2(e2):
    return source_model(e2)


@pytest.fixture(scope="session")
def mwl():
    return source_model(builtin("which_length"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def datadir():
    from pathlib import Path
    return Path(__file__).parent / "golden"
