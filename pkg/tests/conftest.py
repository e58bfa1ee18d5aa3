import numpy as np
import pytest

from ma_radial import nonlinearity as nl
from ma_radial.operator import ProblemFamily, ProblemSpec, default_grid


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def family(name, N=1, **params):
    f = nl.from_family(name, params or None)
    return ProblemFamily(N, f, f)


def problem(name, lam, N=1, **params):
    return family(name, N, **params).at(lam)
