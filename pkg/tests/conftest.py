import numpy as np
import pytest

from bumpcert.dyadic import Lattice, Weight
from bumpcert.gauge import YoungFunction, make_log_gauge, psi_from_young

ALPHAS = (1.5, 2.0, 3.0)


@pytest.fixture(scope="session")
def gauges():
    return {a: make_log_gauge(a) for a in ALPHAS}


@pytest.fixture(scope="session")
def gauge2(gauges):
    return gauges[2.0]


@pytest.fixture(scope="session")
def young_log2():
    return YoungFunction.log_power(2.0)


@pytest.fixture(scope="session")
def parametric2(young_log2):
    return psi_from_young(young_log2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def lat4():
    return Lattice.binary(4)


@pytest.fixture(scope="session")
def lat6():
    return Lattice.binary(6)


def make_weight(lat, rng, zeros=0.0, sigma=1.0) -> Weight:
    vals = np.exp(sigma * rng.normal(size=lat.n_leaves))
    if zeros > 0:
        vals[rng.random(lat.n_leaves) < zeros] = 0.0
    return Weight(lat, vals)
