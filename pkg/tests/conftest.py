import numpy as np
import pytest

from lmgquench import DecompositionCache, SpinBasis


@pytest.fixture(scope="session")
def cache():
    return DecompositionCache()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_state_amps(rng, dim):
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return amps / np.linalg.norm(amps)


@pytest.fixture
def basis20():
    return SpinBasis.for_particles(20)
