import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bridgefloer.spectral import PhaseField, SpectralField, TorusGrid, random_field

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def grid():
    return TorusGrid(32, 32, 1)


@pytest.fixture
def grid64():
    return TorusGrid(64, 64, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rand_phase(grid, rng, max_mode=6, amplitude=1.0):
    return PhaseField(grid, random_field(grid, rng, max_mode=max_mode, amplitude=amplitude))


def rand_complex(grid, rng, max_mode=6, amplitude=1.0, components=None):
    c = grid.d if components is None else components
    v = random_field(grid, rng, max_mode=max_mode, amplitude=amplitude, components=2 * c)
    return SpectralField(grid, v[:c] + 1j * v[c:])
