import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mmvsar.geometry import gotcha_geometry, imaging_grid, segment_aperture

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def geom():
    return gotcha_geometry()


@pytest.fixture(scope="session")
def coarse_geom():
    """GOTCHA geometry with 5 m element spacing (61 antennas per 300 m view)."""
    return gotcha_geometry(element_spacing=5.0)


@pytest.fixture(scope="session")
def views(coarse_geom):
    return segment_aperture(coarse_geom, 300.0, 50.0, n_views=24)


@pytest.fixture(scope="session")
def grid(coarse_geom):
    return imaging_grid(coarse_geom, 20.0, 0.5)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unit_columns(rng, nr, ny):
    G = random_complex(rng, nr, ny)
    return G / np.linalg.norm(G, axis=0)
