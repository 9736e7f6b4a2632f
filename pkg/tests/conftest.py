import numpy as np
import pytest
from hypothesis import settings

from photonmem import (
    MediumParams,
    SpaceGrid,
    TimeGrid,
    make_reference_input,
    optimal_spin_wave,
)

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def gauss_grid():
    return SpaceGrid.gauss_legendre(200)


@pytest.fixture(scope="session")
def uniform_grid():
    return SpaceGrid.uniform_midpoint(256)


@pytest.fixture(scope="session")
def optimal_modes():
    """(mode, eta) per depth, shared across the suite to avoid recomputation."""
    return {d: optimal_spin_wave(d) for d in (1.0, 5.0, 10.0, 30.0, 100.0)}


@pytest.fixture(scope="session")
def reference_input():
    return make_reference_input(20.0, TimeGrid.linspace(0.0, 20.0, 2001))


@pytest.fixture(scope="session")
def params_d10():
    return MediumParams(d=10.0)


def smooth_test_wave(grid: SpaceGrid, which: int = 0) -> np.ndarray:
    """Deterministic smooth positive spin-wave profiles for cross-checks."""
    z = grid.nodes
    shapes = [
        1.0 + 0.5 * np.sin(np.pi * z),
        np.exp(-3.0 * (z - 0.4) ** 2) * (1.0 + 0.3 * z),
        0.6 + z**2 * (1.0 - z) * 4.0,
    ]
    s = shapes[which % len(shapes)]
    return s / np.sqrt(np.dot(grid.weights, s**2))
