"""Shared fixtures: grids and reference fields are expensive, build once."""

import numpy as np
import pytest

from sol_lab.sphere_grid import SHCoefficients, ScalarField, build_grid, sh_synthesis


@pytest.fixture(scope="session")
def grid16():
    return build_grid(17, 34)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(65, 130)


@pytest.fixture(scope="session")
def grid128():
    return build_grid(129, 258)


@pytest.fixture(scope="session")
def grid192():
    return build_grid(193, 386)


def random_band_limited(grid, rng, l_max=None, amplitude=2.0, decay=2.0):
    """Seeded random field with coefficients ~ N(0, (1+l)^(-2 decay))."""
    L = grid.band_limit if l_max is None else l_max
    coeffs = SHCoefficients.zeros(grid.band_limit)
    for l in range(1, L + 1):
        coeffs.values[l, grid.band_limit - l:grid.band_limit + l + 1] = \
            rng.normal(size=2 * l + 1) / (1.0 + l) ** decay
    field = sh_synthesis(coeffs, grid)
    peak = float(np.max(np.abs(field.values)))
    if peak > 0.0:
        field = field * (amplitude / peak)
    return field


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
