"""Shared fixtures: small grids and seeded initial fields."""

from __future__ import annotations

import numpy as np
import pytest

from opsplit.datagen import init_fourier_mix, init_lowfreq_modes_2d
from opsplit.field import Field, Grid


@pytest.fixture(scope="session")
def grid1d() -> Grid:
    return Grid(dims=1, points=256, length=16.0)


@pytest.fixture(scope="session")
def grid2d() -> Grid:
    return Grid(dims=2, points=64, length=2.0 * np.pi)


@pytest.fixture(scope="session")
def u0(grid1d: Grid) -> Field:
    return init_fourier_mix(grid1d, terms=5, seed=0)


@pytest.fixture(scope="session")
def w0(grid2d: Grid) -> Field:
    return init_lowfreq_modes_2d(grid2d, n_modes=5, seed=0)
