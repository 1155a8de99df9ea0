import numpy as np
import pytest

from vlasov_spectral.dispersion import DispersionEvaluator
from vlasov_spectral.equilibrium import EquilibriumDistribution, WaveConfig
from vlasov_spectral.grid import PerturbationField, VelocityGrid


@pytest.fixture
def maxwellian():
    return EquilibriumDistribution.maxwellian()


@pytest.fixture
def magnetized_wave():
    return WaveConfig(0.5, 0.5, 1.0, 1.0)


@pytest.fixture
def small_grid():
    return VelocityGrid(48, 20, 8.0, 1)


def gaussian_field(grid, wave, shift=0.5, seed=None):
    """Smooth two-harmonic test field."""
    vpar, vperp = grid.mesh()
    h = np.zeros(grid.shape, complex)
    h[grid.m_max] = np.exp(-0.5 * (vpar - shift) ** 2 - 0.5 * vperp**2) / (2 * np.pi) ** 1.5
    if grid.m_max >= 1:
        h[grid.m_max + 1] = 0.3 * vperp * np.exp(-0.5 * vpar**2 - 0.5 * vperp**2)
    if seed is not None:
        rng = np.random.default_rng(seed)
        h = h * (1 + 0.2 * rng.standard_normal(grid.shape[:1])[:, None, None])
    return PerturbationField(h, grid, wave)


@pytest.fixture
def magnetized_setup(maxwellian, magnetized_wave, small_grid):
    ev = DispersionEvaluator(maxwellian, magnetized_wave, small_grid)
    return ev, gaussian_field(small_grid, magnetized_wave)
