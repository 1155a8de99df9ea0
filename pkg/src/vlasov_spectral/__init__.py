"""Spectral tools for the linearised Vlasov operator of a magnetised plasma.

Dispersion functions and their roots, eigenmodes of the operator and its
adjoint, resolvent evaluation with contour-integral time evolution, and a
brute-force discretised operator used as ground truth.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .dispersion import DispersionEvaluator, epsilon, epsilon0, find_roots
from .equilibrium import EquilibriumDistribution, WaveConfig
from .grid import Field1D, Grid1D, PerturbationField, VelocityGrid
from .initial import emit_initial_field
from .modes import adjoint_mode, inner_product, magnetized_mode, normalization, vkc_mode
from .oracle import DiscreteOperator, apply_K, fit_rate, integrate_direct
from .resolvent import ContourSpec, apply_resolvent_orbit, apply_resolvent_series, evolve, evolve_1d

__all__ = [
    "ContourSpec", "DiscreteOperator", "DispersionEvaluator", "EquilibriumDistribution",
    "Field1D", "Grid1D", "PerturbationField", "VelocityGrid", "WaveConfig",
    "adjoint_mode", "apply_K", "apply_resolvent_orbit", "apply_resolvent_series",
    "emit_initial_field", "epsilon", "epsilon0", "evolve", "evolve_1d", "find_roots",
    "fit_rate", "inner_product", "integrate_direct", "magnetized_mode", "normalization",
    "vkc_mode",
]
