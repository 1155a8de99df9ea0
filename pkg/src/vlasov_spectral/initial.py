"""Built-in initial perturbations.

Every family is a polynomial times a Gaussian, so each comes with an
``analytic`` callable that continues the harmonics to complex ``v_par``
(needed by the residue-sum evolution).
"""

from __future__ import annotations

import inspect

import numpy as np

from .grid import PerturbationField, VelocityGrid

FAMILIES = ("maxwellian-bump", "single-harmonic", "random-smooth")
TWO_PI_32 = (2.0 * np.pi) ** 1.5


class UnknownFamilyError(ValueError):
    pass


def _stack(m_values, m_keep, profile):
    """Harmonic stack with ``profile(m)`` on the kept harmonics and zero elsewhere."""
    rows = {int(m): profile(int(m)) for m in np.atleast_1d(m_values) if int(m) in m_keep}
    ref = next(iter(rows.values())) if rows else profile(min(m_keep, key=abs))
    zero = np.zeros(np.shape(ref), dtype=np.result_type(ref, complex))
    return np.array([rows.get(int(m), zero) for m in np.atleast_1d(m_values)])


def maxwellian_bump(grid: VelocityGrid, wave=None, drift=0.5, vt=1.0, moment_tol=1e-6):
    """Drifting isotropic Maxwellian in the ``m = 0`` harmonic, unit moment.

    The closed-form normalisation is corrected by the grid quadrature so
    the discrete moment is exactly 1; a correction beyond ``moment_tol``
    means ``v_cut`` or the grid is too small for the bump and is rejected.
    """
    if vt <= 0:
        raise ValueError("vt must be positive")
    scale = 1.0

    def analytic(m_values, v_par, v_perp):
        v_par = np.asarray(v_par)
        g = scale * np.exp(-0.5 * ((v_par - drift) ** 2 + np.asarray(v_perp) ** 2) / vt**2) / (TWO_PI_32 * vt**3)
        return _stack(m_values, {0}, lambda m: g)

    vpar, vperp = grid.mesh()
    raw = complex(grid.integrate(analytic([0], vpar, vperp)[0])).real
    if abs(raw - 1.0) > moment_tol:
        raise ValueError(f"maxwellian-bump moment off by {abs(raw - 1.0):.2e}; enlarge v_cut or the grid")
    scale = 1.0 / raw
    return PerturbationField(analytic(grid.m_values, vpar, vperp), grid, wave, analytic)


def single_harmonic(grid: VelocityGrid, wave=None, m=0, amplitude=1.0, drift=0.0, width=1.0):
    """One gyro harmonic ``m`` with profile ``v_perp^|m| exp(-((v_par-drift)^2 + v_perp^2)/2w^2)``.

    The ``v_perp^|m|`` factor keeps the field regular on the axis.
    """
    if abs(m) > grid.m_max:
        raise ValueError(f"harmonic {m} outside the grid range |m| <= {grid.m_max}")
    if width <= 0:
        raise ValueError("width must be positive")

    def analytic(m_values, v_par, v_perp):
        v_par, v_perp = np.asarray(v_par), np.asarray(v_perp)
        g = amplitude * v_perp ** abs(m) * np.exp(-0.5 * ((v_par - drift) ** 2 + v_perp**2) / width**2)
        return _stack(m_values, {m}, lambda _: g)

    vpar, vperp = grid.mesh()
    return PerturbationField(analytic(grid.m_values, vpar, vperp), grid, wave, analytic)


def random_smooth(grid: VelocityGrid, wave=None, seed=0, n_par_terms=4, n_perp_terms=3, m_span=1):
    """Seeded random combination of Hermite-Gaussian profiles.

    Algorithm: ``numpy.random.default_rng(seed)`` draws complex normal
    coefficients ``c[m, j, l]`` in the order harmonic, parallel degree,
    perpendicular degree, for ``|m| <= min(m_span, m_max)``.  The field is
    ``f_m = sum_{j,l} c[m,j,l] He_j(v_par) v_perp^(|m|+2l) exp(-(v_par^2+v_perp^2)/2)``
    with probabilists' Hermite polynomials ``He_j``, scaled by ``1/(1+j+l)``.
    """
    m_top = min(int(m_span), grid.m_max)
    ms = list(range(-m_top, m_top + 1))
    rng = np.random.default_rng(seed)
    shape = (len(ms), n_par_terms, n_perp_terms)
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    damp = 1.0 / (1.0 + np.add.outer(np.arange(n_par_terms), np.arange(n_perp_terms)))
    coef = coef * damp[None]

    def analytic(m_values, v_par, v_perp):
        v_par, v_perp = np.asarray(v_par), np.asarray(v_perp)
        gauss = np.exp(-0.5 * (v_par**2 + v_perp**2))
        he = np.polynomial.hermite_e.hermeval

        def profile(m):
            c = coef[ms.index(m)]
            total = 0
            for l in range(n_perp_terms):
                total = total + he(v_par, c[:, l]) * v_perp ** (abs(m) + 2 * l)
            return total * gauss

        return _stack(m_values, set(ms), profile)

    vpar, vperp = grid.mesh()
    return PerturbationField(analytic(grid.m_values, vpar, vperp), grid, wave, analytic)


_BUILDERS = {
    "maxwellian-bump": maxwellian_bump,
    "single-harmonic": single_harmonic,
    "random-smooth": random_smooth,
}


def resolve_spec(spec: dict) -> dict:
    """``spec`` with every omitted family parameter filled by its default."""
    family = spec.get("family")
    if family not in _BUILDERS:
        raise UnknownFamilyError(f"unknown initial-field family {family!r}; choose from {FAMILIES}")
    params = inspect.signature(_BUILDERS[family]).parameters
    unknown = set(spec) - set(params) - {"family"}
    if unknown:
        raise ValueError(f"unknown parameters for {family}: {sorted(unknown)}")
    full = {name: p.default for name, p in params.items() if name not in ("grid", "wave")}
    return {"family": family, **full, **{k: v for k, v in spec.items() if k != "family"}}


def emit_initial_field(spec: dict, grid: VelocityGrid, wave=None) -> PerturbationField:
    """Build ``f(v, 0)`` from ``{"family": name, **params}``."""
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in _BUILDERS:
        raise UnknownFamilyError(f"unknown initial-field family {family!r}; choose from {FAMILIES}")
    return _BUILDERS[family](grid, wave, **spec)
