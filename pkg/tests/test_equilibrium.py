import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlasov_spectral.equilibrium import (EquilibriumDistribution, Family, WaveConfig, df0_dvpar,
                                         df0_dvperp, eta_bar, eta_par, eta_perp, eval_eta, eval_f0,
                                         reduced_f0)
from vlasov_spectral.grid import VelocityGrid, gauss_legendre

FAMILIES = [
    EquilibriumDistribution.maxwellian(),
    EquilibriumDistribution(Family.BIMAXWELLIAN, {"vt_perp": 1.3, "vt_par": 0.8}),
    EquilibriumDistribution(Family.BUMP_ON_TAIL),
    EquilibriumDistribution.two_stream(2.0, 1.0),
]
WAVE = WaveConfig(0.4, 0.3, 1.0, 1.0)


def test_maxwellian_value_at_origin():
    assert eval_f0(EquilibriumDistribution.maxwellian(), 0.0, 0.0) == pytest.approx((2 * np.pi) ** -1.5)


@pytest.mark.parametrize("eq", FAMILIES, ids=lambda e: e.kind.value)
def test_unit_density(eq):
    g = VelocityGrid(160, 80, 12.0)
    vpar, vperp = g.mesh()
    assert abs(g.integrate(eval_f0(eq, vperp, vpar)) - 1.0) < 1e-10


@pytest.mark.parametrize("eq", FAMILIES, ids=lambda e: e.kind.value)
def test_positive_and_decaying(eq):
    vpar, vperp = np.meshgrid(np.linspace(-10, 10, 101), np.linspace(0, 10, 51))
    f = eval_f0(eq, vperp, vpar)
    assert np.all(f >= 0)
    assert eval_f0(eq, 0.0, 40.0) < 1e-100 and eval_f0(eq, 0.0, -40.0) < 1e-100


@pytest.mark.parametrize("eq", FAMILIES, ids=lambda e: e.kind.value)
def test_derivatives_match_finite_differences(eq):
    rng = np.random.default_rng(3)
    vperp = rng.uniform(0.2, 3, 20)
    vpar = rng.uniform(-3, 3, 20)
    errs = []
    for h in (1e-2, 5e-3):
        fd_par = (eval_f0(eq, vperp, vpar + h) - eval_f0(eq, vperp, vpar - h)) / (2 * h)
        fd_perp = (eval_f0(eq, vperp + h, vpar) - eval_f0(eq, vperp - h, vpar)) / (2 * h)
        errs.append(max(np.max(np.abs(fd_par - df0_dvpar(eq, vperp, vpar))),
                        np.max(np.abs(fd_perp - df0_dvperp(eq, vperp, vpar)))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)  # O(h^2)
    h = 1e-4
    fd = WAVE.eta_scale * WAVE.k_par * (eval_f0(eq, vperp, vpar + h) - eval_f0(eq, vperp, vpar - h)) / (2 * h)
    assert np.max(np.abs(fd - eta_par(eq, WAVE, vperp, vpar))) < 1e-8


def test_maxwellian_eta_par_closed_form():
    eq = EquilibriumDistribution.maxwellian()
    vperp, vpar = 0.7, np.linspace(-3, 3, 13)
    ref = -WAVE.eta_scale * WAVE.k_par * vpar * eval_f0(eq, vperp, vpar)
    assert np.allclose(eta_par(eq, WAVE, vperp, vpar), ref, rtol=1e-14, atol=0)
    assert np.allclose(eta_par(eq, WAVE, vperp, vpar), -eta_par(eq, WAVE, vperp, -vpar))


@pytest.mark.parametrize("eq", FAMILIES, ids=lambda e: e.kind.value)
def test_eta_perp_vanishes_on_axis(eq):
    assert np.all(eta_perp(eq, WAVE, 0.0, np.linspace(-3, 3, 7)) == 0)


@pytest.mark.parametrize("eq", FAMILIES, ids=lambda e: e.kind.value)
def test_eta_integrates_to_zero(eq):
    # Cartesian tensor quadrature of the full eta(v)
    x, wx = gauss_legendre(-10, 10, 80)
    V = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
    W = wx[:, None, None] * wx[None, :, None] * wx[None, None, :]
    assert abs(np.sum(W * eval_eta(eq, WAVE, V))) < 1e-12


def test_eta_decomposition():
    eq = EquilibriumDistribution(Family.BIMAXWELLIAN, {"vt_perp": 1.3, "vt_par": 0.8})
    theta, vp, vz = 0.9, 1.1, -0.4
    v = np.array([vp * np.cos(theta), vp * np.sin(theta), vz])
    expected = eta_perp(eq, WAVE, vp, vz) * np.cos(theta) + eta_par(eq, WAVE, vp, vz)
    assert eval_eta(eq, WAVE, v) == pytest.approx(expected, rel=1e-14)


def test_reduced_projection_integrates_perpendicular_directions():
    eq = EquilibriumDistribution(Family.BIMAXWELLIAN, {"vt_perp": 1.3, "vt_par": 0.8})
    wave = WaveConfig(0.0, 0.5)
    g = VelocityGrid(64, 60, 10.0)
    vpar, vperp = g.mesh()
    along = 2 * np.pi * eval_f0(eq, vperp, vpar) @ (g.w_perp * g.v_perp)
    assert np.allclose(along, reduced_f0(eq, wave, g.v_par), atol=1e-12)
    fd = (reduced_f0(eq, wave, g.v_par + 1e-5) - reduced_f0(eq, wave, g.v_par - 1e-5)) / 2e-5
    assert np.allclose(eta_bar(eq, wave, g.v_par), fd / wave.k, atol=1e-9)


@given(st.floats(0.05, 3), st.floats(0.05, 3))
@settings(max_examples=25, deadline=None)
def test_wave_properties(kp, kz):
    w = WaveConfig(kp, kz, 1.0, 0.0)
    assert w.k == pytest.approx(np.hypot(kp, kz))
    assert not w.magnetized


def test_invalid_configs():
    with pytest.raises(ValueError):
        WaveConfig(0.0, 0.0)
    with pytest.raises(ValueError):
        WaveConfig(0.1, 0.1, 1.0, -1.0)
    with pytest.raises(ValueError):
        EquilibriumDistribution(Family.MAXWELLIAN, {"vt": -1.0})
    with pytest.raises(ValueError):
        EquilibriumDistribution(Family.MAXWELLIAN, {"drift": 1.0})
    with pytest.raises(ValueError):
        eval_f0(EquilibriumDistribution.maxwellian(), np.inf, 0.0)
    with pytest.raises(ValueError):
        eval_f0(EquilibriumDistribution.maxwellian(), -1.0, 0.0)
