import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import jv

from vlasov_spectral.special import (PVQuadratureRule, bessel_J, bessel_table, plasma_Z,
                                     plasma_Z_prime, pv_integral)


def test_bessel_at_origin():
    assert bessel_J(0, 0.0) == 1.0
    for n in (-3, 1, 2, 7):
        assert bessel_J(n, 0.0) == 0.0


def test_bessel_square_sum_is_one():
    tab = bessel_table(60, 7.3)
    assert abs(np.sum(tab**2) - 1.0) < 1e-12


@pytest.mark.parametrize("x", [0.3, 1.0, 7.3, 19.9, 35.0, 50.0])
def test_bessel_matches_reference(x):
    n = np.arange(-80, 81)
    ref = jv(n, x)
    assert np.max(np.abs(bessel_table(80, x) - ref)) < 1e-12


def test_bessel_negative_order_and_argument():
    x = np.array([-4.2, -0.5, 0.5, 4.2])
    for n in range(1, 6):
        assert np.allclose(bessel_J(-n, x), (-1) ** n * bessel_J(n, x), atol=1e-15)
        assert np.allclose(bessel_J(n, -x), (-1) ** n * bessel_J(n, x), atol=1e-15)


def test_bessel_recurrence():
    x = np.linspace(0.1, 40.0, 200)
    tab = bessel_table(60, x)
    for n in range(-58, 59):
        lhs = tab[n - 1 + 60] + tab[n + 1 + 60]
        rhs = 2 * n / x * tab[n + 60]
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_bessel_rejects_non_finite():
    with pytest.raises(ValueError):
        bessel_J(1, np.nan)


def test_plasma_Z_at_zero():
    assert abs(plasma_Z(0.0) - 1j * np.sqrt(np.pi)) < 1e-15


@given(st.floats(-6, 6), st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_plasma_Z_derivative_identity(x, y):
    z = complex(x, y)
    h = 1e-5
    fd = (plasma_Z(z + h) - plasma_Z(z - h)) / (2 * h)
    assert abs(plasma_Z_prime(z) + 2 * (1 + z * plasma_Z(z))) < 1e-10
    assert abs(fd - plasma_Z_prime(z)) < 1e-6 * max(1.0, abs(fd))


@pytest.mark.parametrize("z", [0.3 + 0.4j, -1.2 + 0.7j, 2.0 + 0.1j])
def test_plasma_Z_against_defining_integral(z):
    re = integrate.quad(lambda t: (np.exp(-t * t) / (t - z)).real, -np.inf, np.inf, epsabs=1e-13)[0]
    im = integrate.quad(lambda t: (np.exp(-t * t) / (t - z)).imag, -np.inf, np.inf, epsabs=1e-13)[0]
    assert abs(plasma_Z(z) - (re + 1j * im) / np.sqrt(np.pi)) < 1e-9


@pytest.mark.parametrize("z", [0.3 + 0.4j, -1.2 + 0.7j, 1.5 - 0.6j])
def test_plasma_Z_reflection(z):
    assert abs(plasma_Z(z) + plasma_Z(-z) - 2j * np.sqrt(np.pi) * np.exp(-z * z)) < 1e-10


def test_plasma_Z_continuous_across_axis():
    x = np.linspace(-4, 4, 41)
    d = 1e-12
    assert np.max(np.abs(plasma_Z(x + 1j * d) - plasma_Z(x - 1j * d))) < 1e-10


@pytest.mark.parametrize("handling", ["subtraction", "split_symmetric"])
def test_pv_odd_gaussian_vanishes(handling):
    rule = PVQuadratureRule.gauss_legendre(-8, 8, 64, handling)
    assert abs(pv_integral(lambda v: np.exp(-v**2), 0.0, rule)) < 1e-13


@pytest.mark.parametrize("handling", ["subtraction", "split_symmetric"])
def test_pv_of_constant(handling):
    rule = PVQuadratureRule.gauss_legendre(-1, 1, 16, handling)
    assert abs(pv_integral(np.ones_like, 0.5, rule) - np.log(1 / 3)) < 1e-13


@pytest.mark.parametrize("a", [1.2, -0.4, 2.7])
def test_pv_maxwellian_matches_real_Z(a):
    # PV int exp(-v^2/2)/(v - a) dv = sqrt(2 pi) Re Z(a/sqrt 2) / sqrt(pi) * sqrt(pi)
    rule = PVQuadratureRule.gauss_legendre(-10, 10, 96)
    val = pv_integral(lambda v: np.exp(-0.5 * v**2), a, rule)
    ref = np.sqrt(np.pi) * plasma_Z(a / np.sqrt(2)).real
    assert abs(val - ref) < 1e-10


def test_pv_smooth_integrand_matches_plain_quadrature():
    # pole far from the support: PV equals the ordinary integral
    rule = PVQuadratureRule.gauss_legendre(-8, 8, 80)
    g = lambda v: np.exp(-2 * (v + 4) ** 2)
    plain = rule.integrate(g(rule.nodes) / (rule.nodes - 5.0))
    assert abs(pv_integral(g, 5.0, rule) - plain) < 1e-12


def test_pv_converges_under_refinement():
    g = lambda v: np.cos(v) * np.exp(-0.1 * v**2) * (1 + v)
    ref = pv_integral(g, 0.3, PVQuadratureRule.gauss_legendre(-3, 3, 200))
    errs = [abs(pv_integral(g, 0.3, PVQuadratureRule.gauss_legendre(-3, 3, n)) - ref) for n in (4, 8, 16)]
    assert errs[1] < errs[0] / 4 and errs[2] < errs[1] / 4


def test_pv_pole_outside_span():
    rule = PVQuadratureRule.gauss_legendre(-1, 1, 8)
    with pytest.raises(ValueError):
        pv_integral(np.ones_like, 1.5, rule)


def test_pv_batched_integrand():
    rule = PVQuadratureRule.gauss_legendre(-1, 1, 16)
    out = pv_integral(lambda v: np.vstack([np.ones_like(v), 2 * np.ones_like(v)]), 0.5, rule)
    assert np.allclose(out, [np.log(1 / 3), 2 * np.log(1 / 3)], atol=1e-13)
