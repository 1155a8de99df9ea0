import numpy as np
import pytest

from vlasov_spectral import (DispersionEvaluator, EquilibriumDistribution, VelocityGrid, WaveConfig,
                             adjoint_mode, find_roots, inner_product, magnetized_mode, normalization,
                             vkc_mode)
from vlasov_spectral.modes import (DegenerateWeightsError, NotAnEigenvalueError, UndefinedProductError,
                                   default_delta_weights, eigen_residual, unmagnetized_mode)

TWO_STREAM = EquilibriumDistribution.two_stream(2.0, 0.3)
MAGNETIZED_TWO_STREAM = WaveConfig(0.3, 0.4, 1.0, 1.0)
MAG_WAVE = WaveConfig(0.5, 0.5, 1.0, 1.0)


@pytest.fixture(scope="module")
def two_stream_modes():
    g = VelocityGrid(96, 16, 5.0, 1)
    ev = DispersionEvaluator(TWO_STREAM, MAGNETIZED_TWO_STREAM, g)
    roots = [r.z for r in find_roots(ev, (-3, 3, 0.02, 2)) if r.converged]
    direct = [magnetized_mode(ev, z) for z in roots]
    adjoint = [adjoint_mode(ev, z) for z in roots]
    return ev, roots, direct, adjoint


@pytest.fixture(scope="module")
def maxwellian_ev():
    return DispersionEvaluator(EquilibriumDistribution.maxwellian(), MAG_WAVE, VelocityGrid(64, 16, 6.0, 1))


# -- one-dimensional modes ---------------------------------------------------

def test_vkc_without_plasma_is_a_pure_delta():
    ev = DispersionEvaluator(EquilibriumDistribution.maxwellian(), WaveConfig(0.0, 0.5, 0.0),
                             VelocityGrid(256, 4, 8.0, 0))
    m = vkc_mode(ev, 0.3)
    assert len(m.delta_part) == 1
    assert m.delta_part[0].v_par == pytest.approx(0.6)
    assert m.delta_part[0].weights[0] == pytest.approx(1.0, abs=1e-14)
    assert abs(normalization(m) - 1) < 1e-12


def test_vkc_at_zero_frequency_carries_static_eps():
    # Re eps0(0) = 1 + 1/k^2 for a unit Maxwellian
    ev = DispersionEvaluator(EquilibriumDistribution.maxwellian(), WaveConfig(0.0, 0.5),
                             VelocityGrid(256, 4, 8.0, 0))
    m = vkc_mode(ev, 0.0)
    assert m.info["eps_pv"] == pytest.approx(5.0, abs=1e-10)
    assert abs(normalization(m) - 1) < 1e-8


def test_vkc_complex_root_normalised():
    ev = DispersionEvaluator(TWO_STREAM, WaveConfig(0.0, 0.3), VelocityGrid(256, 4, 8.0, 0))
    roots = find_roots(ev, (-3, 3, 0.02, 2))
    assert len(roots) == 1 and roots[0].converged
    m = vkc_mode(ev, roots[0].z)
    assert m.eigenvalue.imag == pytest.approx(0.3431728701833328, abs=1e-9)
    assert abs(normalization(m) - 1) < 1e-8


def test_vkc_rejects_non_root():
    ev = DispersionEvaluator(EquilibriumDistribution.maxwellian(), WaveConfig(0.0, 0.5),
                             VelocityGrid(128, 4, 8.0, 0))
    with pytest.raises(NotAnEigenvalueError):
        vkc_mode(ev, 0.5 + 0.5j)


# -- complex modes -------------------------------------------------------------

def test_two_stream_roots_found(two_stream_modes):
    _, roots, _, _ = two_stream_modes
    assert len(roots) == 2
    assert all(z.imag > 0.1 for z in roots)
    assert roots[0] == pytest.approx(-np.conj(roots[1]), abs=1e-10)


def test_complex_normalisations(two_stream_modes):
    _, _, direct, adjoint = two_stream_modes
    for m in direct + adjoint:
        assert abs(normalization(m) - 1) < 1e-7


def test_complex_orthogonality(two_stream_modes):
    _, _, direct, adjoint = two_stream_modes
    for a in adjoint:
        for g in direct:
            assert abs(inner_product(a, g)) < 1e-6


def test_complex_mode_residuals(two_stream_modes):
    _, _, direct, adjoint = two_stream_modes
    for m in direct + adjoint:
        assert eigen_residual(m) < 1e-8


def test_complex_residual_converges_without_polishing():
    an = DispersionEvaluator(TWO_STREAM, MAGNETIZED_TWO_STREAM, VelocityGrid(64, 16, 5.0, 1),
                             method="analytic")
    z = [r.z for r in find_roots(an, (0, 3, 0.02, 2)) if r.converged][0]
    res = []
    for n in (32, 64, 128):
        ev = DispersionEvaluator(TWO_STREAM, MAGNETIZED_TWO_STREAM, VelocityGrid(n, 24, 5.0, 1))
        res.append(eigen_residual(magnetized_mode(ev, z, root_tol=1.0, polish=False)))
    assert res[0] > res[1] > res[2]
    assert res[2] < 1e-6


def test_fake_eigenvalue(maxwellian_ev):
    with pytest.raises(NotAnEigenvalueError):
        magnetized_mode(maxwellian_ev, 0.4 + 0.7j)
    forced = magnetized_mode(maxwellian_ev, 0.4 + 0.7j, root_tol=10.0, polish=False)
    assert eigen_residual(forced) > 1e-2


# -- real modes ----------------------------------------------------------------

FAMILIES = [("gaussian", 0), ("ring", 0), ("gaussian", 1), ("gaussian", -1)]


def test_degeneracy_witness(maxwellian_ev):
    mu = 0.7
    modes = [magnetized_mode(maxwellian_ev, mu, default_delta_weights(maxwellian_ev, mu, kind, shift))
             for kind, shift in FAMILIES]
    for m in modes:
        assert abs(normalization(m) - 1) < 1e-7
    samples = np.array([m.sample(0.2).harmonics.ravel() for m in modes])
    assert np.linalg.matrix_rank(samples, tol=1e-6 * np.abs(samples).max()) == len(modes)


@pytest.mark.parametrize("kind,shift", FAMILIES)
def test_real_mode_weak_residual(kind, shift):
    mu = 0.7
    res = []
    for n in (32, 64, 128):
        ev = DispersionEvaluator(EquilibriumDistribution.maxwellian(), MAG_WAVE, VelocityGrid(n, 16, 6.0, 1))
        res.append(eigen_residual(magnetized_mode(ev, mu, default_delta_weights(ev, mu, kind, shift))))
    # first order in the cell width
    assert 1.6 < res[0] / res[1] < 2.6
    assert 1.6 < res[1] / res[2] < 2.6


def test_real_adjoint_normalised(maxwellian_ev):
    for mu in (0.4, 0.7, 1.9):
        assert abs(normalization(adjoint_mode(maxwellian_ev, mu)) - 1) < 1e-7


def test_delta_residual_without_plasma_scales_with_mollifier():
    ev = DispersionEvaluator(EquilibriumDistribution.maxwellian(), WaveConfig(0.5, 0.5, 0.0, 1.0),
                             VelocityGrid(128, 16, 6.0, 1))
    m = magnetized_mode(ev, 0.7)
    r1, r2 = eigen_residual(m, mollify=0.2), eigen_residual(m, mollify=0.1)
    assert r2 < r1
    assert r1 / r2 == pytest.approx(2.0, rel=0.15)


def test_degenerate_weights_rejected(maxwellian_ev):
    weights = {p: 0 * a for p, a in default_delta_weights(maxwellian_ev, 0.7).items()}
    with pytest.raises(DegenerateWeightsError):
        magnetized_mode(maxwellian_ev, 0.7, weights)


def test_coincident_singular_parts_undefined(maxwellian_ev):
    a = adjoint_mode(maxwellian_ev, 0.7)
    g = magnetized_mode(maxwellian_ev, 0.7)
    with pytest.raises(UndefinedProductError):
        inner_product(a, g)


def test_distinct_real_modes_orthogonal(maxwellian_ev):
    a = adjoint_mode(maxwellian_ev, 0.7)
    g = magnetized_mode(maxwellian_ev, 1.3)
    assert abs(inner_product(a, g)) < 1e-6


def test_unmagnetized_dispatch_identical():
    ev = DispersionEvaluator(EquilibriumDistribution.maxwellian(), WaveConfig(0.0, 0.5),
                             VelocityGrid(64, 12, 6.0, 0))
    a = magnetized_mode(ev, 0.7).sample(0.2).harmonics
    b = unmagnetized_mode(ev, 0.7).sample(0.2).harmonics
    assert np.array_equal(a, b)
