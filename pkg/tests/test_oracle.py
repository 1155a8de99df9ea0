import numpy as np
import pytest

from vlasov_spectral.equilibrium import EquilibriumDistribution, WaveConfig
from vlasov_spectral.grid import PerturbationField, VelocityGrid
from vlasov_spectral.initial import emit_initial_field
from vlasov_spectral.oracle import DiscreteOperator, StepSizeError, apply_K, fit_rate, integrate_direct
from vlasov_spectral.special import bessel_table

MAX = EquilibriumDistribution.maxwellian()


def test_diagonal_without_plasma_or_kperp():
    wave = WaveConfig(0.0, 0.5, 0.0, 1.0)
    g = VelocityGrid(16, 8, 6.0, 2)
    op = DiscreteOperator(wave, MAX, g)
    f = emit_initial_field({"family": "random-smooth", "seed": 4, "m_span": 2}, g, wave)
    Kf = apply_K(op, f)
    vpar, _ = g.mesh()
    for m in g.m_values:
        assert np.allclose(Kf.harmonic(m), (m * 1.0 + 0.5 * vpar) * f.harmonic(m), atol=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_discrete_adjointness(seed):
    wave = WaveConfig(0.5, 0.4, 1.0, 1.2)
    g = VelocityGrid(24, 12, 7.0, 3)
    op = DiscreteOperator(wave, MAX, g)
    f = emit_initial_field({"family": "random-smooth", "seed": seed, "m_span": 3}, g, wave)
    h = emit_initial_field({"family": "random-smooth", "seed": seed + 10, "m_span": 2}, g, wave)
    lhs = apply_K(op, f, adjoint=True).inner(h)
    rhs = f.inner(apply_K(op, h))
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_gyro_independent_field_couples_to_neighbours():
    wave = WaveConfig(0.5, 0.4, 1.0, 1.0)
    g = VelocityGrid(16, 8, 6.0, 2)
    f = emit_initial_field({"family": "single-harmonic", "m": 0}, g, wave)
    Kf = apply_K(DiscreteOperator(wave, MAX, g), f)
    assert np.abs(Kf.harmonic(1)).max() > 0 and np.abs(Kf.harmonic(-1)).max() > 0
    assert np.abs(Kf.harmonic(2)).max() == 0


def test_grid_mismatch_rejected():
    wave = WaveConfig(0.5, 0.4, 1.0, 1.0)
    op = DiscreteOperator(wave, MAX, VelocityGrid(16, 8, 6.0, 1))
    with pytest.raises(ValueError):
        apply_K(op, PerturbationField.zeros(VelocityGrid(16, 8, 6.0, 2)))


def test_orbit_function_is_eigenfunction_of_streaming():
    # exp(-i a sin(theta) + i p theta) g(v) is invariant along the helical orbit;
    # the free operator multiplies it by p w0 + k_par v_par
    wave = WaveConfig(0.6, 0.4, 0.0, 1.0)
    M = 30
    g = VelocityGrid(12, 10, 4.0, M)
    vpar, vperp = g.mesh()
    a = wave.k_perp * g.v_perp / wave.omega_0
    J = bessel_table(2 * M + 2, a)
    p = 1
    prof = np.exp(-0.5 * (vpar**2 + vperp**2))
    h = np.array([J[p - m + 2 * M + 2][None, :] * prof for m in g.m_values])
    f = PerturbationField(h, g, wave)
    Kf = apply_K(DiscreteOperator(wave, MAX, g), f)
    lam = p * wave.omega_0 + wave.k_par * vpar
    assert np.max(np.abs(Kf.harmonics - lam[None] * h)) < 1e-12


def _free_setup():
    wave = WaveConfig(0.0, 0.5, 0.0, 1.0)
    g = VelocityGrid(16, 8, 6.0, 1)
    op = DiscreteOperator(wave, MAX, g)
    f = emit_initial_field({"family": "random-smooth", "seed": 5}, g, wave)
    vpar, _ = g.mesh()
    exact = np.array([f.harmonic(m) * np.exp(-1j * (m + 0.5 * vpar) * 4.0) for m in g.m_values])
    return op, f, exact


def test_free_streaming_exact_and_fourth_order():
    op, f, exact = _free_setup()
    errs = []
    for dt in (0.2, 0.1, 0.05):
        snap = integrate_direct(op, f, t_final=4.0, dt=dt)[0]
        errs.append(np.max(np.abs(snap.field.harmonics - exact)))
    order = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(order - 4) < 0.3)
    assert errs[-1] < 1e-5


def test_snapshots_hit_requested_times():
    op, f, _ = _free_setup()
    snaps = integrate_direct(op, f, times=[0.0, 0.33, 1.0], dt=0.1)
    assert [s.t for s in snaps] == [0.0, 0.33, 1.0]
    assert np.array_equal(snaps[0].field.harmonics, f.harmonics)
    assert snaps[1].moment == snaps[1].field.moment()


def test_step_size_guard():
    op, f, _ = _free_setup()
    with pytest.raises(StepSizeError):
        integrate_direct(op, f, t_final=1.0, dt=5.0)
    with pytest.raises(ValueError):
        integrate_direct(op, f, times=[-1.0])


def test_fit_exact_exponential():
    t = np.linspace(0, 20, 201)
    z = 1.4 - 0.15j
    fit = fit_rate(t, 2.0 * np.exp(-1j * z * t))
    assert abs(fit.rate - z) < 1e-10
    assert fit.residual < 1e-12 and not fit.low_confidence


def test_fit_constant_signal():
    fit = fit_rate(np.linspace(0, 5, 20), np.full(20, 3.0 + 0j))
    assert abs(fit.rate) < 1e-14 and fit.residual < 1e-14


def test_fit_two_modes():
    t = np.linspace(0, 30, 301)
    z1, z2 = 1.2 - 0.05j, 2.0 - 0.8j
    sig = np.exp(-1j * z1 * t) + 3 * np.exp(-1j * z2 * t)
    mixed = fit_rate(t, sig, window=(0, 5))
    late = fit_rate(t, sig, window=(20, 30))
    assert mixed.low_confidence
    assert abs(late.rate - z1) < 1e-3 * abs(z1)
    prony = fit_rate(t, sig, n_modes=2)
    assert abs(prony.rate - z1) < 1e-8 and abs(prony.rates[1] - z2) < 1e-8
    assert abs(prony.amplitudes[1] - 3) < 1e-8


def test_fit_requires_samples():
    with pytest.raises(ValueError):
        fit_rate([0.0, 1.0], [1.0, 2.0])
