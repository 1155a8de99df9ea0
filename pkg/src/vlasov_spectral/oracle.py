"""Brute-force ground truth: the discretized operator and a direct time integrator.

The gyro angle is treated spectrally (harmonics ``m = -m_max..m_max``) and
velocity by collocation on the grid nodes; the moment uses the grid's
quadrature weights, which keeps discrete adjointness exact up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import EquilibriumDistribution, WaveConfig, eta_par, eta_perp
from .grid import PerturbationField, VelocityGrid


class StepSizeError(RuntimeError):
    pass


@dataclass
class DiscreteOperator:
    """``K_h`` acting on harmonic fields.

    ``(K f)_m = (m w0 + k_par v_par) f_m + (k_perp v_perp / 2)(f_{m-1} + f_{m+1})
    - eta_m int f d^3v`` with ``eta_0 = eta_par`` and ``eta_{+-1} = eta_perp / 2``.
    """

    wave: WaveConfig
    equilibrium: EquilibriumDistribution
    grid: VelocityGrid

    def __post_init__(self):
        g, w = self.grid, self.wave
        vpar, vperp = g.mesh()
        self.diag = (g.m_values[:, None, None] * w.omega_0 + w.k_par * vpar[None])
        self.half_kperp = 0.5 * w.k_perp * vperp
        e_par = eta_par(self.equilibrium, w, vperp, vpar)
        e_perp = eta_perp(self.equilibrium, w, vperp, vpar)
        eta = np.zeros(g.shape)
        eta[g.m_max] = e_par
        if g.m_max >= 1:
            eta[g.m_max - 1] = 0.5 * e_perp
            eta[g.m_max + 1] = 0.5 * e_perp
        self.eta = eta

    def eta_field(self):
        return PerturbationField(self.eta.astype(complex), self.grid, self.wave)

    def _stream(self, h):
        out = self.diag * h
        if self.grid.m_max >= 1:
            out[1:] += self.half_kperp * h[:-1]
            out[:-1] += self.half_kperp * h[1:]
        return out

    def apply_array(self, h, adjoint=False):
        g = self.grid
        out = self._stream(h)
        if adjoint:
            # int eta f d^3v with eta real: sum_m eta_{-m} f_m, eta_{-m} = eta_m here
            coupling = g.integrate(np.sum(self.eta * h, axis=0))
            out[g.m_max] -= coupling
        else:
            out -= self.eta * g.integrate(h[g.m_max])
        return out

    def spectral_radius_bound(self):
        g, w = self.grid, self.wave
        return (g.m_max * w.omega_0 + w.k_par * g.v_cut + w.k_perp * g.v_cut
                + np.sqrt(np.sum(np.abs(self.eta) ** 2 * g.measure) * np.sum(g.measure)))


def apply_K(op: DiscreteOperator, f: PerturbationField, adjoint=False) -> PerturbationField:
    if f.grid != op.grid:
        raise ValueError("grid mismatch between operator and field")
    return PerturbationField(op.apply_array(f.harmonics, adjoint), f.grid, f.wave)


@dataclass
class Snapshot:
    t: float
    field: PerturbationField
    moment: complex


RK4_IMAG_LIMIT = 2.8


def integrate_direct(op: DiscreteOperator, f0: PerturbationField, t_final=None, dt=0.01,
                     times=None, growth_bound=1e8):
    """Classical RK4 for ``i df/dt = K_h f``; returns snapshots at ``times``.

    ``dt`` is shortened inside each output interval so every requested time
    is hit exactly.  Raises ``StepSizeError`` when ``dt`` exceeds the RK4
    stability bound on the imaginary axis or the norm blows past
    ``growth_bound``.
    """
    if times is None:
        times = [t_final]
    times = np.asarray(sorted(float(t) for t in times))
    if times[0] < 0:
        raise ValueError("times must be non-negative")
    rho = op.spectral_radius_bound()
    if dt * rho > RK4_IMAG_LIMIT:
        raise StepSizeError(f"dt={dt} violates stability: dt*rho={dt * rho:.3f} > {RK4_IMAG_LIMIT}")

    def rhs(h):
        return -1j * op.apply_array(h)

    h = f0.harmonics.copy()
    norm0 = np.sqrt(np.sum(np.abs(h) ** 2)) or 1.0
    t = 0.0
    out = []
    for target in times:
        span = target - t
        if span > 0:
            n = int(np.ceil(span / dt - 1e-12))
            step = span / n
            for _ in range(n):
                k1 = rhs(h)
                k2 = rhs(h + 0.5 * step * k1)
                k3 = rhs(h + 0.5 * step * k2)
                k4 = rhs(h + step * k3)
                h = h + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(h)) or np.sqrt(np.sum(np.abs(h) ** 2)) > growth_bound * norm0:
                raise StepSizeError(f"solution blew up before t={target}")
            t = target
        fld = PerturbationField(h.copy(), f0.grid, f0.wave)
        out.append(Snapshot(float(target), fld, fld.moment()))
    return out


@dataclass
class RateFit:
    """Fitted complex frequency ``z = omega + i*gamma_signed`` (``e^{-i z t}``)."""

    rate: complex
    residual: float
    low_confidence: bool
    rates: np.ndarray = field(default_factory=lambda: np.array([]))
    amplitudes: np.ndarray = field(default_factory=lambda: np.array([]))


def fit_rate(times, moment, window=None, n_modes=1, threshold=1e-3):
    """Fit ``moment(t) ~ sum_j A_j exp(-i z_j t)`` over ``window``.

    One mode: least squares on ``log moment`` (log-modulus slope gives
    ``Im z``, unwrapped phase slope gives ``-Re z``).  Several modes: linear
    prediction (Prony) on uniformly spaced samples.  ``rate`` is the least
    damped fitted frequency (ties broken toward positive ``Re z``).
    ``residual`` is the relative RMS misfit; above ``threshold`` the fit is
    flagged ``low_confidence``.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(moment, dtype=complex)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, m = t[sel], m[sel]
    if t.size < 2 * n_modes + 2:
        raise ValueError("not enough samples for the requested fit")
    if n_modes == 1:
        if np.any(m == 0):
            return RateFit(0j, np.inf, True)
        logm = np.log(np.abs(m))
        phase = np.unwrap(np.angle(m))
        A = np.vstack([t, np.ones_like(t)]).T
        (im_z, c_re), *_ = np.linalg.lstsq(A, logm, rcond=None)
        (neg_re, c_im), *_ = np.linalg.lstsq(A, phase, rcond=None)
        z = complex(-neg_re, im_z)
        model = np.exp(c_re + 1j * c_im - 1j * z * t)
        resid = np.linalg.norm(model - m) / np.linalg.norm(m)
        return RateFit(z, float(resid), bool(resid > threshold), np.array([z]),
                       np.array([np.exp(c_re + 1j * c_im)]))

    dts = np.diff(t)
    if np.ptp(dts) > 1e-9 * dts.mean():
        raise ValueError("multi-mode fit needs uniformly spaced samples")
    dt = dts.mean()
    p = n_modes
    rows = np.array([m[i:i + p] for i in range(len(m) - p)])
    rhs = m[p:]
    coef, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    poly = np.concatenate([[1.0], -coef[::-1]])
    roots = np.roots(poly)
    z = 1j * np.log(roots) / dt
    V = np.exp(-1j * np.outer(t - t[0], z))
    amps, *_ = np.linalg.lstsq(V, m, rcond=None)
    resid = np.linalg.norm(V @ amps - m) / np.linalg.norm(m)
    amps = amps * np.exp(1j * z * t[0])
    order = np.lexsort((-z.real, -z.imag))
    z, amps = z[order], amps[order]
    return RateFit(complex(z[0]), float(resid), bool(resid > threshold), z, amps)
