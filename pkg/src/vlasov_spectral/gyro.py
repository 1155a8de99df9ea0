"""Gyro-orbit basis used by the harmonic-series formulas.

Per velocity node the streaming-plus-gyration operator
``k_par v_par + k_perp v_perp cos(theta) - i w0 d/dtheta`` is diagonal in the
functions ``psi_p = exp(-i a sin(theta)) exp(i p theta)``, ``a = k_perp v_perp / w0``,
with eigenvalue ``lambda_p = p w0 + k_par v_par``.  Harmonic coefficients and
psi coefficients are related by the real orthogonal matrix
``U[p, m] = J_{p-m}(a)`` (Neumann addition theorem), so the theta integral of
``conj(psi_p) psi_q`` is ``2 pi delta_pq``.
"""

from __future__ import annotations

import numpy as np

from .equilibrium import eta_par, eta_perp
from .special import bessel_table


def bessel_argument(wave, v_perp):
    v_perp = np.asarray(v_perp, dtype=float)
    if wave.k_perp == 0:
        return np.zeros_like(v_perp)
    if wave.omega_0 == 0:
        raise NotImplementedError(
            "unmagnetized harmonic machinery needs k along the symmetry axis (k_perp = 0)")
    return wave.k_perp * v_perp / wave.omega_0


def auto_harmonics(a_max, tol=1e-12, cap=200):
    """Smallest ``n`` with ``|J_m(a)| < tol`` for every ``m >= n`` and ``|a| <= a_max``."""
    a_max = float(abs(a_max))
    if a_max == 0:
        return 0
    probe = int(a_max + 30 + 10 * a_max ** (1 / 3))
    x = np.linspace(0.0, a_max, 64)
    tab = np.abs(bessel_table(probe, x))[probe:]
    big = np.nonzero(tab.max(axis=1) >= tol)[0]
    n = int(big[-1] + 1) if big.size else 0
    if n > cap:
        raise ValueError(f"harmonic truncation needs n_max={n} > cap {cap}; "
                         "use the analytic evaluator or a larger cap")
    return n


class GyroBasis:
    """Precomputed psi-basis data for a grid, wave and equilibrium."""

    def __init__(self, grid, wave, equilibrium, n_extra="auto", cap=200):
        self.grid = grid
        self.wave = wave
        self.equilibrium = equilibrium
        self.a = bessel_argument(wave, grid.v_perp)
        if n_extra == "auto":
            n_extra = auto_harmonics(self.a.max(initial=0.0), cap=cap) + 2
        self.n_extra = int(n_extra)
        M = grid.m_max
        self.P = M + self.n_extra
        P = self.P
        self.p_values = np.arange(-P, P + 1)
        order = 2 * P + 1
        self.J = bessel_table(order, self.a)  # row n + order holds J_n
        self._order = order
        # U[p, m, i] = J_{p-m}(a_i)
        idx = self.p_values[:, None] - grid.m_values[None, :] + order
        self.U = self.J[idx]
        self.Jp = self.J[self.p_values + order]  # (2P+1, n_perp)
        self.lam = (self.p_values[:, None] * wave.omega_0 + wave.k_par * grid.v_par[None, :])
        self.eta_psi = self.eta_coefficients(grid.v_par)
        self.one_psi = np.broadcast_to(self.Jp[:, None, :], (2 * P + 1, grid.n_par, grid.n_perp))

    def bessel(self, n):
        return self.J[np.asarray(n) + self._order]

    def eta_coefficients(self, v_par):
        """psi coefficients of ``eta`` at arbitrary (possibly complex) ``v_par``.

        ``c_p = J_p eta_par + (J_{p-1} + J_{p+1}) eta_perp / 2``; shape
        ``(2P+1, len(v_par), n_perp)``.
        """
        v_par = np.atleast_1d(v_par)
        vp = self.grid.v_perp[None, :]
        vz = v_par[:, None]
        e_par = eta_par(self.equilibrium, self.wave, vp, vz)
        e_perp = eta_perp(self.equilibrium, self.wave, vp, vz)
        Jp = self.Jp[:, None, :]
        Jm1 = self.bessel(self.p_values - 1)[:, None, :]
        Jp1 = self.bessel(self.p_values + 1)[:, None, :]
        return Jp * e_par[None] + 0.5 * (Jm1 + Jp1) * e_perp[None]

    def eta_row(self, n, v_par):
        """Row ``n`` (index into ``p_values``) of :meth:`eta_coefficients`."""
        v_par = np.atleast_1d(v_par)
        vp = self.grid.v_perp[None, :]
        vz = v_par[:, None]
        p = self.p_values[n]
        e_par = eta_par(self.equilibrium, self.wave, vp, vz)
        e_perp = eta_perp(self.equilibrium, self.wave, vp, vz)
        return (self.Jp[n] * e_par
                + 0.5 * (self.bessel(p - 1) + self.bessel(p + 1)) * e_perp)

    def line_row(self, n, coeff_row):
        """Perpendicular integral ``2 pi int v_perp J_p c dv_perp`` for one harmonic."""
        g = self.grid
        return 2.0 * np.pi * (coeff_row @ (g.w_perp * g.v_perp * self.Jp[n]))

    def to_psi(self, harmonics):
        return np.einsum("pmi,mji->pji", self.U, harmonics)

    def from_psi(self, coeffs):
        return np.einsum("pmi,pji->mji", self.U, coeffs)

    def moment_weights(self, coeffs):
        """Fold d^3v weights into psi coefficients: ``sum_i W_ji J_p(a_i) c_pji``.

        The result, shape ``(2P+1, n_par)``, gives ``int d^3v`` of
        ``sum_p psi_p c_p / (z - lambda_p)`` as ``sum mu / (z - lam)``.
        """
        return np.einsum("ji,pi,pji->pj", self.grid.measure, self.Jp, coeffs)

    def line_density(self, coeffs_at):
        """``h_p(v_par) = 2 pi int v_perp J_p c_p dv_perp`` from (2P+1, n, n_perp) coefficients."""
        g = self.grid
        return 2.0 * np.pi * np.einsum("i,pi,pni->pn", g.w_perp * g.v_perp, self.Jp, coeffs_at)
