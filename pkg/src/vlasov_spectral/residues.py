"""Residue-sum evolution through the plus-continued resolvent.

The field moment ``phi(t)`` has Laplace image ``D(z) = M(z) / eps(z)`` with
``M = int R0 f``.  Pushing the inversion line below the real axis with the
plus continuation of ``D`` leaves

    phi(t) = sum_j Res_{z_j} + (line Im z = c) + (asymptotic part),

where the asymptotic part ``S(z) = sum_k s_k / (z - z_s)^(k+1)`` matches the
first Laurent coefficients of ``D`` so the line integrand decays fast enough
to truncate.  Every piece is an exponential (times a polynomial), so the
field follows from Duhamel's formula in closed form per resonance
frequency ``lam``.
"""

from __future__ import annotations

from math import comb, factorial

import numpy as np
from scipy.special import ive

from .dispersion import DispersionEvaluator, find_roots, newton
from .equilibrium import eta_bar
from .grid import Field1D, Grid1D, PerturbationField, VelocityGrid
from .gyro import GyroBasis

N_LAURENT = 4
CIRCLE_RADIUS = 1e-3


class MissingAnalyticError(ValueError):
    """The residue-sum mode needs the initial field off the grid."""


def _laurent(lam, mu_f, mu_eta, n):
    """Coefficients ``d_k`` of ``D = sum_k d_k z^{-k-1}`` from grid moments."""
    m = [np.sum(mu_f * lam**k) for k in range(n)]
    e = [np.sum(mu_eta * lam**k) for k in range(n)]
    d = []
    for k in range(n):
        d.append(m[k] - sum(d[j] * e[k - 1 - j] for j in range(k)))
    return np.array(d)


def _pole_coefficients(d, z_s):
    """``s_k`` with ``sum_k s_k (z - z_s)^{-k-1}`` sharing the Laurent head ``d``."""
    s = []
    for n in range(len(d)):
        s.append(d[n] - sum(comb(n, k) * z_s ** (n - k) * s[k] for k in range(n)))
    return np.array(s)


def _pole_sum(z, lam, mu, chunk=256):
    z = np.atleast_1d(z)
    out = np.empty(z.size, complex)
    for i in range(0, z.size, chunk):
        out[i:i + chunk] = (1.0 / (z[i:i + chunk, None] - lam[None, :])) @ mu
    return out


def _exp_kernel(zeta, amp, lam, times, chunk=128):
    """``sum_q amp_q (exp(-i zeta_q t) - exp(-i lam t)) / (zeta_q - lam)``; shape (lam, t)."""
    out = np.zeros((lam.size, times.size), complex)
    ez = np.exp(-1j * np.outer(zeta, times))          # (q, t)
    el = np.exp(-1j * np.outer(lam, times))           # (lam, t)
    for i in range(0, lam.size, chunk):
        inv = 1.0 / (zeta[None, :] - lam[i:i + chunk, None])   # (lam, q)
        out[i:i + chunk] = (inv * amp) @ ez - (inv @ amp)[:, None] * el[i:i + chunk]
    return out


def _pole_kernel(s, z_s, lam, times):
    """Contribution of ``sum_k s_k (z - z_s)^{-k-1}`` to the per-``lam`` kernel."""
    out = np.zeros((lam.size, times.size), complex)
    el = np.exp(-1j * np.outer(lam, times))
    es = np.exp(-1j * z_s * times)[None, :]
    u = (lam - z_s)[:, None]
    for k, sk in enumerate(s):
        term = el / u ** (k + 1)
        for j in range(k + 1):
            term = term + ((-1j * times) ** j / factorial(j))[None, :] * es \
                * (-1) ** (k - j) / (-u) ** (k - j + 1)
        out += sk * term
    return out


def _phi_S(s, z_s, times):
    return sum(sk * (-1j * times) ** k / factorial(k) for k, sk in enumerate(s)) * np.exp(-1j * z_s * times)


class _ContinuedMoments:
    """``D(z) = M(z) / eps(z)`` with both integrals plus-continued."""

    def __init__(self, lam, mu_f, mu_eta, res_f, res_eta):
        self.lam, self.mu_f, self.mu_eta = lam, mu_f, mu_eta
        self.res_f, self.res_eta = res_f, res_eta

    def parts(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        M = _pole_sum(z, self.lam, self.mu_f)
        E = 1.0 + _pole_sum(z, self.lam, self.mu_eta)
        below = z.imag < 0
        if np.any(below):
            zb = z[below]
            M[below] += self.res_f(zb)
            E[below] += self.res_eta(zb)
        return M, E

    def D(self, z):
        M, E = self.parts(z)
        return M / E

    def epsilon(self, z):
        return self.parts(z)[1]


def root_window(ev, floor_tol=1e-10):
    """Half-width of the real window outside which ``eps`` is numerically 1.

    Uses the significant cyclotron harmonics (``I_n(b) e^{-b}`` above
    ``floor_tol``), six parallel thermal widths and twice the plasma frequency.
    """
    w = ev.wave
    comps = ev.equilibrium.components
    spread = max(abs(c.drift) * w.k_par + 6.0 * w.k_par * c.vt_par
                 + (0.0 if w.magnetized else 6.0 * w.k_perp * c.vt_perp) for c in comps)
    n_sig = 0
    if w.magnetized and w.k_perp > 0:
        for c in comps:
            b = (w.k_perp * c.vt_perp / w.omega_0) ** 2
            n = np.arange(0, 400)
            sig = np.nonzero(ive(n, b) > floor_tol)[0]
            n_sig = max(n_sig, int(sig[-1]) if sig.size else 0)
    return (n_sig + 1) * w.omega_0 + spread + 2.0 * w.omega_p * max(1.0, w.k)


def _locate_roots(eps_func, ev, x_span, c, b_top):
    """Roots of the continued dispersion function between the lower line and ``b_top``."""
    an = DispersionEvaluator(ev.equilibrium, ev.wave, ev.grid, continuation="plus", method="analytic")
    W = root_window(ev)
    region = (max(x_span[0], -W), min(x_span[1], W), c + 0.02, b_top)
    found = find_roots(an, region)
    roots = []
    for r in found:
        if not r.converged or not (region[0] <= r.z.real <= region[1] and region[2] <= r.z.imag <= region[3]):
            continue
        z, res = newton(eps_func, r.z)
        if res > 1e-8 or abs(z - r.z) > 1e-3:
            z = r.z  # keep the analytic root; grid polish failed near the axis
        roots.append(complex(z))
    return roots, found.count


def _residue(D, z0, r=CIRCLE_RADIUS, n=32):
    phi = 2 * np.pi * np.arange(n) / n
    zc = z0 + r * np.exp(1j * phi)
    return complex(np.mean(D(zc) * r * np.exp(1j * phi)))


def _residue_kernel(ev, cont, lam, times, spec, x_span, d):
    c = spec.offset_minus if spec.offset_minus is not None else -1.0
    b_top = spec.offset_plus if spec.offset_plus is not None else 4.0
    roots, count = _locate_roots(cont.epsilon, ev, x_span, c, b_top)
    # keep the line away from roots
    while roots and min(abs(z.imag - c) for z in roots) < 0.05:
        c -= 0.1
    rho = np.array([_residue(cont.D, z) for z in roots], complex)
    z_s = 0.5 * (x_span[0] + x_span[1]) + 1j * (c - 1.0)
    s = _pole_coefficients(d, z_s)

    t_max = max(float(times.max(initial=0.0)), 1.0)
    X = max(abs(x_span[0]), abs(x_span[1])) + 40.0
    h = min(0.5, 4.0 / t_max)
    n_pan = int(np.ceil(2 * X / h))
    xg, wg = np.polynomial.legendre.leggauss(spec.n_nodes)
    edges = np.linspace(-X, X, n_pan + 1)
    half = 0.5 * np.diff(edges)
    xq = (edges[:-1, None] + half[:, None] * (xg[None, :] + 1.0)).ravel()
    wq = (half[:, None] * wg[None, :]).ravel()
    zeta = xq + 1j * c
    Sq = sum(sk / (zeta - z_s) ** (k + 1) for k, sk in enumerate(s))
    amp = -wq * (cont.D(zeta) - Sq) / (2j * np.pi)

    zr = np.array(roots, complex)
    kern = _exp_kernel(zr, rho, lam, times) + _exp_kernel(zeta, amp, lam, times) \
        + _pole_kernel(s, z_s, lam, times)
    phi = (np.exp(-1j * np.outer(times, zr)) @ rho if zr.size else 0.0) \
        + np.exp(-1j * np.outer(times, zeta)) @ amp + _phi_S(s, z_s, times)
    diag = {"roots": [[z.real, z.imag] for z in roots], "residues": [[r.real, r.imag] for r in rho],
            "root_count": int(count), "offset_minus": float(c), "line_nodes": int(zeta.size),
            "line_halfwidth": float(X), "moment_t0_mismatch": float(abs(
                (rho.sum() + amp.sum() + s[0]) - d[0]) / max(abs(d[0]), 1e-300))}
    return kern, phi, diag


def _aux_grid(grid, refine):
    return VelocityGrid(refine * grid.n_par, grid.n_perp, grid.v_cut, grid.m_max)


def evolve_residue_sum(ev, f0: PerturbationField, times, spec, refine=4):
    """Residue-sum evolution of a 3D field; needs ``f0.analytic``."""
    from .resolvent import ResolventOutput, series_resolvent

    if f0.analytic is None:
        raise MissingAnalyticError("residue-sum evolution needs an analytic initial field")
    wave = ev.wave
    S = series_resolvent(ev, f0.grid)
    B = S.basis
    # continued moments on a refined parallel grid
    aux = _aux_grid(S.grid_out, refine)
    Ba = GyroBasis(aux, wave, ev.equilibrium, n_extra=S.n_extra)
    m_in = f0.grid.m_max
    va, pa = aux.mesh()
    fa = np.zeros(aux.shape, complex)
    fa[S.n_extra:S.n_extra + 2 * m_in + 1] = f0.analytic(np.arange(-m_in, m_in + 1), va, pa)
    lam_a = Ba.lam.reshape(-1)
    mu_f = Ba.moment_weights(Ba.to_psi(fa)).reshape(-1)
    mu_eta = Ba.moment_weights(Ba.eta_psi).reshape(-1)

    def line_f(v_rows):
        # psi coefficients of f at complex v_par, one row per harmonic p
        h = np.zeros((aux.shape[0], v_rows.size, aux.n_perp), complex)
        h[S.n_extra:S.n_extra + 2 * m_in + 1] = f0.analytic(
            np.arange(-m_in, m_in + 1), v_rows[:, None], aux.v_perp[None, :])
        return h

    def residue_term(which):
        def term(z):
            out = np.zeros(z.shape, complex)
            if wave.k_par == 0:
                return out
            for n, p in enumerate(Ba.p_values):
                v = (z - p * wave.omega_0) / wave.k_par
                if which == "eta":
                    row = Ba.eta_row(n, v)
                else:
                    row = np.einsum("mi,mqi->qi", Ba.U[n], line_f(v))
                out += Ba.line_row(n, row)
            return -2j * np.pi / wave.k_par * out
        return term

    cont = _ContinuedMoments(lam_a, mu_f, mu_eta, residue_term("f"), residue_term("eta"))
    d = _laurent(lam_a, mu_f, mu_eta, N_LAURENT)
    lam = B.lam.reshape(-1)
    span = (lam.min() - 1.0, lam.max() + 1.0)
    kern, phi, diag = _residue_kernel(ev, cont, lam, times, spec, span, d)
    c = S.psi(f0)
    outs = []
    for k, t in enumerate(times):
        dpsi = c * np.exp(-1j * B.lam * t)[:, :, None] - B.eta_psi * kern[:, k].reshape(B.lam.shape)[:, :, None]
        fld = S.to_field(dpsi)
        dg = dict(diag, continued_moment=[phi[k].real, phi[k].imag])
        outs.append(ResolventOutput(fld, fld.moment(), dg, float(t)))
    return outs


def evolve_residue_sum_1d(ev, f0: Field1D, times, spec, refine=4):
    from .resolvent import Output1D

    if f0.analytic is None:
        raise MissingAnalyticError("residue-sum evolution needs an analytic initial field")
    wave = ev.wave
    k = wave.k
    g = f0.grid
    aux = Grid1D(refine * g.n, g.v_cut)
    lam_a = k * aux.u
    mu_f = aux.w * f0.analytic(aux.u)
    mu_eta = aux.w * eta_bar(ev.equilibrium, wave, aux.u)
    cont = _ContinuedMoments(
        lam_a, mu_f, mu_eta,
        lambda z: -2j * np.pi / k * f0.analytic(z / k),
        lambda z: -2j * np.pi / k * eta_bar(ev.equilibrium, wave, z / k))
    d = _laurent(lam_a, mu_f, mu_eta, N_LAURENT)
    lam = k * g.u
    span = (lam.min() - 1.0, lam.max() + 1.0)
    kern, phi, diag = _residue_kernel(ev, cont, lam, times, spec, span, d)
    etab = eta_bar(ev.equilibrium, wave, g.u)
    outs = []
    for j, t in enumerate(times):
        fld = Field1D(f0.values * np.exp(-1j * lam * t) - etab * kern[:, j], g)
        outs.append(Output1D(fld, fld.moment(), dict(diag, continued_moment=[phi[j].real, phi[j].imag]),
                             float(t)))
    return outs
