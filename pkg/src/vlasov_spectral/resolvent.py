"""Resolvent ``R(z) = (z - K)^{-1}`` and contour-integral time evolution.

Two closed forms are provided.  The harmonic series diagonalises the
free-streaming-plus-gyration part per velocity node in the gyro-orbit basis
(see :mod:`vlasov_spectral.gyro`); the orbit form integrates the
unperturbed-orbit propagator over ``tau``.  Both close the moment coupling
with the rank-one formula

    R f = R0 f - R0 eta * (int R0 f) / (1 + int R0 eta).

Fields are extended by ``n_extra`` harmonics on output because the
perpendicular streaming shifts harmonics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dispersion import BranchCutError, DispersionEvaluator, find_roots, newton
from .equilibrium import eta_bar, eta_par, eta_perp
from .grid import Field1D, PerturbationField, VelocityGrid, gauss_legendre
from .gyro import GyroBasis, auto_harmonics, bessel_argument


class AtEigenvalueError(ValueError):
    """The resolvent was requested at (or numerically at) an eigenvalue."""


class IncompleteContourError(RuntimeError):
    """The contour quadrature failed to reproduce the identity at t = 0."""


class ContourMode(str, Enum):
    TWO_LINE = "two-line"
    RESIDUE_SUM = "residue-sum"


@dataclass(frozen=True)
class ContourSpec:
    """Numerical description of the inversion contour.

    ``two-line``: the lines ``Im z = offset_plus`` and ``Im z = offset_minus``
    over ``re_span``, closed by vertical sides (the discretised operator has
    a bounded spectrum, so the closed rectangle is exact), integrated with
    ``n_nodes``-point Gauss-Legendre panels.  Offsets of ``None`` are chosen
    from the roots of the dispersion function.

    ``residue-sum``: residues at the roots of the plus-continued dispersion
    function above ``offset_minus`` plus the line ``Im z = offset_minus``.
    """

    offset_plus: float | None = None
    offset_minus: float | None = None
    re_span: tuple | None = None
    n_nodes: int = 16
    mode: ContourMode = ContourMode.TWO_LINE
    tol: float = 1e-6
    max_refine: int = 5

    def __post_init__(self):
        object.__setattr__(self, "mode", ContourMode(self.mode))
        if self.offset_plus is not None and not self.offset_plus > 0:
            raise ValueError("offset_plus must be positive")
        if self.offset_minus is not None and not self.offset_minus < 0:
            raise ValueError("offset_minus must be negative")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")

    def to_dict(self):
        return {"offset_plus": self.offset_plus, "offset_minus": self.offset_minus,
                "re_span": None if self.re_span is None else list(self.re_span),
                "n_nodes": self.n_nodes, "mode": self.mode.value, "tol": self.tol}


@dataclass
class ResolventOutput:
    field: PerturbationField
    moment: complex
    diagnostics: dict = field(default_factory=dict)
    t: float | None = None


def _harmonic_tail(h):
    """Edge-harmonic magnitude relative to the peak, per side."""
    peak = np.abs(h).max()
    if peak == 0:
        return {"low": 0.0, "high": 0.0}
    return {"low": float(np.abs(h[0]).max() / peak), "high": float(np.abs(h[-1]).max() / peak)}


def _n_extra(ev, grid):
    req = ev._n_max_request
    if req != "auto":
        return int(req)
    a = bessel_argument(ev.wave, grid.v_perp)
    return auto_harmonics(a.max(initial=0.0), cap=ev.cap) + 2


class SeriesResolvent:
    """Harmonic-series resolvent on a fixed input grid.

    Input fields with harmonics ``|m| <= m_max`` map to output fields on
    ``grid_out`` with ``m_max + n_extra`` harmonics.
    """

    def __init__(self, ev: DispersionEvaluator, grid: VelocityGrid):
        self.ev = ev
        self.wave = ev.wave
        self.grid_in = grid
        self.n_extra = _n_extra(ev, grid)
        self.grid_out = grid.with_m_max(grid.m_max + self.n_extra)
        self.basis = GyroBasis(self.grid_out, ev.wave, ev.equilibrium, n_extra=self.n_extra)
        B = self.basis
        self.mu_eta = B.moment_weights(B.eta_psi)
        # int eta * g for g = sum_p psi_p d_p is sum_p measure * c^eta_p d_p
        self.mu_eta_one = np.einsum("ji,pji->pj", self.grid_out.measure, B.eta_psi * B.Jp[:, None, :])

    def pad(self, f: PerturbationField):
        if f.grid != self.grid_in:
            raise ValueError("field grid does not match the resolvent grid")
        out = np.zeros(self.grid_out.shape, complex)
        out[self.n_extra:self.n_extra + f.harmonics.shape[0]] = f.harmonics
        return out

    def psi(self, f: PerturbationField):
        return self.basis.to_psi(self.pad(f))

    def epsilon(self, z):
        return 1.0 + np.sum(self.mu_eta / (z - self.basis.lam))

    def epsilon_adjoint(self, z):
        return 1.0 + np.sum(self.mu_eta_one / (z - self.basis.lam))

    def moment_psi(self, d):
        return complex(np.sum(self.basis.moment_weights(d)))

    def eta_moment_psi(self, d):
        return complex(np.einsum("ji,pji->", self.grid_out.measure, self.basis.eta_psi * d))

    def to_field(self, d):
        return PerturbationField(self.basis.from_psi(d), self.grid_out, self.wave)

    def apply(self, z, f, adjoint=False, eps_tol=1e-13):
        z = complex(z)
        if not np.isfinite(z):
            raise ValueError("z must be finite")
        if z.imag == 0:
            raise BranchCutError("the grid resolvent is singular on the real axis")
        B = self.basis
        inv = (1.0 / (z - B.lam))[:, :, None]
        d0 = self.psi(f) * inv
        if adjoint:
            eps = self.epsilon_adjoint(z)
            _check_eps(eps, eps_tol)
            d = d0 - B.one_psi * inv * (self.eta_moment_psi(d0) / eps)
        else:
            eps = self.epsilon(z)
            _check_eps(eps, eps_tol)
            d = d0 - B.eta_psi * inv * (self.moment_psi(d0) / eps)
        out = self.to_field(d)
        return ResolventOutput(out, out.moment(), {"epsilon": eps, "tail": _harmonic_tail(out.harmonics),
                                                   "n_extra": self.n_extra})


def _check_eps(eps, tol):
    if abs(eps) < tol:
        raise AtEigenvalueError(f"|eps(z)| = {abs(eps):.3e}: z is an eigenvalue")


def series_resolvent(ev: DispersionEvaluator, grid: VelocityGrid) -> SeriesResolvent:
    cache = ev.__dict__.setdefault("_series_cache", {})
    if grid not in cache:
        cache[grid] = SeriesResolvent(ev, grid)
    return cache[grid]


def apply_resolvent_series(ev: DispersionEvaluator, z, f: PerturbationField, adjoint=False):
    """``R(z) f`` (or the adjoint-operator resolvent) from the harmonic series.

    The result lives on ``f.grid`` extended by ``n_extra`` harmonics and is the
    exact inverse of ``z - K_h`` there, up to the Bessel truncation.
    """
    return series_resolvent(ev, f.grid).apply(z, f, adjoint)


# -- orbit form ----------------------------------------------------------

def _theta_points(m_needed):
    n = 8
    while n < 2 * m_needed + 2:
        n *= 2
    return n


def _free_orbit(wave, grid, harmonics, z, m_out, n_tau=None):
    """``R0(z) f = -i int_0^inf exp(i z tau) f(orbit(tau)) dtau`` on harmonics ``|m| <= m_out``."""
    m_in = (harmonics.shape[0] - 1) // 2
    vpar, vperp = grid.mesh()
    kappa = wave.k_par * vpar
    if not wave.magnetized:
        if wave.k_perp != 0:
            raise NotImplementedError("unmagnetized orbit form needs k_perp = 0")
        # straight orbits: the tau integral of exp(i (z - kappa) tau)
        tau_max = math.log(1e14) / z.imag
        span = tau_max * (abs(z.real) + np.abs(kappa).max() + abs(z.imag))
        n_tau = n_tau or int(span / 2) + 64
        tau, w = gauss_legendre(0.0, tau_max, n_tau)
        acc = np.zeros(kappa.shape, complex)
        for tk, wk in zip(tau, w):
            acc += wk * np.exp(1j * (z - kappa) * tk)
        out = np.zeros((2 * m_out + 1,) + kappa.shape, complex)
        out[m_out - m_in:m_out + m_in + 1] = -1j * acc * harmonics
        return out

    w0 = wave.omega_0
    a = wave.k_perp * vperp / w0
    period = 2.0 * np.pi / w0
    n_theta = _theta_points(m_out + int(np.ceil(a.max())) + 8)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    m_vals = np.arange(-m_in, m_in + 1)
    if n_tau is None:
        phase = period * (abs(z) + np.abs(kappa).max() + 2 * w0 * a.max() + m_in * w0)
        n_tau = int(phase / 2) + 48
    tau, wt = gauss_legendre(0.0, period, n_tau)
    sin_t = np.sin(theta)[:, None, None]
    acc = np.zeros((n_theta,) + kappa.shape, complex)
    for tk, wk in zip(tau, wt):
        rot = np.exp(1j * np.outer(theta - w0 * tk, m_vals))  # f(theta - w0 tau)
        f_rot = np.tensordot(rot, harmonics, axes=([1], [0]))
        ph = -1j * kappa * tk - 1j * a * (sin_t - np.sin(theta - w0 * tk)[:, None, None])
        acc += wk * np.exp(1j * z * tk + ph) * f_rot
    # sum over whole gyro periods: g(tau + T) = g(tau) exp(-i kappa T)
    acc *= -1j / (1.0 - np.exp(1j * (z - kappa) * period))
    coeff = np.fft.fft(acc, axis=0) / n_theta
    idx = np.arange(-m_out, m_out + 1) % n_theta
    return coeff[idx]


def apply_resolvent_orbit(ev: DispersionEvaluator, z, f: PerturbationField, n_tau=None):
    """``R(z) f`` by integrating along unperturbed orbits (requires ``Im z > 0``)."""
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("orbit form converges only for Im z > 0; use the series form")
    wave = ev.wave
    n_extra = _n_extra(ev, f.grid)
    grid_out = f.grid.with_m_max(f.grid.m_max + n_extra)
    r0f = _free_orbit(wave, f.grid, f.harmonics, z, grid_out.m_max, n_tau)
    eta = np.zeros((3,) + f.grid.shape[1:])
    vpar, vperp = f.grid.mesh()
    eta[1] = eta_par(ev.equilibrium, wave, vperp, vpar)
    eta[0] = eta[2] = 0.5 * eta_perp(ev.equilibrium, wave, vperp, vpar)
    r0eta = _free_orbit(wave, f.grid, eta.astype(complex), z, grid_out.m_max, n_tau)
    m0 = grid_out.m_max
    M = grid_out.integrate(r0f[m0])
    eps = 1.0 + grid_out.integrate(r0eta[m0])
    _check_eps(eps, 1e-13)
    out = PerturbationField(r0f - r0eta * (M / eps), grid_out, wave)
    return ResolventOutput(out, out.moment(), {"epsilon": eps, "tail": _harmonic_tail(out.harmonics),
                                               "n_extra": n_extra})


# -- contour evolution ---------------------------------------------------

def _rectangle(x0, x1, y0, y1, h, n):
    """Counter-clockwise Gauss-Legendre panels; returns nodes and ``dz`` weights."""
    xg, wg = np.polynomial.legendre.leggauss(n)
    corners = [x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1, x0 + 1j * y0]
    nodes, weights = [], []
    for a, b in zip(corners[:-1], corners[1:]):
        n_pan = max(1, int(np.ceil(abs(b - a) / h)))
        edges = a + (b - a) * np.linspace(0.0, 1.0, n_pan + 1)
        for e0, e1 in zip(edges[:-1], edges[1:]):
            half = 0.5 * (e1 - e0)
            nodes.append(e0 + half * (xg + 1.0))
            weights.append(half * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def _cauchy_rows(lam, nodes, vec, chunk=256):
    """``sum_q vec[q, :] / (nodes[q] - lam)`` for every ``lam``; returns (len(lam), ncol)."""
    out = np.empty((lam.size, vec.shape[1]), complex)
    for s in range(0, lam.size, chunk):
        out[s:s + chunk] = (1.0 / (nodes[None, :] - lam[s:s + chunk, None])) @ vec
    return out


def _pole_sum(z, lam, mu, chunk=256):
    """``sum_l mu_l / (z - lam_l)`` for each ``z``."""
    out = np.empty(z.size, complex)
    for s in range(0, z.size, chunk):
        out[s:s + chunk] = (1.0 / (z[s:s + chunk, None] - lam[None, :])) @ mu
    return out


def _upper_roots(ev, window, im_max=4.0):
    """Roots with ``Im z > 0`` of the analytic dispersion function (used for offsets)."""
    try:
        an = DispersionEvaluator(ev.equilibrium, ev.wave, ev.grid, continuation="plus",
                                 method="analytic")
        roots = find_roots(an, (window[0], window[1], 0.05, im_max))
        return [r.z for r in roots if r.converged]
    except (ValueError, NotImplementedError):
        return []


def _default_offset(ev, window, spec):
    roots = _upper_roots(ev, window)
    top = max([0.0] + [z.imag for z in roots])
    if spec.offset_plus is not None and spec.offset_plus <= top:
        raise IncompleteContourError(
            f"offset_plus={spec.offset_plus} does not clear the root at Im z = {top:.6g}")
    b = 0.5 + top
    return (spec.offset_plus or b, spec.offset_minus or -b)


def evolve(ev: DispersionEvaluator, f0: PerturbationField, times, contour: ContourSpec | None = None):
    """``f(t) = (1/2 pi i) oint exp(-i z t) R(z) f0 dz`` at each of ``times``.

    Returns one :class:`ResolventOutput` per time, in the given order.
    """
    contour = contour or ContourSpec()
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("evolution is defined for t >= 0")
    if contour.mode is ContourMode.RESIDUE_SUM:
        from .residues import evolve_residue_sum
        return evolve_residue_sum(ev, f0, times, contour)
    S = series_resolvent(ev, f0.grid)
    B = S.basis
    lam = B.lam.reshape(-1)
    c = S.psi(f0)
    mu_f = B.moment_weights(c).reshape(-1)
    mu_eta = S.mu_eta.reshape(-1)
    return _two_line(ev, times, contour, lam, mu_f, mu_eta,
                     free=lambda t: c * np.exp(-1j * B.lam * t)[:, :, None],
                     assemble=lambda d_free, kern: S.to_field(
                         d_free - B.eta_psi * kern.reshape(B.lam.shape)[:, :, None]),
                     t0_error=lambda out: _rel_l2(out.harmonics, S.pad(f0), out.grid.measure))


def _rel_l2(a, ref, weight):
    num = np.sqrt(np.sum(weight * np.abs(a - ref) ** 2))
    den = np.sqrt(np.sum(weight * np.abs(ref) ** 2))
    return float(num / den) if den > 0 else float(num)


def _two_line(ev, times, contour, lam, mu_f, mu_eta, free, assemble, t0_error):
    lo, hi = lam.min(), lam.max()
    window = contour.re_span or (lo - 1.0, hi + 1.0)
    b, c = _default_offset(ev, window, contour)
    x0 = min(window[0], lo - max(b, -c))
    x1 = max(window[1], hi + max(b, -c))
    t_max = max(float(times.max(initial=0.0)), 1.0)
    h = min(0.5 * min(b, -c), 4.0 / t_max)
    t_all = np.concatenate([[0.0], times])
    err = np.inf
    for _ in range(contour.max_refine + 1):
        nodes, dz = _rectangle(x0, x1, c, b, h, contour.n_nodes)
        D = _pole_sum(nodes, lam, mu_f) / (1.0 + _pole_sum(nodes, lam, mu_eta))
        vec = (dz * D)[:, None] * np.exp(-1j * np.outer(nodes, t_all)) / (2j * np.pi)
        kern = _cauchy_rows(lam, nodes, vec)
        err = t0_error(assemble(free(0.0), kern[:, 0]))
        if err < contour.tol:
            break
        h *= 0.5
    else:
        raise IncompleteContourError(f"t = 0 identity error {err:.3e} exceeds {contour.tol}")
    diag = {"t0_error": float(err), "n_nodes": int(nodes.size), "offset_plus": float(b),
            "offset_minus": float(c), "re_span": [float(x0), float(x1)]}
    # the moment of R(z) f0 is M/eps = D, so the lower line's share of moment(t) is
    lower = nodes.imag == c
    lower_moment = vec[lower, 1:].sum(axis=0)
    outs = []
    for k, t in enumerate(times):
        fld = assemble(free(t), kern[:, k + 1])
        mom = fld.moment()
        outs.append(ResolventOutput(fld, mom, {**diag, "lower_line_moment": complex(lower_moment[k])},
                                    float(t)))
    return outs


@dataclass
class Output1D:
    field: Field1D
    moment: complex
    diagnostics: dict = field(default_factory=dict)
    t: float | None = None


def evolve_1d(ev: DispersionEvaluator, f0: Field1D, times, contour: ContourSpec | None = None):
    """Contour evolution of the reduced one-dimensional problem along ``k``."""
    contour = contour or ContourSpec()
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("evolution is defined for t >= 0")
    if contour.mode is ContourMode.RESIDUE_SUM:
        from .residues import evolve_residue_sum_1d
        return evolve_residue_sum_1d(ev, f0, times, contour)
    g = f0.grid
    k = ev.wave.k
    lam = k * g.u
    etab = eta_bar(ev.equilibrium, ev.wave, g.u)
    mu_f = g.w * f0.values
    mu_eta = g.w * etab

    outs = _two_line(ev, times, contour, lam, mu_f, mu_eta,
                     free=lambda t: f0.values * np.exp(-1j * lam * t),
                     assemble=lambda v_free, kern: Field1D(v_free - etab * kern, g),
                     t0_error=lambda out: _rel_l2(out.values, f0.values, g.w))
    return [Output1D(o.field, o.moment, o.diagnostics, o.t) for o in outs]
