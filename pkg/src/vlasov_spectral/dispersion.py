"""Dispersion functions of the linear Vlasov operator and their complex zeros."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ive

from .equilibrium import EquilibriumDistribution, WaveConfig, eta_bar
from .grid import Grid1D, VelocityGrid
from .gyro import GyroBasis
from .special import SQRT_PI, PVQuadratureRule, plasma_Z, pv_integral


class Continuation(str, Enum):
    NONE = "none"
    PLUS = "plus"


class Method(str, Enum):
    QUADRATURE = "quadrature"
    ANALYTIC = "analytic"


class BranchCutError(ValueError):
    """Evaluation requested on the real axis without analytic continuation."""


class RegionError(ValueError):
    """Root-search rectangle boundary passes too close to a zero."""


def _z_array(z):
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    return z


def _Z_branch(xi, continuation):
    """Plasma Z for the continued (entire) or the bare Cauchy integral."""
    Z = plasma_Z(xi)
    if continuation is Continuation.NONE:
        below = np.imag(xi) < 0
        if np.any(below):
            Z = np.where(below, Z - 2j * SQRT_PI * np.exp(-xi**2), Z)
    return Z


class DispersionEvaluator:
    """Evaluates ``eps0(z)`` and ``eps(z)`` for one equilibrium and wave.

    Parameters
    ----------
    method : "quadrature" sums the velocity integrals on ``grid`` (harmonic
        series truncated at ``n_max``); "analytic" uses the closed forms
        available for sums of bi-Maxwellians (plasma ``Z`` and ``I_n e^{-b}``).
    continuation : "plus" continues every Cauchy integral from the upper
        half plane; "none" evaluates the bare integral (real ``z`` rejected).
    """

    def __init__(self, equilibrium: EquilibriumDistribution, wave: WaveConfig,
                 grid: VelocityGrid | None = None, n_max="auto",
                 continuation="plus", method="quadrature", cap=200,
                 truncation_tol=1e-12):
        self.equilibrium = equilibrium
        self.wave = wave
        self.grid = (grid or VelocityGrid()).with_m_max(0)
        self.grid1d = Grid1D(self.grid.n_par, self.grid.v_cut)
        self.continuation = Continuation(continuation)
        self.method = Method(method)
        self.cap = int(cap)
        self.truncation_tol = truncation_tol
        self._n_max_request = n_max
        self._basis = None
        self._analytic_p = None

    # -- configuration -------------------------------------------------
    def with_continuation(self, continuation):
        return DispersionEvaluator(self.equilibrium, self.wave, self.grid, self._n_max_request,
                                   continuation, self.method, self.cap, self.truncation_tol)

    @property
    def basis(self) -> GyroBasis:
        if self._basis is None:
            n = self._n_max_request
            self._basis = GyroBasis(self.grid, self.wave, self.equilibrium,
                                    n_extra="auto" if n == "auto" else int(n), cap=self.cap)
            self._mu_eta = self._basis.moment_weights(self._basis.eta_psi)
        return self._basis

    @property
    def n_max(self) -> int:
        if not self.wave.magnetized:
            return 0
        if self.method is Method.ANALYTIC:
            return int(self._analytic_orders().max())
        return self.basis.P

    def resolved(self) -> dict:
        return {"method": self.method.value, "continuation": self.continuation.value,
                "n_max": self.n_max, "grid": self.grid.to_dict()}

    # -- unmagnetized --------------------------------------------------
    def epsilon0(self, z):
        z = _z_array(z)
        if self.method is Method.ANALYTIC:
            return self._epsilon0_analytic(z)
        return self._epsilon0_quadrature(z)

    def _epsilon0_analytic(self, z):
        self._check_axis(z)
        from .equilibrium import projected_components
        w = self.wave
        out = np.ones_like(z)
        for weight, mu, s in projected_components(self.equilibrium, w):
            xi = (z / w.k - mu) / (np.sqrt(2.0) * s)
            out = out + w.eta_scale * weight * (1.0 + xi * _Z_branch(xi, self.continuation)) / s**2
        return out

    def _epsilon0_quadrature(self, z):
        w = self.wave
        g = self.grid1d
        etab = eta_bar(self.equilibrium, w, g.u)
        zf = z.reshape(-1)
        real = np.imag(zf) == 0
        if np.any(real) and self.continuation is Continuation.NONE:
            raise BranchCutError("real z needs plus continuation")
        zs = np.where(real, zf + 1j, zf)  # real entries are replaced by the PV form below
        out = 1.0 + _line_cauchy(zs, 0.0, w.k, g.u, g.w, etab, lambda s: eta_bar(self.equilibrium, w, s),
                                 g.v_cut, self.continuation is Continuation.PLUS)
        for i in np.nonzero(real)[0]:
            out[i] = self._epsilon0_real(float(zf[i].real))
        return out.reshape(z.shape)

    def _epsilon0_real(self, mu):
        w = self.wave
        k = w.k
        L = self.grid1d.v_cut
        rule = PVQuadratureRule.gauss_legendre(-L, L, self.grid1d.n)
        etab = lambda u: eta_bar(self.equilibrium, w, u)
        pv = _cauchy_real(etab, mu / k, rule)
        # int eta_bar/(mu - k u) du = -(1/k) PV int eta_bar/(u - mu/k)
        if abs(mu / k) >= L:
            return complex(1.0 - pv / k)
        return 1.0 - pv / k - 1j * np.pi / k * etab(mu / k)

    # -- magnetized ----------------------------------------------------
    def epsilon(self, z):
        z = _z_array(z)
        if not self.wave.magnetized:
            return self.epsilon0(z)
        if self.method is Method.ANALYTIC:
            return self._epsilon_analytic(z)
        return self._epsilon_quadrature(z)

    __call__ = epsilon

    def _check_axis(self, z):
        if self.continuation is Continuation.NONE and np.any(np.imag(z) == 0):
            if self.wave.magnetized and self.wave.k_par == 0:
                return
            raise BranchCutError("z on the real axis needs plus continuation")

    def _analytic_orders(self):
        if self._analytic_p is None:
            w = self.wave
            orders = []
            for c in self.equilibrium.components:
                b = (w.k_perp * c.vt_perp / w.omega_0) ** 2
                n = 0
                while ive(n, b) > 1e-17 or n < np.sqrt(b):
                    n = max(2 * n, n + 8)
                # trim to the last significant order
                ns = np.arange(n + 1)
                sig = np.nonzero(ive(ns, b) > 1e-17)[0]
                orders.append(int(sig[-1]) if sig.size else 0)
            self._analytic_p = np.array(orders)
        return self._analytic_p

    def _epsilon_analytic(self, z):
        self._check_axis(z)
        w = self.wave
        out = np.ones_like(z)
        zf = z.reshape(-1)
        acc = np.zeros_like(zf)
        for c, pmax in zip(self.equilibrium.components, self._analytic_orders()):
            p = np.arange(-pmax, pmax + 1)
            b = (w.k_perp * c.vt_perp / w.omega_0) ** 2
            gam = ive(p, b)[:, None]
            shift = zf[None, :] - p[:, None] * w.omega_0
            if w.k_par == 0:
                term = -gam * (p[:, None] * w.omega_0 / c.vt_perp**2) / shift
            else:
                s2 = np.sqrt(2.0) * c.vt_par * w.k_par
                xi = (shift - w.k_par * c.drift) / s2
                Z = _Z_branch(xi, self.continuation)
                term = gam * ((1.0 + xi * Z) / c.vt_par**2
                              + (p[:, None] * w.omega_0 / c.vt_perp**2) * Z / s2)
            acc += c.weight * term.sum(axis=0)
        return out + w.eta_scale * acc.reshape(z.shape)

    def _epsilon_quadrature(self, z):
        B = self.basis
        w = self.wave
        g = self.grid
        real = np.imag(z) == 0
        if np.any(real) and w.k_par > 0 and self.continuation is Continuation.NONE:
            raise BranchCutError("z on the real axis needs plus continuation")
        zf = z.reshape(-1)
        out = np.ones_like(zf)
        if w.k_par == 0:
            mu = self._mu_eta.reshape(-1)
            lam = B.lam.reshape(-1)
            chunk = max(1, 2_000_000 // max(lam.size, 1))
            for s in range(0, zf.size, chunk):
                zz = zf[s:s + chunk]
                out[s:s + chunk] += (mu[None, :] / (zz[:, None] - lam[None, :])).sum(axis=1)
            return out.reshape(z.shape)
        plus = self.continuation is Continuation.PLUS
        zs = np.where(np.imag(zf) == 0, zf + 1j, zf)
        for n, pv in enumerate(B.p_values):
            dens = self._mu_eta[n] / g.w_par
            out += _line_cauchy(zs, pv * w.omega_0, w.k_par, g.v_par, g.w_par, dens,
                                lambda v, n=n: B.line_row(n, B.eta_row(n, v)), g.v_cut, plus)
        if plus:
            for i in np.nonzero(np.imag(zf) == 0)[0]:
                out[i] = self.epsilon_pv(float(zf[i].real)) - 1j * np.pi / w.k_par * self.residue_density(zf[i:i + 1])[0]
        return out.reshape(z.shape)

    def residue_density(self, z):
        """``sum_p h_p((z - p w0)/k_par)`` with ``h_p`` the perpendicular-integrated
        eta density of harmonic ``p``, continued to complex ``v_par``."""
        B = self.basis
        w = self.wave
        z = np.atleast_1d(z)
        out = np.zeros(z.shape, complex)
        for n, pv in enumerate(B.p_values):
            s = (z - pv * w.omega_0) / w.k_par
            out += B.line_row(n, B.eta_row(n, s))
        return out

    def epsilon_pv(self, mu: float) -> complex:
        """Principal-value dispersion function on the real axis (real for real ``f0``)."""
        w = self.wave
        if not w.magnetized:
            g = self.grid1d
            rule = PVQuadratureRule.gauss_legendre(-g.v_cut, g.v_cut, g.n)
            return 1.0 - _cauchy_real(lambda u: eta_bar(self.equilibrium, w, u), mu / w.k, rule) / w.k
        if w.k_par == 0:
            return complex(self.epsilon(np.array([mu]))[0])
        B = self.basis
        g = self.grid
        rule = PVQuadratureRule.gauss_legendre(-g.v_cut, g.v_cut, g.n_par)
        total = 1.0 + 0j
        for n, pv in enumerate(B.p_values):
            pole = (mu - pv * w.omega_0) / w.k_par
            if abs(pole) < g.v_cut * (1 - 1e-9):
                val = pv_integral(lambda v, n=n: B.line_row(n, B.eta_row(n, v)), pole, rule)
                total -= val / w.k_par
            else:
                total += np.sum(self._mu_eta[n] / (mu - B.lam[n]))
        return complex(total)


def _cauchy_real(h, pole, rule):
    """``int h(v) / (v - pole) dv`` over the rule span: a principal value
    when the pole is inside, an ordinary integral (same subtraction) outside."""
    c, b = rule.lower, rule.upper
    if c < pole < b:
        return pv_integral(h, pole, rule)
    if pole in (c, b):
        raise ValueError(f"pole {pole} on the end of the quadrature span")
    h_pole = np.asarray(h(np.array([pole])))[..., 0]
    q = (np.asarray(h(rule.nodes)) - h_pole[..., None]) / (rule.nodes - pole)
    return rule.integrate(q) + h_pole * np.log((b - pole) / (c - pole))


def _log_plus(x):
    """Logarithm continued from the upper half plane: branch cut on the negative imaginary axis."""
    ang = np.angle(x)
    ang = np.where(ang < -0.5 * np.pi, ang + 2 * np.pi, ang)
    return np.log(np.abs(x)) + 1j * ang


def _line_cauchy(z, c, k, v, wts, dens, h, L, plus):
    """``int_{-L}^{L} h(v) / (z - c - k v) dv`` by the nodes ``(v, wts)``.

    ``dens`` holds ``h`` at the nodes and ``h`` continues it to complex
    ``v``.  When the pole ``s = (z - c)/k`` is close enough to the real
    segment to spoil Gauss-Legendre accuracy, ``h(s)`` is subtracted and
    its integral done in closed form; with ``plus`` the logarithms (and,
    for distant poles below the axis, the explicit residue) give the
    continuation from the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    s = (z - c) / k
    d_sub = 16.0 * L / v.size  # GL error ~ exp(-2 n d / L) reaches 1e-14 here
    near = np.abs(s.imag) < d_sub
    below = (s.imag < 0) & ~near & plus
    out = np.empty(z.shape, complex)
    mu = wts * dens
    far = ~near
    if np.any(far):
        zf = z[far]
        chunk = max(1, 2_000_000 // max(v.size, 1))
        vals = np.empty(zf.shape, complex)
        for a in range(0, zf.size, chunk):
            zz = zf[a:a + chunk]
            vals[a:a + chunk] = (mu[None, :] / (zz[:, None] - c - k * v[None, :])).sum(axis=1)
        out[far] = vals
    if np.any(near):
        zn = z[near]
        hs = np.asarray(h(s[near]))
        log = _log_plus if plus else np.log
        cauchy = ((wts[None, :] * (dens[None, :] - hs[:, None])) / (zn[:, None] - c - k * v[None, :])).sum(axis=1)
        out[near] = cauchy + hs / k * (log(zn - c + k * L) - log(zn - c - k * L))
    if np.any(below):
        out[below] -= 2j * np.pi / k * np.asarray(h(s[below]))
    return out


def epsilon0(ev: DispersionEvaluator, z):
    return ev.epsilon0(z)


def epsilon(ev: DispersionEvaluator, z):
    return ev.epsilon(z)


# -- root finding ------------------------------------------------------

@dataclass(frozen=True)
class DispersionRoot:
    z: complex
    residual: float
    multiplicity_hint: int = 1
    converged: bool = True


class RootList(list):
    """Roots plus the argument-principle count of the searched region."""

    count: int = 0
    region: tuple = ()


def _boundary(x0, x1, y0, y1, n):
    t = np.linspace(0.0, 1.0, n, endpoint=False)
    return np.concatenate([
        x0 + (x1 - x0) * t + 1j * y0,
        x1 + 1j * (y0 + (y1 - y0) * t),
        x1 - (x1 - x0) * t + 1j * y1,
        x0 + 1j * (y1 - (y1 - y0) * t),
        [x0 + 1j * y0],
    ])


def winding_number(func, region, n=64, boundary_tol=1e-8, max_refine=12):
    """Zero count inside ``region`` by tracking ``arg func`` around its boundary.

    Boundary segments are bisected until the phase increment on each is
    below ``pi/4``.  Raises ``RegionError`` when ``|func|`` on the boundary
    drops below ``boundary_tol``.
    """
    x0, x1, y0, y1 = region
    pts = _boundary(x0, x1, y0, y1, n)
    vals = np.asarray(func(pts))
    for _ in range(max_refine):
        if np.min(np.abs(vals)) < boundary_tol:
            raise RegionError(f"|eps| < {boundary_tol} on the boundary of {region}")
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(dphi) > np.pi / 4
        if not np.any(bad):
            break
        mids = 0.5 * (pts[:-1][bad] + pts[1:][bad])
        mvals = np.asarray(func(mids))
        idx = np.nonzero(bad)[0] + 1
        pts = np.insert(pts, idx, mids)
        vals = np.insert(vals, idx, mvals)
    else:
        if np.min(np.abs(vals)) < boundary_tol:
            raise RegionError(f"|eps| < {boundary_tol} on the boundary of {region}")
    total = np.sum(np.angle(vals[1:] / vals[:-1])) / (2 * np.pi)
    count = int(round(total))
    if abs(total - count) > 0.1:
        raise RegionError(f"argument principle did not close (winding {total:.3f})")
    return count


def newton(func, z0, tol=1e-12, max_iter=60, max_step=None):
    """Newton iteration with a central-difference derivative.

    Returns ``(z, |func(z)|)``; a step that leaves ``max_step`` of the seed
    or produces non-finite values stops the iteration with residual ``inf``.
    """
    z0 = complex(z0)
    z = z0
    f = complex(func(np.array([z]))[0])
    for _ in range(max_iter):
        h = 1e-6 * max(1.0, abs(z))
        fp, fm = func(np.array([z + h, z - h]))
        d = (fp - fm) / (2 * h)
        if d == 0 or not np.isfinite(d):
            break
        step = f / d
        z_new = z - step
        if not np.isfinite(z_new) or (max_step is not None and abs(z_new - z0) > max_step):
            return z, np.inf
        z = z_new
        f = complex(func(np.array([z]))[0])
        if not np.isfinite(f):
            return z, np.inf
        if abs(f) < tol or abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    return z, abs(f)


def find_roots(ev, region, root_tol=1e-9, boundary_tol=1e-8, max_depth=12, n_boundary=64):
    """Locate all zeros of ``ev`` (callable on complex arrays) inside ``region``.

    ``region = (re_min, re_max, im_min, im_max)``.  The zero count comes from
    the argument principle; cells with one zero are polished by Newton
    iteration.  Unconverged candidates are returned with ``converged=False``.
    """
    func = ev.epsilon if isinstance(ev, DispersionEvaluator) else ev
    region = tuple(float(r) for r in region)
    total = winding_number(func, region, n_boundary, boundary_tol)
    roots = RootList()
    roots.count = total
    roots.region = region
    if total < 0:
        raise RegionError("negative winding: function has poles inside the region")

    def cell(reg, count, depth):
        if count == 0:
            return
        x0, x1, y0, y1 = reg
        if count == 1 or depth >= max_depth:
            z, res = newton(func, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
                            max_step=2 * abs(complex(x1 - x0, y1 - y0)))
            inside = x0 <= z.real <= x1 and y0 <= z.imag <= y1
            if res < root_tol and inside:
                roots.append(DispersionRoot(z, res, count, True))
                return
            if depth >= max_depth:
                roots.append(DispersionRoot(z, res, count, False))
                return
        for frac in (0.5, 0.47, 0.53, 0.41, 0.59):
            xm = x0 + frac * (x1 - x0)
            ym = y0 + frac * (y1 - y0)
            subs = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
            try:
                counts = [winding_number(func, s, n_boundary, boundary_tol) for s in subs]
            except RegionError:
                continue
            if sum(counts) != count:
                continue
            for s, c in zip(subs, counts):
                cell(s, c, depth + 1)
            return
        z, res = newton(func, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
        roots.append(DispersionRoot(z, res, count, res < root_tol))

    cell(region, total, 0)
    roots.sort(key=lambda r: (round(r.z.real, 10), round(r.z.imag, 10)))
    return roots


def converged_count(roots):
    return sum(r.multiplicity_hint for r in roots if r.converged)


def check_pairing(roots, tol=1e-7):
    """True when every root ``z`` has a partner ``-conj(z)`` in the list."""
    zs = np.array([r.z for r in roots])
    return all(np.min(np.abs(zs + np.conj(z))) < tol * max(1.0, abs(z)) for z in zs)
