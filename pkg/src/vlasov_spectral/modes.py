"""Eigenmodes of the linear Vlasov operator and its adjoint.

Every mode is held structurally on the gyro-orbit basis of
:class:`~vlasov_spectral.resolvent.SeriesResolvent`:

    G = sum_p psi_p [ N_p / (z - lam_p) + a_p(v_perp) delta(z - lam_p) ],

with ``N_p`` the psi coefficients of ``-eta`` (direct operator) or ``-1``
(adjoint operator).  For complex ``z`` the delta lines are absent and the
mode is an ordinary grid function.  For real ``z = mu`` the first term is a
principal value and the delta lines sit at ``v_par = (mu - p w0) / k_par``.

Normalisations: ``int G d^3v = 1`` for the direct operator and
``int eta G d^3v = 1`` for the adjoint.  Both reduce to the requirement that
the delta weights carry ``eps_pv(mu)``, the principal-value dispersion
function, so user-supplied weights are rescaled to that value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dispersion import DispersionEvaluator, newton
from .equilibrium import eta_bar
from .grid import Grid1D, PerturbationField
from .oracle import DiscreteOperator, apply_K
from .resolvent import series_resolvent
from .special import PVQuadratureRule, pv_integral


class OperatorTag(str, Enum):
    K1D = "K1d"
    K0 = "K0"
    K = "K"
    K_ADJOINT = "Kadjoint"
    K0_ADJOINT = "K0adjoint"


class NotAnEigenvalueError(ValueError):
    """A complex value that is not a zero of the dispersion function."""


class DegenerateWeightsError(ValueError):
    """Delta weights whose normalisation integral vanishes."""


class UndefinedProductError(ValueError):
    """Product of two singular parts at the same resonance (no finite value)."""


@dataclass
class DeltaLine:
    """``a(v_perp) delta(z - lam_p)`` on psi harmonic ``p``.

    ``weights`` samples ``a`` at the perpendicular grid nodes; in 1D it is a
    length-one array holding the weight of ``delta(v - v_par)``.
    """

    p: int
    v_par: float
    weights: np.ndarray


@dataclass
class EigenMode:
    operator: OperatorTag
    eigenvalue: complex
    source: str                       # "eta" (direct) or "one" (adjoint)
    resolvent: object = field(repr=False, default=None)   # SeriesResolvent, or None in 1D
    grid1d: Grid1D | None = field(repr=False, default=None)
    wave: object = field(repr=False, default=None)
    equilibrium: object = field(repr=False, default=None)
    delta_part: list = field(default_factory=list)
    phase_factor: bool = True
    info: dict = field(default_factory=dict)

    @property
    def is_real(self) -> bool:
        return complex(self.eigenvalue).imag == 0

    @property
    def adjoint(self) -> bool:
        return self.source == "one"

    @property
    def is_1d(self) -> bool:
        return self.grid1d is not None

    @property
    def grid(self):
        return self.grid1d if self.is_1d else self.resolvent.grid_out

    # -- numerators -------------------------------------------------------
    def pv_part(self):
        """Numerator table ``N_p(v_par, v_perp)`` on the grid (1D: ``N(u)``)."""
        if self.is_1d:
            return -self._etab(self.grid1d.u) if not self.adjoint else -np.ones_like(self.grid1d.u)
        B = self.resolvent.basis
        return -(B.one_psi if self.adjoint else B.eta_psi)

    def numerator_row(self, n, v_par):
        """``N_p`` for harmonic index ``n`` at arbitrary ``v_par``; shape (len, n_perp)."""
        B = self.resolvent.basis
        v_par = np.atleast_1d(v_par)
        if self.adjoint:
            return -np.broadcast_to(B.Jp[n], (v_par.size, B.Jp.shape[1]))
        return -B.eta_row(n, v_par)

    def _etab(self, u):
        return eta_bar(self.equilibrium, self.wave, u)

    # -- sampling ---------------------------------------------------------
    def sample(self, mollify=None) -> PerturbationField:
        """Grid harmonics of the mode; real modes need a mollifier width
        ``mollify`` (in ``v_par`` units) for the delta lines and the principal value."""
        if self.is_1d:
            raise TypeError("use sample_1d for one-dimensional modes")
        S = self.resolvent
        B = S.basis
        z = complex(self.eigenvalue)
        diff = z - B.lam
        if self.is_real:
            if mollify is None:
                raise ValueError("real modes need a mollifier width")
            s = mollify * max(self.wave.k_par, 1e-300)
            inv = diff.real / (diff.real**2 + s**2)
        else:
            inv = 1.0 / diff
        d = self.pv_part() * inv[:, :, None]
        if self.delta_part:
            d = d.astype(complex).copy()
            vpar = S.grid_out.v_par
            for line in self.delta_part:
                n = line.p + B.P
                prof = np.exp(-0.5 * ((vpar - line.v_par) / mollify) ** 2) / (np.sqrt(2 * np.pi) * mollify)
                # delta(mu - lam) = delta(v_par - v_res) / k_par
                d[n] += prof[:, None] * line.weights[None, :] / self.wave.k_par
        return S.to_field(d)

    def sample_1d(self, mollify=None):
        g = self.grid1d
        z = complex(self.eigenvalue)
        diff = z - self.wave.k * g.u
        if self.is_real:
            s = mollify * self.wave.k
            inv = diff.real / (diff.real**2 + s**2)
        else:
            inv = 1.0 / diff
        vals = self.pv_part() * inv
        for line in self.delta_part:
            vals = vals + line.weights[0] * np.exp(-0.5 * ((g.u - line.v_par) / mollify) ** 2) \
                / (np.sqrt(2 * np.pi) * mollify)
        return vals


# -- construction ----------------------------------------------------------

def _polish(func, z, tol, what):
    val = abs(complex(func(np.array([z]))[0]))
    if val < 1e-13:
        return z, val
    zp, res = newton(func, z, max_step=1e-2 * max(1.0, abs(z)))
    if not res < 1e-11:
        raise NotAnEigenvalueError(f"{what}: |eps| = {val:.3e} at {z} and polishing failed")
    return zp, res


def _check_root(ev, z, tol):
    val = abs(complex(ev.epsilon(np.array([z]))[0]))
    if val > tol:
        raise NotAnEigenvalueError(f"|eps({z})| = {val:.3e} > {tol}: not an eigenvalue")
    return val


def _eps_pv_1d(ev, mu):
    g = ev.grid1d
    k = ev.wave.k
    rule = PVQuadratureRule.gauss_legendre(-g.v_cut, g.v_cut, g.n)
    return 1.0 - pv_integral(lambda u: eta_bar(ev.equilibrium, ev.wave, u), mu / k, rule) / k


def vkc_mode(ev: DispersionEvaluator, eigenvalue, root_tol=1e-6, polish=True):
    """One-dimensional mode of the reduced operator along ``k``.

    Complex eigenvalues must be zeros of ``eps0``; the mode is
    ``eta_bar / (k u - nu)``.  Real ``nu`` gives the principal-value part plus
    a delta at ``u = nu / k`` carrying ``eps_pv(nu) = 1 - PV int eta_bar / (k u - nu)``.
    """
    g = ev.grid1d
    k = ev.wave.k
    nu = complex(eigenvalue)
    info = {}
    if nu.imag != 0:
        info["eps_at_input"] = _check_root(ev, nu, root_tol)
        if polish:
            def eps_h(z):
                return 1.0 + (g.w * eta_bar(ev.equilibrium, ev.wave, g.u) / (z[:, None] - k * g.u)).sum(axis=1)
            nu, info["eps_grid"] = _polish(eps_h, nu, root_tol, "1D root")
        return EigenMode(OperatorTag.K1D, nu, "eta", None, g, ev.wave, ev.equilibrium, [], False, info)
    mu = nu.real
    if not abs(mu / k) < g.v_cut:
        raise ValueError("real eigenvalue outside the grid's k*v range")
    eps_pv = float(np.real(_eps_pv_1d(ev, mu)))
    line = DeltaLine(0, mu / k, np.array([eps_pv]))
    info["eps_pv"] = eps_pv
    return EigenMode(OperatorTag.K1D, complex(mu), "eta", None, g, ev.wave, ev.equilibrium, [line],
                     False, info)


def _grid_eps(S, adjoint):
    return (lambda z: np.array([S.epsilon_adjoint(x) if adjoint else S.epsilon(x) for x in z]))


def _complex_mode(ev, z, adjoint, tag, root_tol, polish):
    S = series_resolvent(ev, ev.grid)
    info = {"eps_at_input": _check_root(ev, z, root_tol)}
    if polish:
        z, info["eps_grid"] = _polish(_grid_eps(S, adjoint), z, root_tol, "grid root")
    return EigenMode(tag, complex(z), "one" if adjoint else "eta", S, None, ev.wave, ev.equilibrium,
                     [], ev.wave.magnetized, info)


def _line_positions(S, mu):
    w = S.wave
    B = S.basis
    v = (mu - B.p_values * w.omega_0) / w.k_par
    inside = np.abs(v) < S.grid_out.v_cut * (1 - 1e-9)
    return v, inside


def default_delta_weights(ev, mu, kind="gaussian", harmonic_shift=0):
    """Built-in delta-weight families ``{p: a(v_perp)}`` for real ``mu``.

    The line goes on the harmonic whose resonance sits closest to
    ``v_par = 0`` (shifted by ``harmonic_shift``); ``kind`` picks the
    perpendicular profile: ``gaussian`` ``exp(-v^2/2)`` or ``ring``
    ``v^2 exp(-v^2/2)``.
    """
    S = series_resolvent(ev, ev.grid)
    w = ev.wave
    vp = S.grid_out.v_perp
    p_star = int(round(mu / w.omega_0)) if w.magnetized else 0
    p_star += harmonic_shift
    prof = {"gaussian": np.exp(-0.5 * vp**2), "ring": vp**2 * np.exp(-0.5 * vp**2)}[kind]
    return {p_star: prof}


def _real_mode(ev, mu, weights, adjoint, tag):
    w = ev.wave
    if w.k_par == 0:
        raise NotImplementedError("real-eigenvalue modes need k_par > 0")
    S = series_resolvent(ev, ev.grid)
    B = S.basis
    weights = default_delta_weights(ev, mu) if weights is None else weights
    v_res, inside = _line_positions(S, mu)
    lines = []
    for p, a in weights.items():
        n = p + B.P
        if not (0 <= n < B.p_values.size) or not inside[n]:
            raise ValueError(f"resonance line for harmonic {p} lies outside the grid")
        lines.append(DeltaLine(int(p), float(v_res[n]), np.asarray(a, dtype=complex)))
    mode = EigenMode(tag, complex(mu), "one" if adjoint else "eta", S, None, w, ev.equilibrium,
                     lines, w.magnetized, {})
    eps_pv = _grid_eps_pv(S, mu)
    delta = _delta_normalization(mode)
    if abs(delta) < 1e-14:
        raise DegenerateWeightsError("delta weights give a vanishing normalisation integral")
    scale = eps_pv / delta
    for line in lines:
        line.weights = line.weights * scale
    mode.info.update(eps_pv=eps_pv, weight_scale=complex(scale))
    return mode


def _grid_eps_pv(S, mu):
    """Principal-value dispersion function on the mode's own grid."""
    B = S.basis
    total = 1.0 + 0j
    for n in range(B.p_values.size):
        total -= _pv_line(S, n, mu, lambda v, n=n: B.line_row(n, -B.eta_row(n, v)))
    return float(total.real)


def _pv_line(S, n, mu, h):
    """``PV int h(v) / (mu - lam_n(v)) dv`` for a smooth line density ``h``."""
    w = S.wave
    g = S.grid_out
    p = S.basis.p_values[n]
    pole = (mu - p * w.omega_0) / w.k_par
    if abs(pole) < g.v_cut * (1 - 1e-9):
        rule = PVQuadratureRule.gauss_legendre(-g.v_cut, g.v_cut, g.n_par)
        return -pv_integral(h, pole, rule) / w.k_par
    return np.sum(g.w_par * h(g.v_par) / (mu - p * w.omega_0 - w.k_par * g.v_par))


def magnetized_mode(ev: DispersionEvaluator, eigenvalue, delta_weights=None, root_tol=1e-6, polish=True):
    """Eigenmode of the full operator at ``eigenvalue``.

    Complex eigenvalues must be zeros of ``eps``; the mode is ``-R0(z) eta``
    (normalised automatically).  Real eigenvalues take delta weights
    ``{p: a(v_perp)}`` (default: :func:`default_delta_weights`) rescaled so
    that ``int G d^3v = 1``.  With ``omega_0 = 0`` this dispatches to
    :func:`unmagnetized_mode`.
    """
    if not ev.wave.magnetized:
        return unmagnetized_mode(ev, eigenvalue, delta_weights, root_tol, polish)
    z = complex(eigenvalue)
    if z.imag != 0:
        return _complex_mode(ev, z, False, OperatorTag.K, root_tol, polish)
    return _real_mode(ev, z.real, delta_weights, False, OperatorTag.K)


def unmagnetized_mode(ev: DispersionEvaluator, eigenvalue, alpha=None, root_tol=1e-6, polish=True):
    """Mode of the unmagnetized operator (``k`` along the grid axis).

    Real modes carry ``alpha(v_perp) * eps_pv(nu)`` on the line ``k v_par = nu``
    with ``int alpha dv_1 dv_2 = 1`` (default: unit Gaussian).
    """
    if ev.wave.k_perp != 0:
        raise NotImplementedError("unmagnetized grid modes need k along v_par")
    z = complex(eigenvalue)
    if z.imag != 0:
        return _complex_mode(ev, z, False, OperatorTag.K0, root_tol, polish)
    if alpha is None:
        vp = series_resolvent(ev, ev.grid).grid_out.v_perp
        alpha = {0: np.exp(-0.5 * vp**2) / (2 * np.pi)}
    return _real_mode(ev, z.real, alpha, False, OperatorTag.K0)


def adjoint_mode(ev: DispersionEvaluator, eigenvalue, delta_weights=None, root_tol=1e-6, polish=True):
    """Eigenmode of the adjoint operator, normalised by ``int eta G d^3v = 1``."""
    tag = OperatorTag.K_ADJOINT if ev.wave.magnetized else OperatorTag.K0_ADJOINT
    if not ev.wave.magnetized and ev.wave.k_perp != 0:
        raise NotImplementedError("unmagnetized grid modes need k along v_par")
    z = complex(eigenvalue)
    if z.imag != 0:
        return _complex_mode(ev, z, True, tag, root_tol, polish)
    return _real_mode(ev, z.real, delta_weights, True, tag)


# -- integrals ---------------------------------------------------------------

def _delta_normalization(mode):
    """Contribution of the delta lines to the mode's normalisation integral."""
    S = mode.resolvent
    B = S.basis
    g = S.grid_out
    w = mode.wave
    total = 0j
    for line in mode.delta_part:
        n = line.p + B.P
        if mode.adjoint:
            c = B.eta_row(n, np.array([line.v_par]))[0]
        else:
            c = B.Jp[n]
        total += 2 * np.pi / w.k_par * np.sum(g.w_perp * g.v_perp * c * line.weights)
    return total


def _weighted(S, adjoint, d):
    """``int w * psi-table`` per (p, v_par) with ``w = eta`` (adjoint) or 1 (direct)."""
    B = S.basis
    if adjoint:
        return np.einsum("ji,pji->pj", S.grid_out.measure, B.eta_psi * d)
    return B.moment_weights(d)


def normalization(mode: EigenMode) -> complex:
    """``int G d^3v`` (direct) or ``int eta G d^3v`` (adjoint); 1 for a valid mode."""
    if mode.is_1d:
        g = mode.grid1d
        z = complex(mode.eigenvalue)
        if not mode.is_real:
            return complex(np.sum(g.w * mode.pv_part() / (z - mode.wave.k * g.u)))
        k = mode.wave.k
        rule = PVQuadratureRule.gauss_legendre(-g.v_cut, g.v_cut, g.n)
        pv = pv_integral(lambda u: -mode._etab(u), z.real / k, rule)
        return complex(-pv / k + sum(line.weights[0] for line in mode.delta_part))
    S = mode.resolvent
    B = S.basis
    z = complex(mode.eigenvalue)
    if not mode.is_real:
        return complex(np.sum(_weighted(S, mode.adjoint, mode.pv_part()) / (z - B.lam)))
    total = 0j
    for n in range(B.p_values.size):
        if mode.adjoint:
            h = (lambda v, n=n: 2 * np.pi * ((B.eta_row(n, v) * mode.numerator_row(n, v))
                                             @ (S.grid_out.w_perp * S.grid_out.v_perp)))
        else:
            h = (lambda v, n=n: B.line_row(n, mode.numerator_row(n, v)))
        total += _pv_line(S, n, z.real, h)
    return complex(total + _delta_normalization(mode))


def _coefficients_at(mode, n, v_par):
    """psi coefficient ``n`` of the mode's regular part at ``v_par`` (real modes excluded)."""
    B = mode.resolvent.basis
    lam = B.p_values[n] * mode.wave.omega_0 + mode.wave.k_par * np.atleast_1d(v_par)
    return mode.numerator_row(n, v_par) / (complex(mode.eigenvalue) - lam)[:, None]


def inner_product(a: EigenMode, b: EigenMode) -> complex:
    """``int conj(G_a) G_b d^3v`` for an adjoint-operator mode ``a`` and a direct mode ``b``.

    Regular-regular products are grid sums (or a principal value when one
    side is real; two real sides are split by partial fractions).  A delta
    line meets the other mode's regular part at the line.  Two singular parts
    at the same resonance have no finite value and raise
    :class:`UndefinedProductError`.
    """
    if a.is_1d or b.is_1d:
        raise NotImplementedError("inner products are defined for 3D grid modes")
    if a.resolvent is not b.resolvent:
        raise ValueError("modes live on different grids")
    S = a.resolvent
    B = S.basis
    g = S.grid_out
    w = a.wave
    za, zb = complex(a.eigenvalue), complex(b.eigenvalue)
    wperp = g.w_perp * g.v_perp
    if a.is_real and b.is_real and za == zb:
        raise UndefinedProductError("principal values at the same eigenvalue")

    # regular x regular
    if not a.is_real and not b.is_real:
        num = np.einsum("ji,pji->pj", g.measure, np.conj(a.pv_part()) * b.pv_part())
        reg = np.sum(num / ((np.conj(za) - B.lam) * (zb - B.lam)))
    else:
        reg = 0j
        for n in range(B.p_values.size):
            def h(v, n=n):
                return 2 * np.pi * ((np.conj(a.numerator_row(n, v)) * b.numerator_row(n, v)) @ wperp)
            if a.is_real and b.is_real:
                reg += (_pv_line(S, n, za.real, h) - _pv_line(S, n, zb.real, h)) / (zb - za)
            elif a.is_real:
                lam_b = lambda v, n=n: B.p_values[n] * w.omega_0 + w.k_par * v
                reg += _pv_line(S, n, za.real, lambda v, n=n: h(v) / (zb - lam_b(v)))
            else:
                lam_a = lambda v, n=n: B.p_values[n] * w.omega_0 + w.k_par * v
                reg += _pv_line(S, n, zb.real, lambda v, n=n: h(v) / (np.conj(za) - lam_a(v)))

    # delta lines against the other side's regular part
    sing = 0j
    for line in a.delta_part:
        n = line.p + B.P
        if b.is_real and zb == za:
            raise UndefinedProductError("delta line meets a principal value at its pole")
        cb = _coefficients_at(b, n, line.v_par)[0] if not b.is_real else \
            b.numerator_row(n, line.v_par)[0] / (zb.real - za.real)
        sing += 2 * np.pi / w.k_par * np.sum(wperp * np.conj(line.weights) * cb)
    for line in b.delta_part:
        n = line.p + B.P
        if a.is_real and za == zb:
            raise UndefinedProductError("delta line meets a principal value at its pole")
        ca = _coefficients_at(a, n, line.v_par)[0] if not a.is_real else \
            a.numerator_row(n, line.v_par)[0] / (za.real - zb.real)
        sing += 2 * np.pi / w.k_par * np.sum(wperp * np.conj(ca) * line.weights)
    for la in a.delta_part:
        for lb in b.delta_part:
            if la.p == lb.p and abs(la.v_par - lb.v_par) < 1e-12:
                raise UndefinedProductError("coincident delta lines")
    return complex(reg + sing)


def eigen_residual(mode: EigenMode, op: DiscreteOperator | None = None, mollify=None) -> float:
    """``||K_h G - z G|| / ||G||`` on the discretised operator.

    Real modes are mollified (Gaussian delta lines, regularised principal
    value) with width ``mollify``, default two ``v_par`` cells at the line;
    their residual converges only in this weak sense.
    """
    if mode.is_1d:
        raise NotImplementedError("use the 3D constructors for residual checks")
    if mode.is_real and mollify is None:
        mollify = 2.0 * _cell_width(mode)
    G = mode.sample(mollify)
    op = op or DiscreteOperator(mode.wave, mode.equilibrium, G.grid)
    KG = apply_K(op, G, adjoint=mode.adjoint)
    r = KG - G * complex(mode.eigenvalue)
    return r.l2_norm() / G.l2_norm()


def _cell_width(mode):
    v = mode.grid.v_par
    if not mode.delta_part:
        return float(np.median(np.diff(v)))
    x = mode.delta_part[0].v_par
    i = int(np.clip(np.searchsorted(v, x), 1, v.size - 1))
    return float(v[i] - v[i - 1])
