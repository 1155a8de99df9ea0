"""Numeric kernels: integer-order Bessel functions, the plasma dispersion
function and principal-value quadrature."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import wofz

SQRT_PI = np.sqrt(np.pi)

_BIG = 1e250


def _check_finite(x, name="x"):
    arr = np.asarray(x)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def bessel_table(n_max: int, x) -> np.ndarray:
    """Return ``J_n(x)`` for ``n = -n_max..n_max``.

    Miller's downward recurrence normalised with
    ``J_0 + 2 * sum_k J_2k = 1``.  The result has shape
    ``(2 * n_max + 1,) + x.shape`` and row ``n + n_max`` holds ``J_n``.
    """
    x = _check_finite(np.asarray(x, dtype=float))
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    shape = x.shape
    xs = np.abs(x.ravel())
    out = np.zeros((n_max + 1, xs.size))

    zero = xs == 0.0
    out[0, zero] = 1.0
    nz = ~zero
    if np.any(nz):
        xv = xs[nz]
        top = max(n_max, int(np.ceil(xv.max())))
        start = top + 20 + int(np.sqrt(40.0 * top))
        start += start % 2
        j_next = np.zeros_like(xv)
        j_cur = np.full_like(xv, 1e-300)
        norm = np.zeros_like(xv)
        vals = np.zeros((n_max + 1, xv.size))
        for k in range(start, 0, -1):
            j_prev = (2.0 * k / xv) * j_cur - j_next
            j_next, j_cur = j_cur, j_prev
            # j_cur now holds J_{k-1} up to scale
            kk = k - 1
            if kk <= n_max:
                vals[kk] = j_cur
            if kk > 0 and kk % 2 == 0:
                norm += 2.0 * j_cur
            big = np.abs(j_cur) > _BIG
            if np.any(big):
                s = np.where(big, 1.0 / _BIG, 1.0)
                j_cur *= s
                j_next *= s
                norm *= s
                vals *= s
        norm += j_cur  # J_0 term
        out[:, nz] = vals / norm

    # J_n(-x) = (-1)^n J_n(x)
    neg = x.ravel() < 0
    if np.any(neg):
        sign = np.where(np.arange(n_max + 1) % 2 == 1, -1.0, 1.0)
        out[:, neg] *= sign[:, None]

    full = np.empty((2 * n_max + 1, xs.size))
    full[n_max:] = out
    parity = np.where(np.arange(1, n_max + 1) % 2 == 1, -1.0, 1.0)
    full[:n_max] = (out[1:] * parity[:, None])[::-1]
    return full.reshape((2 * n_max + 1,) + shape)


def bessel_J(n: int, x):
    """Integer-order Bessel function of the first kind."""
    n = int(n)
    tab = bessel_table(abs(n), x)
    return tab[n + abs(n)]


def plasma_Z(zeta):
    """Plasma dispersion function, continued from ``Im zeta > 0``.

    Entire in ``zeta``; evaluated through the Faddeeva function,
    ``Z(zeta) = i sqrt(pi) w(zeta)``.
    """
    zeta = np.asarray(zeta, dtype=complex)
    _check_finite(zeta, "zeta")
    with np.errstate(invalid="ignore", over="ignore"):
        out = 1j * SQRT_PI * wofz(zeta)
    return out[()] if out.ndim == 0 else out


def plasma_Z_prime(zeta):
    zeta = np.asarray(zeta, dtype=complex)
    return -2.0 * (1.0 + zeta * plasma_Z(zeta))


class PoleHandling(str, Enum):
    SUBTRACTION = "subtraction"
    SPLIT_SYMMETRIC = "split_symmetric"


@dataclass(frozen=True)
class PVQuadratureRule:
    """Gauss-Legendre rule on ``[lower, upper]`` used for principal values."""

    nodes: np.ndarray
    weights: np.ndarray
    lower: float
    upper: float
    pole_handling: PoleHandling = PoleHandling.SUBTRACTION

    @classmethod
    def gauss_legendre(cls, lower, upper, n=64, pole_handling="subtraction"):
        x, w = np.polynomial.legendre.leggauss(int(n))
        half = 0.5 * (upper - lower)
        nodes = lower + half * (x + 1.0)
        return cls(nodes, w * half, float(lower), float(upper), PoleHandling(pole_handling))

    def integrate(self, values):
        return np.tensordot(np.asarray(values), self.weights, axes=([-1], [0]))


def _gl_on(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), w * h


def pv_integral(integrand, pole: float, rule: PVQuadratureRule):
    """Principal value of ``int integrand(v) / (v - pole) dv`` over the rule span.

    ``integrand`` must accept an array of speeds and return values whose
    last axis runs over those speeds (leading axes are batched).
    """
    pole = float(pole)
    c, b = rule.lower, rule.upper
    if not (c < pole < b):
        raise ValueError(f"pole {pole} outside quadrature span ({c}, {b})")
    g_pole = np.asarray(integrand(np.array([pole])))[..., 0]

    if rule.pole_handling is PoleHandling.SUBTRACTION:
        v = rule.nodes
        g = np.asarray(integrand(v))
        diff = v - pole
        safe = np.abs(diff) > 1e-300
        q = np.where(safe, (g - g_pole[..., None]) / np.where(safe, diff, 1.0), 0.0)
        return rule.integrate(q) + g_pole * np.log(abs((b - pole) / (pole - c)))

    # split-symmetric: fold the interval symmetric about the pole, integrate
    # the remainder as an ordinary integral
    n = rule.nodes.size
    d = min(pole - c, b - pole)
    s, ws = _gl_on(0.0, d, n)
    gp = np.asarray(integrand(pole + s))
    gm = np.asarray(integrand(pole - s))
    total = np.tensordot((gp - gm) / s, ws, axes=([-1], [0]))
    if pole - c > b - pole:
        lo, hi = c, pole - d
    else:
        lo, hi = pole + d, b
    if hi - lo > 0:
        v, w = _gl_on(lo, hi, n)
        total = total + np.tensordot(np.asarray(integrand(v)) / (v - pole), w, axes=([-1], [0]))
    return total
