"""Velocity grids and perturbation fields stored as gyro-angle harmonics."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_MAGIC = b"VLSH"


def gauss_legendre(lower, upper, n):
    x, w = np.polynomial.legendre.leggauss(int(n))
    half = 0.5 * (upper - lower)
    return lower + half * (x + 1.0), half * w


@dataclass(frozen=True)
class VelocityGrid:
    """Tensor Gauss-Legendre grid in ``(v_par, v_perp)`` plus a harmonic range.

    ``v_par`` spans ``[-v_cut, v_cut]`` and ``v_perp`` spans ``[0, v_cut]``.
    Fields on this grid carry harmonics ``m = -m_max..m_max`` of the gyro
    angle.
    """

    n_par: int = 64
    n_perp: int = 24
    v_cut: float = 8.0
    m_max: int = 0

    def __post_init__(self):
        if self.n_par < 2 or self.n_perp < 1:
            raise ValueError("grid needs n_par >= 2 and n_perp >= 1")
        if not self.v_cut > 0:
            raise ValueError("v_cut must be positive")
        if self.m_max < 0:
            raise ValueError("m_max must be non-negative")
        vpar, wpar = gauss_legendre(-self.v_cut, self.v_cut, self.n_par)
        vperp, wperp = gauss_legendre(0.0, self.v_cut, self.n_perp)
        object.__setattr__(self, "v_par", vpar)
        object.__setattr__(self, "w_par", wpar)
        object.__setattr__(self, "v_perp", vperp)
        object.__setattr__(self, "w_perp", wperp)
        # d^3v weights for the theta-averaged (m = 0) harmonic
        object.__setattr__(self, "measure", 2.0 * np.pi * np.outer(wpar, wperp * vperp))

    @property
    def m_values(self):
        return np.arange(-self.m_max, self.m_max + 1)

    @property
    def shape(self):
        return (2 * self.m_max + 1, self.n_par, self.n_perp)

    def mesh(self):
        """``(v_par, v_perp)`` broadcast to ``(n_par, n_perp)``."""
        return np.meshgrid(self.v_par, self.v_perp, indexing="ij")

    def with_m_max(self, m_max):
        return VelocityGrid(self.n_par, self.n_perp, self.v_cut, int(m_max))

    def integrate(self, values):
        """``int values d^3v`` for theta-independent values on the (n_par, n_perp) mesh."""
        return np.sum(self.measure * values, axis=(-2, -1))

    def to_dict(self):
        return {"n_par": self.n_par, "n_perp": self.n_perp,
                "v_cut": self.v_cut, "m_max": self.m_max}


@dataclass(frozen=True)
class Grid1D:
    """Gauss-Legendre grid for the reduced one-dimensional problem."""

    n: int = 256
    v_cut: float = 8.0

    def __post_init__(self):
        u, w = gauss_legendre(-self.v_cut, self.v_cut, self.n)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)


@dataclass
class PerturbationField:
    """Complex ``f(v) = sum_m f_m(v_par, v_perp) exp(i m theta)`` on a grid.

    ``analytic`` optionally evaluates the harmonics off the grid,
    ``analytic(m_values, v_par, v_perp) -> array``, with ``v_par`` allowed
    complex; the pole-continued evolution needs it.
    """

    harmonics: np.ndarray
    grid: VelocityGrid
    wave: object = None
    analytic: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        self.harmonics = np.asarray(self.harmonics, dtype=complex)
        if self.harmonics.shape != self.grid.shape:
            raise ValueError(f"harmonics shape {self.harmonics.shape} != grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid, wave=None):
        return cls(np.zeros(grid.shape, complex), grid, wave)

    def harmonic(self, m):
        return self.harmonics[m + self.grid.m_max]

    def moment(self) -> complex:
        return complex(self.grid.integrate(self.harmonic(0)))

    def inner(self, other: "PerturbationField") -> complex:
        """``int conj(self) * other d^3v``."""
        _require_same_grid(self, other)
        return complex(self.grid.integrate(np.sum(np.conj(self.harmonics) * other.harmonics, axis=0)))

    def l2_norm(self) -> float:
        return float(np.sqrt(max(self.inner(self).real, 0.0)))

    def tail_ratio(self) -> float:
        """Largest edge-harmonic magnitude relative to the field maximum."""
        peak = np.abs(self.harmonics).max()
        if peak == 0:
            return 0.0
        edge = max(np.abs(self.harmonics[0]).max(), np.abs(self.harmonics[-1]).max())
        return float(edge / peak)

    def reduce_perp(self) -> np.ndarray:
        """Integrate the m = 0 harmonic over perpendicular velocities."""
        g = self.grid
        return 2.0 * np.pi * self.harmonic(0) @ (g.w_perp * g.v_perp)

    def evaluate(self, theta):
        """Sample the field at gyro angles ``theta``; returns (n_theta, n_par, n_perp)."""
        theta = np.atleast_1d(theta)
        phase = np.exp(1j * np.outer(theta, self.grid.m_values))
        return np.tensordot(phase, self.harmonics, axes=([1], [0]))

    def copy(self):
        return PerturbationField(self.harmonics.copy(), self.grid, self.wave, self.analytic)

    def __add__(self, other):
        _require_same_grid(self, other)
        return PerturbationField(self.harmonics + other.harmonics, self.grid, self.wave)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return PerturbationField(self.harmonics - other.harmonics, self.grid, self.wave)

    def __mul__(self, scalar):
        return PerturbationField(self.harmonics * scalar, self.grid, self.wave)

    __rmul__ = __mul__

    def to_bytes(self) -> bytes:
        """Binary dump: magic, three little-endian int32 dims, then row-major
        ``(re, im)`` pairs as little-endian float64."""
        header = _MAGIC + struct.pack("<3i", *self.harmonics.shape)
        body = np.ascontiguousarray(self.harmonics).astype("<c16").tobytes()
        return header + body

    @staticmethod
    def harmonics_from_bytes(data: bytes) -> np.ndarray:
        if data[:4] != _MAGIC:
            raise ValueError("not a harmonic dump")
        shape = struct.unpack("<3i", data[4:16])
        return np.frombuffer(data[16:], dtype="<c16").reshape(shape)


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("grid mismatch")


@dataclass
class Field1D:
    """Scalar ``f(u)`` on a :class:`Grid1D`; ``analytic(u)`` optionally continues it."""

    values: np.ndarray
    grid: Grid1D
    analytic: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.u.shape:
            raise ValueError("values do not match the grid")

    def moment(self) -> complex:
        return complex(np.sum(self.grid.w * self.values))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.grid.w * np.abs(self.values) ** 2)))
