"""Equilibrium distributions and the source functions derived from them.

Units: velocities in thermal speeds, frequencies in plasma frequencies and
wavenumbers in inverse Debye lengths.  Every built-in family is a weighted
sum of (possibly drifting) bi-Maxwellian components, which keeps every
derivative closed-form and analytic in the parallel velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI_32 = (2.0 * np.pi) ** 1.5


class Family(str, Enum):
    MAXWELLIAN = "maxwellian"
    BIMAXWELLIAN = "bimaxwellian"
    BUMP_ON_TAIL = "bump-on-tail"
    TWO_STREAM = "two-stream"


@dataclass(frozen=True)
class Component:
    weight: float
    vt_perp: float
    vt_par: float
    drift: float = 0.0


_DEFAULTS = {
    Family.MAXWELLIAN: {"vt": 1.0},
    Family.BIMAXWELLIAN: {"vt_perp": 1.0, "vt_par": 1.0},
    Family.BUMP_ON_TAIL: {"vt": 1.0, "beam_fraction": 0.1, "beam_drift": 4.0, "beam_vt": 0.5},
    Family.TWO_STREAM: {"vt": 1.0, "drift": 2.0},
}


@dataclass(frozen=True)
class EquilibriumDistribution:
    """Axisymmetric equilibrium ``f0(v_perp, v_par)`` normalised to unit density."""

    kind: Family = Family.MAXWELLIAN
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = Family(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.params) - set(_DEFAULTS[kind])
        if unknown:
            raise ValueError(f"unknown parameters for {kind.value}: {sorted(unknown)}")
        merged = {**_DEFAULTS[kind], **self.params}
        for key, val in merged.items():
            if not np.isfinite(val):
                raise ValueError(f"parameter {key} must be finite")
        object.__setattr__(self, "params", merged)
        comps = self.components
        if any(c.vt_perp <= 0 or c.vt_par <= 0 for c in comps):
            raise ValueError("thermal speeds must be positive")
        if any(c.weight < 0 for c in comps):
            raise ValueError("component weights must be non-negative")

    @classmethod
    def maxwellian(cls, vt=1.0):
        return cls(Family.MAXWELLIAN, {"vt": vt})

    @classmethod
    def two_stream(cls, drift=2.0, vt=1.0):
        return cls(Family.TWO_STREAM, {"vt": vt, "drift": drift})

    @property
    def components(self) -> tuple[Component, ...]:
        p = self.params
        if self.kind is Family.MAXWELLIAN:
            return (Component(1.0, p["vt"], p["vt"]),)
        if self.kind is Family.BIMAXWELLIAN:
            return (Component(1.0, p["vt_perp"], p["vt_par"]),)
        if self.kind is Family.BUMP_ON_TAIL:
            b = p["beam_fraction"]
            if not 0.0 <= b <= 1.0:
                raise ValueError("beam_fraction must lie in [0, 1]")
            return (
                Component(1.0 - b, p["vt"], p["vt"]),
                Component(b, p["vt"], p["beam_vt"], p["beam_drift"]),
            )
        if self.kind is Family.TWO_STREAM:
            return (
                Component(0.5, p["vt"], p["vt"], p["drift"]),
                Component(0.5, p["vt"], p["vt"], -p["drift"]),
            )
        raise NotImplementedError(f"equilibrium family {self.kind!r}")

    def to_dict(self):
        return {"family": self.kind.value, "params": dict(self.params)}


@dataclass(frozen=True)
class WaveConfig:
    k_perp: float
    k_par: float
    omega_p: float = 1.0
    omega_0: float = 0.0

    def __post_init__(self):
        for name in ("k_perp", "k_par", "omega_p", "omega_0"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.k_perp < 0 or self.k_par < 0:
            raise ValueError("k_perp and k_par must be non-negative")
        if self.k <= 0:
            raise ValueError("wavenumber must be non-zero")
        if self.omega_0 < 0:
            raise ValueError("omega_0 must be non-negative")
        if self.omega_p < 0:
            raise ValueError("omega_p must be non-negative")

    @property
    def k(self) -> float:
        return float(np.hypot(self.k_perp, self.k_par))

    @property
    def magnetized(self) -> bool:
        return self.omega_0 > 0

    @property
    def eta_scale(self) -> float:
        return self.omega_p**2 / self.k**2

    def to_dict(self):
        return {"k_perp": self.k_perp, "k_par": self.k_par,
                "omega_p": self.omega_p, "omega_0": self.omega_0}


def _inputs(v_perp, v_par):
    v_perp = np.asarray(v_perp, dtype=float)
    v_par = np.asarray(v_par)
    if not (np.all(np.isfinite(v_perp)) and np.all(np.isfinite(v_par))):
        raise ValueError("velocities must be finite")
    if np.any(v_perp < 0):
        raise ValueError("v_perp must be non-negative")
    return v_perp, v_par


def _component_values(c: Component, v_perp, v_par):
    # v_par may be complex (analytic continuation of resonance lines)
    return (c.weight / (TWO_PI_32 * c.vt_perp**2 * c.vt_par)
            * np.exp(-0.5 * (v_perp / c.vt_perp) ** 2 - 0.5 * ((v_par - c.drift) / c.vt_par) ** 2))


def eval_f0(eq: EquilibriumDistribution, v_perp, v_par):
    v_perp, v_par = _inputs(v_perp, v_par)
    return sum(_component_values(c, v_perp, v_par) for c in eq.components)


def df0_dvperp(eq, v_perp, v_par):
    v_perp, v_par = _inputs(v_perp, v_par)
    return sum(-(v_perp / c.vt_perp**2) * _component_values(c, v_perp, v_par)
               for c in eq.components)


def df0_dvpar(eq, v_perp, v_par):
    v_perp, v_par = _inputs(v_perp, v_par)
    return sum(-((v_par - c.drift) / c.vt_par**2) * _component_values(c, v_perp, v_par)
               for c in eq.components)


def eta_perp(eq, wave: WaveConfig, v_perp, v_par):
    return wave.eta_scale * wave.k_perp * df0_dvperp(eq, v_perp, v_par)


def eta_par(eq, wave: WaveConfig, v_perp, v_par):
    return wave.eta_scale * wave.k_par * df0_dvpar(eq, v_perp, v_par)


def eval_eta(eq, wave: WaveConfig, v):
    """Source function ``eta = (w_p^2/k^2) k . grad f0`` at Cartesian ``v``.

    ``v`` has trailing axis ``(vx, vy, vz)`` with ``B0`` along z and ``k``
    in the x-z plane, so ``eta = eta_perp cos(theta) + eta_par``.
    """
    v = np.asarray(v, dtype=float)
    vx, vy, vz = v[..., 0], v[..., 1], v[..., 2]
    vp = np.hypot(vx, vy)
    cos_t = np.where(vp > 0, vx / np.where(vp > 0, vp, 1.0), 0.0)
    return eta_perp(eq, wave, vp, vz) * cos_t + eta_par(eq, wave, vp, vz)


def projected_components(eq, wave: WaveConfig):
    """Mean and standard deviation of each component projected on ``k``."""
    k = wave.k
    out = []
    for c in eq.components:
        sigma = np.sqrt((wave.k_perp * c.vt_perp) ** 2 + (wave.k_par * c.vt_par) ** 2) / k
        out.append((c.weight, wave.k_par * c.drift / k, sigma))
    return out


def reduced_f0(eq, wave, u):
    """Equilibrium integrated over the two velocity components normal to ``k``."""
    u = np.asarray(u)
    return sum(w * np.exp(-0.5 * ((u - mu) / s) ** 2) / (np.sqrt(2 * np.pi) * s)
               for w, mu, s in projected_components(eq, wave))


def eta_bar(eq, wave, u):
    """Reduced source ``(w_p^2/k) dF/du`` along ``k``; analytic for complex ``u``."""
    u = np.asarray(u)
    dF = sum(-(u - mu) / s**2 * w * np.exp(-0.5 * ((u - mu) / s) ** 2) / (np.sqrt(2 * np.pi) * s)
             for w, mu, s in projected_components(eq, wave))
    return wave.omega_p**2 / wave.k * dF
