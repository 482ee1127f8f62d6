"""Equation sets (fluxes, wavespeeds) and interface Riemann solvers.

States are stored conservatively with the component layout (rho, m..., E) for
gas dynamics and a single component for scalar transport. All routines are
vectorized over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericalError

ADVECTION = "linear-advection"
BURGERS = "burgers"
EULER = "euler"


@dataclass(frozen=True)
class EquationSet:
    kind: str
    dim: int
    velocity: object = None     # constant vector or callable c(x) for advection
    gamma: float = 1.4

    @property
    def n_components(self) -> int:
        if self.kind == EULER:
            return self.dim + 2
        return 1

    @property
    def is_scalar(self) -> bool:
        return self.kind != EULER

    def velocity_at(self, x: np.ndarray) -> np.ndarray:
        """Advection field at points x (..., dim) -> (..., dim)."""
        if callable(self.velocity):
            return np.asarray(self.velocity(x), dtype=float)
        c = np.broadcast_to(np.atleast_1d(np.asarray(self.velocity, dtype=float)),
                            np.shape(x))
        return np.array(c)

    def pressure(self, u: np.ndarray) -> np.ndarray:
        mom = u[..., 1:-1]
        return (self.gamma - 1.0) * (u[..., -1] - 0.5 * np.sum(mom * mom, axis=-1) / u[..., 0])

    def sound_speed(self, u: np.ndarray) -> np.ndarray:
        return np.sqrt(self.gamma * self.pressure(u) / u[..., 0])

    def max_wavespeed(self, u: np.ndarray, c_nodes: np.ndarray | None = None) -> float:
        """Largest characteristic speed over the given states (for time steps)."""
        if self.kind == ADVECTION:
            return float(np.max(np.linalg.norm(c_nodes, axis=-1)))
        if self.kind == BURGERS:
            return float(np.max(np.abs(u[..., 0])))
        rho = u[..., 0]
        if np.any(rho <= 0.0):
            raise NumericalError("non-positive density in wavespeed evaluation")
        p = self.pressure(u)
        if np.any(p <= 0.0):
            raise NumericalError("non-positive pressure in wavespeed evaluation")
        v = np.linalg.norm(u[..., 1:-1], axis=-1) / rho
        return float(np.max(v + np.sqrt(self.gamma * p / rho)))

    def flux_along(self, u: np.ndarray, axis: int, c: np.ndarray | None = None) -> np.ndarray:
        """Directional physical flux F(u) . e_axis; u is (..., m) -> (..., m).

        For advection, c is the advection field sampled at the same points.
        """
        if self.kind == ADVECTION:
            return c[..., axis, None] * u
        if self.kind == BURGERS:
            return 0.5 * u * u
        rho = u[..., 0]
        mom = u[..., 1:-1]
        energy = u[..., -1]
        p = self.pressure(u)
        vn = mom[..., axis] / rho
        out = np.empty_like(u)
        out[..., 0] = mom[..., axis]
        out[..., 1:-1] = mom * vn[..., None]
        out[..., 1 + axis] += p
        out[..., -1] = (energy + p) * vn
        return out


def advection_equations(velocity, dim: int) -> EquationSet:
    return EquationSet(ADVECTION, dim, velocity=velocity)


def burgers_equations() -> EquationSet:
    return EquationSet(BURGERS, 1)


def euler_equations(dim: int, gamma: float = 1.4) -> EquationSet:
    if gamma <= 1.0:
        raise ConfigError(f"gamma must exceed 1, got {gamma}")
    return EquationSet(EULER, dim, gamma=gamma)


def upwind_flux(um: np.ndarray, up: np.ndarray, cn: np.ndarray) -> np.ndarray:
    """Upwind directional flux for scalar advection: cn >= 0 takes the - side."""
    return np.where(cn >= 0.0, cn * um, cn * up)


def rusanov_flux(um: np.ndarray, up: np.ndarray, n: np.ndarray, eq: EquationSet,
                 context: str = "interface") -> np.ndarray:
    """Rusanov flux 0.5 (F- + F+) . n - 0.5 s (u+ - u-) with the Davis wavespeed.

    um/up are (..., m); n is a unit normal (dim,) shared by all points. For
    gas dynamics both input states must be admissible (positive density and
    pressure); inadmissible inputs raise, naming the offending entry, since
    they signal a limiting failure upstream.
    """
    um = np.asarray(um, dtype=float)
    up = np.asarray(up, dtype=float)
    n = np.atleast_1d(np.asarray(n, dtype=float))
    if eq.kind == BURGERS:
        s = np.maximum(np.abs(um[..., 0]), np.abs(up[..., 0]))
        fm = 0.5 * um[..., 0] ** 2
        fp = 0.5 * up[..., 0] ** 2
        return (0.5 * (fm + fp) * n[0] - 0.5 * s * (up[..., 0] - um[..., 0]))[..., None]
    if eq.kind != EULER:
        raise ConfigError(f"rusanov_flux does not support {eq.kind!r}")

    _check_admissible(um, eq, context + " (- side)")
    _check_admissible(up, eq, context + " (+ side)")
    fm = _euler_normal_flux(um, n, eq)
    fp = _euler_normal_flux(up, n, eq)
    vnm = np.tensordot(um[..., 1:-1], n, axes=(-1, 0)) / um[..., 0]
    vnp = np.tensordot(up[..., 1:-1], n, axes=(-1, 0)) / up[..., 0]
    s = np.maximum(np.abs(vnm) + eq.sound_speed(um), np.abs(vnp) + eq.sound_speed(up))
    return 0.5 * (fm + fp) - 0.5 * s[..., None] * (up - um)


def _euler_normal_flux(u: np.ndarray, n: np.ndarray, eq: EquationSet) -> np.ndarray:
    rho = u[..., 0]
    mom = u[..., 1:-1]
    energy = u[..., -1]
    p = eq.pressure(u)
    vn = np.tensordot(mom, n, axes=(-1, 0)) / rho
    out = np.empty_like(u)
    out[..., 0] = rho * vn
    out[..., 1:-1] = mom * vn[..., None] + p[..., None] * n
    out[..., -1] = (energy + p) * vn
    return out


def _check_admissible(u: np.ndarray, eq: EquationSet, context: str) -> None:
    rho = u[..., 0]
    p = eq.pressure(u)
    bad = ~(np.isfinite(rho) & (rho > 0.0) & np.isfinite(p) & (p > 0.0))
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
        raise NumericalError(
            f"inadmissible state at {context}, entry {idx}: "
            f"rho={rho[idx]:.6e}, P={p[idx]:.6e}"
        )
