"""Quasiconcave constraint functionals g(u) >= 0 and equation-specific sets.

A constraint functional maps an m-component state to a scalar; the admissible
set is where every functional in a :class:`ConstraintSet` is non-negative.
Quasiconcavity is assumed, not checked. Functional evaluation is vectorized
over leading axes (u has shape (..., m)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

INDEPENDENT = "independent"
SEQUENTIAL = "sequential"

# Clamp for non-finite g values produced by states outside the functional's
# domain (e.g. pressure probed at rho <= 0 on an FD stencil point outside the
# element). h(g) saturates at -1 as g -> -inf, so the clamp is benign.
_G_CLAMP = 1e100


@dataclass(frozen=True)
class ConstraintFunctional:
    """A scalar functional g(u); the constraint is g(u) >= 0."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    linear: bool
    sequence: int = 0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            g = self.fn(np.asarray(u, dtype=float))
        return np.nan_to_num(g, nan=-_G_CLAMP, posinf=_G_CLAMP, neginf=-_G_CLAMP)


@dataclass(frozen=True)
class ConstraintSet:
    functionals: tuple[ConstraintFunctional, ...]
    mode: str = INDEPENDENT

    def __post_init__(self):
        if self.mode not in (INDEPENDENT, SEQUENTIAL):
            raise ConfigError(f"unknown constraint application mode {self.mode!r}")
        object.__setattr__(self, "functionals", tuple(self.functionals))

    def __iter__(self):
        return iter(self.functionals)

    def __len__(self) -> int:
        return len(self.functionals)


def _selector(mu, gamma: float | None):
    """Resolve a mu selector to (name, vectorized fn, linear flag)."""
    if isinstance(mu, int):
        return f"u{mu}", lambda u, i=mu: u[..., i], True
    if mu in ("u", "value", "component"):
        return "u", lambda u: u[..., 0], True
    if mu == "density":
        return "density", lambda u: u[..., 0], True
    if mu == "pressure":
        if gamma is None:
            raise ConfigError("pressure selector requires gamma")
        return "pressure", lambda u: _pressure(u, gamma), False
    raise ConfigError(f"unknown selector {mu!r}")


def min_principle(mu, c: float, gamma: float | None = None) -> ConstraintFunctional:
    """Constraint mu(u) >= c as the functional g(u) = mu(u) - c."""
    name, fn, linear = _selector(mu, gamma)
    return ConstraintFunctional(f"{name}-min", lambda u: fn(u) - c, linear)


def interval_bounds(mu, a: float, b: float, gamma: float | None = None
                    ) -> tuple[ConstraintFunctional, ConstraintFunctional]:
    """Constraints a <= mu(u) <= b as the pair g1 = mu - a, g2 = b - mu."""
    if b <= a:
        raise ConfigError(f"empty interval [{a}, {b}]")
    name, fn, linear = _selector(mu, gamma)
    g1 = ConstraintFunctional(f"{name}-lower", lambda u: fn(u) - a, linear)
    g2 = ConstraintFunctional(f"{name}-upper", lambda u: b - fn(u), linear, sequence=1)
    return g1, g2


def _pressure(u: np.ndarray, gamma: float) -> np.ndarray:
    rho = u[..., 0]
    mom = u[..., 1:-1]
    energy = u[..., -1]
    return (gamma - 1.0) * (energy - 0.5 * np.sum(mom * mom, axis=-1) / rho)


def euler_pressure(u: np.ndarray, gamma: float) -> np.ndarray:
    """Pressure P = (gamma - 1)(E - m.m / (2 rho)).

    Density must be nonzero; the sequential limiting order (density before
    pressure) guarantees that, and violating it is a programming error.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u[..., 0] == 0.0):
        raise ZeroDivisionError("pressure evaluated at zero density; "
                                "limit density before pressure")
    return _pressure(u, gamma)


def euler_positivity_set(rho_min: float = 1e-11, p_min: float = 1e-11,
                         gamma: float = 1.4) -> ConstraintSet:
    """Sequential density-then-pressure positivity constraints for gas dynamics."""
    if rho_min <= 0.0 or p_min <= 0.0:
        raise ConfigError("rho_min and p_min must be positive")
    density = ConstraintFunctional("density", lambda u: u[..., 0] - rho_min, True, sequence=0)
    pressure = ConstraintFunctional(
        "pressure", lambda u: _pressure(u, gamma) - p_min, False, sequence=1
    )
    return ConstraintSet((density, pressure), SEQUENTIAL)


def quasiconcavity_witness(g: ConstraintFunctional, ua: np.ndarray, ub: np.ndarray,
                           thetas: Sequence[float] = (0.25, 0.5, 0.75)) -> float:
    """Worst violation of g(theta ua + (1-theta) ub) >= theta g(ua) + (1-theta) g(ub).

    Diagnostic sampler for the concavity assumption along segments; returns the
    most negative margin found (>= 0 means no violation observed).
    """
    ua = np.asarray(ua, dtype=float)
    ub = np.asarray(ub, dtype=float)
    worst = np.inf
    for theta in thetas:
        mid = g(theta * ua + (1.0 - theta) * ub)
        chord = theta * g(ua) + (1.0 - theta) * g(ub)
        worst = min(worst, float(np.min(mid - chord)))
    return worst
