"""A posteriori subcell slope limiting: low-order candidate + DMP indicator.

The low-order candidate is a first-order finite-volume update on the subcell
grid induced by the Gauss-Lobatto weights (subcell widths = weight x element
width / 2 per axis), with Rusanov/upwind fluxes at interior subcell interfaces
and the DG interface fluxes at element faces. That construction makes the
subcell-weighted mean of the candidate telescope to the exact DG mean update,
so switching candidates never changes the element mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equations import ADVECTION, EquationSet, rusanov_flux, upwind_flux
from .errors import ConfigError

_EX = np.array([1.0, 0.0])
_EY = np.array([0.0, 1.0])


@dataclass(frozen=True)
class IndicatorConfig:
    enabled: bool = False
    eps_relax: float = 1e-2    # relaxation of the low-order min/max bounds
    variable: int = 0          # indicator component (density for Euler, u for scalars)

    def __post_init__(self):
        if self.eps_relax <= 0.0:
            raise ConfigError("eps_relax must be positive")


def subcell_boundaries(weights: np.ndarray) -> np.ndarray:
    """Reference coordinates of the subcell interfaces induced by the weights."""
    return np.concatenate(([-1.0], -1.0 + np.cumsum(weights)))


def _interior_flux(um, up, eq: EquationSet, normal, c_interface=None):
    """Directional flux between adjacent subcells; states have components last."""
    if eq.kind == ADVECTION:
        cn = np.tensordot(c_interface, normal[: c_interface.shape[-1]], axes=(-1, 0))
        return upwind_flux(um, up, cn[..., None])
    return rusanov_flux(um, up, normal[: eq.dim], eq, context="subcell interface")


def low_order_update_1d(u: np.ndarray, f_left: np.ndarray, f_right: np.ndarray,
                        dt: float, width: float, weights: np.ndarray,
                        eq: EquationSet, c_interface: np.ndarray | None = None
                        ) -> np.ndarray:
    """First-order subcell update of nodal states u (ne, m, n_nodes).

    f_left/f_right are the DG interface fluxes at the element faces (ne, m);
    c_interface holds the advection field at interior subcell interfaces
    (ne, n_nodes - 1, 1) when the equation set needs it.
    """
    um = np.moveaxis(u[:, :, :-1], 1, -1)
    up = np.moveaxis(u[:, :, 1:], 1, -1)
    f_int = np.moveaxis(_interior_flux(um, up, eq, _EX, c_interface), -1, 1)
    fx = np.concatenate([f_left[:, :, None], f_int, f_right[:, :, None]], axis=2)
    div = (fx[:, :, 1:] - fx[:, :, :-1]) / (0.5 * width * weights)[None, None, :]
    return u - dt * div


def low_order_update_2d(u: np.ndarray, faces: dict, dt: float,
                        widths: np.ndarray, weights_1d: np.ndarray,
                        eq: EquationSet, c_interfaces=None) -> np.ndarray:
    """First-order subcell update on tensor-product quads.

    u is (ne, m, ny, nx); faces holds the DG fluxes 'xl','xr' (ne, m, ny) and
    'yl','yr' (ne, m, nx); c_interfaces = (cx, cy) advection samples at the
    interior x/y subcell interfaces when needed.
    """
    arr = np.moveaxis(u, 1, -1)                     # (ne, ny, nx, m)
    cx, cy = c_interfaces if c_interfaces is not None else (None, None)

    fx_int = _interior_flux(arr[:, :, :-1], arr[:, :, 1:], eq, _EX, cx)
    fx = np.concatenate(
        [np.moveaxis(faces["xl"], 1, -1)[:, :, None], fx_int,
         np.moveaxis(faces["xr"], 1, -1)[:, :, None]], axis=2)
    div = (fx[:, :, 1:] - fx[:, :, :-1]) / (0.5 * widths[0] * weights_1d)[None, None, :, None]

    fy_int = _interior_flux(arr[:, :-1], arr[:, 1:], eq, _EY, cy)
    fy = np.concatenate(
        [np.moveaxis(faces["yl"], 1, -1)[:, None], fy_int,
         np.moveaxis(faces["yr"], 1, -1)[:, None]], axis=1)
    div += (fy[:, 1:] - fy[:, :-1]) / (0.5 * widths[1] * weights_1d)[None, :, None, None]

    return u - dt * np.moveaxis(div, -1, 1)


def dmp_indicator(u_low: np.ndarray, u_high: np.ndarray, cfg: IndicatorConfig) -> np.ndarray:
    """Relaxed discrete-maximum-principle switch: True selects the low-order update.

    Bounds are (1 -/+ eps) times the low-order nodal min/max of the indicator
    variable, applied verbatim (negative minima are tightened, not relaxed).
    """
    mu_low = u_low[:, cfg.variable].reshape(len(u_low), -1)
    mu_high = u_high[:, cfg.variable].reshape(len(u_high), -1)
    lo = (1.0 - cfg.eps_relax) * mu_low.min(axis=1)
    hi = (1.0 + cfg.eps_relax) * mu_low.max(axis=1)
    ok = np.all((mu_high >= lo[:, None]) & (mu_high <= hi[:, None]), axis=1)
    return ~ok


def select(u_high: np.ndarray, u_low: np.ndarray, flag: np.ndarray) -> np.ndarray:
    """Per-element choice between the candidates; flag=True takes the low order."""
    shape = (len(flag),) + (1,) * (u_high.ndim - 1)
    return np.where(flag.reshape(shape), u_low, u_high)
