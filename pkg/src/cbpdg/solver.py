"""Collocation DG (via flux reconstruction) spatial scheme and SSP-RK3 stepping.

Solution unknowns are nodal values at tensor-product Gauss-Lobatto points. The
residual is the strong-form flux-reconstruction derivative with DG-recovering
(right-Radau) correction functions applied direction by direction, so the
element-mean update depends on the interface fluxes only. Limiting and the
optional subcell stabilizer run after every SSP-RK3 substage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from . import stabilize
from .basis import build_basis, gauss_lobatto
from .constraints import ConstraintSet
from .equations import ADVECTION, BURGERS, EULER, EquationSet, rusanov_flux, upwind_flux
from .errors import ConfigError, NumericalError
from .limiter import MODE_NONE, BatchLimitResult, LimiterConfig, limit_batch
from .mesh import DIRICHLET, Mesh
from .reference import reference_element
from .stabilize import IndicatorConfig

SSP_RK3_STAGES = ((0.0, 1.0), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0))

_EX = np.array([1.0, 0.0])
_EY = np.array([0.0, 1.0])


@dataclass
class SimulationState:
    u: np.ndarray          # (n_elements, m, n_nodes)
    t: float = 0.0
    step: int = 0


@dataclass
class StepStats:
    """Per-step limiter/stabilizer activity, accumulated across substages."""

    limited_elements: int = 0
    alpha_max: float = 0.0
    fallback_elements: int = 0
    edge_elements: int = 0
    subcell_selections: int = 0
    min_alpha_gap: float = np.inf     # min over elements of alpha_cont - alpha_disc

    def absorb(self, res: BatchLimitResult) -> None:
        self.limited_elements += int(np.count_nonzero(res.alpha_max > 0.0))
        self.alpha_max = max(self.alpha_max, float(res.alpha_max.max(initial=0.0)))
        self.fallback_elements += int(np.count_nonzero(res.used_fallback.any(axis=0)))
        self.edge_elements += int(np.count_nonzero(res.edge_case.any(axis=0)))
        gap = res.alpha - res.alpha_discrete
        self.min_alpha_gap = min(self.min_alpha_gap, float(gap.min(initial=np.inf)))


def ssp_rk3_step(u: np.ndarray, dt: float, rhs, stage_filter=None) -> np.ndarray:
    """One Shu-Osher SSP-RK3 step.

    rhs(v) returns (du/dt, aux); stage_filter(candidate, v, dt, aux), when
    given, post-processes each stage (subcell selection + limiting).
    """
    u0 = np.asarray(u, dtype=float)
    v = u0
    for a, b in SSP_RK3_STAGES:
        dv, aux = rhs(v)
        w = a * u0 + b * (v + dt * dv)
        if stage_filter is not None:
            w = stage_filter(w, v, dt, aux)
        v = w
    return v


def _diff_matrix(nodes: np.ndarray) -> np.ndarray:
    """Nodal differentiation matrix via the Legendre Vandermonde."""
    p = len(nodes) - 1
    V = legendre.legvander(nodes, p)
    eye = np.eye(p + 1)
    dV = np.column_stack(
        [legendre.legval(nodes, legendre.legder(eye[:, k])) for k in range(p + 1)]
    )
    return dV @ np.linalg.inv(V)


def _radau_correction_derivs(p: int, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives at the nodes of the DG-recovering (Radau) correction functions."""
    c = np.zeros(p + 2)
    c[p + 1] = 1.0
    c[p] = -1.0
    c *= (-1.0) ** (p + 1) / 2.0          # g_left = right Radau polynomial
    dgl = legendre.legval(nodes, legendre.legder(c))
    dgr = -dgl[::-1].copy()               # g_right(x) = g_left(-x)
    return dgl, dgr


class Discretization:
    """Wires mesh, equations, bases, limiting and stabilization together."""

    def __init__(self, mesh: Mesh, eq: EquationSet, p: int, cset: ConstraintSet,
                 limiter_cfg: LimiterConfig, indicator_cfg: IndicatorConfig | None = None,
                 ic=None):
        if eq.dim != mesh.dim:
            raise ConfigError("equation set and mesh dimensions differ")
        self.mesh = mesh
        self.eq = eq
        self.p = p
        self.cset = cset
        self.limiter_cfg = limiter_cfg
        self.indicator_cfg = indicator_cfg or IndicatorConfig()
        self.ic = ic

        self.nodal, self.mono = build_basis(mesh.kind, p)
        self.elem = reference_element(mesh.kind)
        self.x1, self.w1 = gauss_lobatto(p)
        self.D = _diff_matrix(self.x1)
        self.dgl, self.dgr = _radau_correction_derivs(p, self.x1)
        self.node_phys = mesh.to_physical(self.nodal.nodes)    # (ne, ns, d)
        self.n1 = p + 1

        self._setup_interfaces()
        if eq.kind == ADVECTION:
            self._setup_advection_fields()
        if mesh.boundary == DIRICHLET:
            if ic is None:
                raise ConfigError("Dirichlet boundaries need the initial condition "
                                  "to freeze ghost states")
            self._setup_ghosts()

    # ------------------------------------------------------------------ setup

    def _setup_interfaces(self) -> None:
        mesh = self.mesh
        if mesh.dim == 1:
            n = mesh.shape[0]
            self._ifc_x = mesh.box[0] + mesh.scales[0] * np.arange(n + 1)
        else:
            self._east = mesh.neighbors[:, 1]
            self._west = mesh.neighbors[:, 0]
            self._north = mesh.neighbors[:, 3]
            self._south = mesh.neighbors[:, 2]

    def _setup_advection_fields(self) -> None:
        mesh, eq = self.mesh, self.eq
        self.c_nodes = eq.velocity_at(self.node_phys)          # (ne, ns, d)
        if mesh.dim == 1:
            self.c_ifc = eq.velocity_at(self._ifc_x[:, None])[:, 0]    # (n+1,)
        else:
            # Coordinates of +x face nodes of each element; shared with the
            # east neighbor so one flux per interface.
            ox, oy = mesh.origins[:, 0], mesh.origins[:, 1]
            wx, wy = mesh.scales
            y_line = 0.5 * (self.x1 + 1.0)
            xf = np.stack(
                [np.broadcast_to((ox + wx)[:, None], (mesh.n_elements, self.n1)),
                 oy[:, None] + wy * y_line[None, :]], axis=-1)
            yf = np.stack(
                [ox[:, None] + wx * y_line[None, :],
                 np.broadcast_to((oy + wy)[:, None], (mesh.n_elements, self.n1))],
                axis=-1)
            self.c_face_x = eq.velocity_at(xf)[..., 0]          # (ne, n1) c.x at +x faces
            self.c_face_y = eq.velocity_at(yf)[..., 1]          # (ne, n1) c.y at +y faces
        if self.indicator_cfg.enabled:
            self._setup_advection_subcells()

    def _setup_advection_subcells(self) -> None:
        mesh, eq = self.mesh, self.eq
        bounds = stabilize.subcell_boundaries(self.w1)[1:-1]    # interior interfaces
        frac = 0.5 * (bounds + 1.0)
        if mesh.dim == 1:
            pos = mesh.origins + mesh.scales[0] * frac[None, :]
            self.c_sub = eq.velocity_at(pos[..., None])         # (ne, n1-1, 1)
        else:
            ox, oy = mesh.origins[:, 0], mesh.origins[:, 1]
            wx, wy = mesh.scales
            yn = 0.5 * (self.x1 + 1.0)
            px = np.stack(np.broadcast_arrays(
                (ox[:, None, None] + wx * frac[None, None, :]),
                (oy[:, None, None] + wy * yn[None, :, None])), axis=-1)
            py = np.stack(np.broadcast_arrays(
                (ox[:, None, None] + wx * yn[None, None, :]),
                (oy[:, None, None] + wy * frac[None, :, None])), axis=-1)
            self.c_sub = (eq.velocity_at(px), eq.velocity_at(py))

    def _setup_ghosts(self) -> None:
        """Freeze Dirichlet ghost traces at the initial condition."""
        mesh = self.mesh
        centers = mesh.centers()
        if mesh.dim == 1:
            lo = np.array([[mesh.box[0]]])
            hi = np.array([[mesh.box[1]]])
            self.ghost_left = np.asarray(self.ic(lo, lo), dtype=float)[0]
            self.ghost_right = np.asarray(self.ic(hi, hi), dtype=float)[0]
        else:
            self.ghosts_2d = {}
            y_line = 0.5 * (self.x1 + 1.0)
            for f, axis, side in ((0, 0, 0), (1, 0, 1), (2, 1, 0), (3, 1, 1)):
                ids = np.nonzero(mesh.neighbors[:, f] < 0)[0]
                if len(ids) == 0:
                    continue
                o = mesh.origins[ids]
                pts = np.empty((len(ids), self.n1, 2))
                pts[..., axis] = o[:, axis, None] + side * mesh.scales[axis]
                other = 1 - axis
                pts[..., other] = o[:, other, None] + mesh.scales[other] * y_line
                self.ghosts_2d[f] = np.asarray(
                    self.ic(pts, centers[ids][:, None, :]), dtype=float)

    # ----------------------------------------------------------------- fluxes

    def _interface_flux_1d(self, u: np.ndarray) -> np.ndarray:
        """Directional flux at the n+1 interfaces of a 1D mesh -> (n+1, m)."""
        mesh = self.mesh
        u_l = u[:, :, 0]
        u_r = u[:, :, -1]
        if mesh.boundary == DIRICHLET:
            um = np.concatenate([self.ghost_left[None], u_r], axis=0)
            up = np.concatenate([u_l, self.ghost_right[None]], axis=0)
        else:
            um = np.concatenate([u_r[-1:], u_r], axis=0)
            up = np.concatenate([u_l, u_l[:1]], axis=0)
        if self.eq.kind == ADVECTION:
            return upwind_flux(um[:, 0], up[:, 0], self.c_ifc)[:, None]
        return rusanov_flux(um, up, np.array([1.0]), self.eq, context="x-interface")

    def _residual_1d(self, u: np.ndarray):
        mesh, eq = self.mesh, self.eq
        ut = np.moveaxis(u, 1, 2)                              # (ne, ns, m)
        c = self.c_nodes if eq.kind == ADVECTION else None
        F = np.moveaxis(eq.flux_along(ut, 0, c), 2, 1)          # (ne, m, ns)
        fhat = self._interface_flux_1d(u)
        fl = fhat[:-1]
        fr = fhat[1:]
        corr = (self.dgl[None, None, :] * (fl - F[:, :, 0])[:, :, None]
                + self.dgr[None, None, :] * (fr - F[:, :, -1])[:, :, None])
        dudt = -(2.0 / mesh.scales[0]) * (np.einsum("ij,emj->emi", self.D, F) + corr)
        return dudt, {"left": fl, "right": fr}

    def _face_flux_2d(self, u4: np.ndarray, axis: int):
        """One directional flux per interface; returns (f_lo, f_hi) per element."""
        mesh, eq = self.mesh, self.eq
        if axis == 0:
            mine = np.moveaxis(u4[:, :, :, -1], 1, 2)           # (ne, n1, m) +x trace
            theirs = np.moveaxis(u4[:, :, :, 0], 1, 2)          # -x trace
            nbr_hi, nbr_lo = self._east, self._west
            cn = self.c_face_x if eq.kind == ADVECTION else None
            normal, face_hi, face_lo = _EX, 1, 0
        else:
            mine = np.moveaxis(u4[:, :, -1, :], 1, 2)
            theirs = np.moveaxis(u4[:, :, 0, :], 1, 2)
            nbr_hi, nbr_lo = self._north, self._south
            cn = self.c_face_y if eq.kind == ADVECTION else None
            normal, face_hi, face_lo = _EY, 3, 2

        um = mine
        up = theirs[nbr_hi]
        if mesh.boundary == DIRICHLET:
            bdry = nbr_hi < 0
            if bdry.any():
                up = up.copy()
                up[bdry] = self.ghosts_2d[face_hi]
        if eq.kind == ADVECTION:
            f_hi = upwind_flux(um[..., 0], up[..., 0], cn)[..., None]
        else:
            f_hi = rusanov_flux(um, up, normal, eq,
                                context=("x-face" if axis == 0 else "y-face"))
        f_lo = f_hi[nbr_lo]
        if mesh.boundary == DIRICHLET:
            bdry = nbr_lo < 0
            if bdry.any():
                um_b = self.ghosts_2d[face_lo]
                up_b = theirs[bdry]
                if eq.kind == ADVECTION:
                    cn_b = self._c_face_lo(axis, bdry)
                    f_b = upwind_flux(um_b[..., 0], up_b[..., 0], cn_b)[..., None]
                else:
                    f_b = rusanov_flux(um_b, up_b, normal, eq, context="boundary face")
                f_lo = f_lo.copy()
                f_lo[bdry] = f_b
        return np.moveaxis(f_lo, 2, 1), np.moveaxis(f_hi, 2, 1)   # (ne, m, n1)

    def _residual_2d(self, u: np.ndarray):
        mesh, eq = self.mesh, self.eq
        ne, m, _ = u.shape
        n1 = self.n1
        u4 = u.reshape(ne, m, n1, n1)
        ut = np.moveaxis(u4, 1, 3)                              # (ne, ny, nx, m)
        if eq.kind == ADVECTION:
            c4 = self.c_nodes.reshape(ne, n1, n1, 2)
            Fx = np.moveaxis(eq.flux_along(ut, 0, c4), 3, 1)
            Fy = np.moveaxis(eq.flux_along(ut, 1, c4), 3, 1)
        else:
            Fx = np.moveaxis(eq.flux_along(ut, 0), 3, 1)
            Fy = np.moveaxis(eq.flux_along(ut, 1), 3, 1)

        fxl, fxr = self._face_flux_2d(u4, 0)
        fyl, fyr = self._face_flux_2d(u4, 1)

        dFx = np.einsum("ij,emkj->emki", self.D, Fx)
        dFx += self.dgl[None, None, None, :] * (fxl - Fx[:, :, :, 0])[:, :, :, None]
        dFx += self.dgr[None, None, None, :] * (fxr - Fx[:, :, :, -1])[:, :, :, None]

        dFy = np.einsum("ij,emjk->emik", self.D, Fy)
        dFy += self.dgl[None, None, :, None] * (fyl - Fy[:, :, 0, :])[:, :, None, :]
        dFy += self.dgr[None, None, :, None] * (fyr - Fy[:, :, -1, :])[:, :, None, :]

        dudt = -(2.0 / mesh.scales[0]) * dFx - (2.0 / mesh.scales[1]) * dFy
        faces = {"xl": fxl, "xr": fxr, "yl": fyl, "yr": fyr}
        return dudt.reshape(ne, m, n1 * n1), faces

    def residual(self, u: np.ndarray):
        """Time derivative of all nodal DOFs plus the interface fluxes used."""
        if self.mesh.dim == 1:
            return self._residual_1d(u)
        return self._residual_2d(u)

    # ------------------------------------------------------------------ steps

    def low_order_candidate(self, v: np.ndarray, faces: dict, dt: float) -> np.ndarray:
        """Forward-Euler subcell update matching the DG mean update."""
        mesh = self.mesh
        if mesh.dim == 1:
            c_sub = getattr(self, "c_sub", None)
            return stabilize.low_order_update_1d(
                v, faces["left"], faces["right"], dt, mesh.scales[0], self.w1,
                self.eq, c_sub)
        ne, m, _ = v.shape
        v4 = v.reshape(ne, m, self.n1, self.n1)
        c_sub = getattr(self, "c_sub", (None, None)) if self.eq.kind == ADVECTION else None
        out = stabilize.low_order_update_2d(v4, faces, dt, mesh.scales, self.w1,
                                            self.eq, c_sub)
        return out.reshape(ne, m, -1)

    def limit(self, u: np.ndarray):
        """Apply the configured limiter to all elements."""
        return limit_batch(u, self.nodal, self.mono, self.elem, self.cset,
                           self.limiter_cfg)

    def compute_dt(self, u: np.ndarray, cfl: float, t_remaining: float = np.inf) -> float:
        """dt = CFL * h_min / ((2p + 1) lambda_max), capped by the remaining time."""
        ut = np.moveaxis(u, 1, 2)
        c = self.c_nodes if self.eq.kind == ADVECTION else None
        lam = self.eq.max_wavespeed(ut, c)
        hmin = float(np.min(self.mesh.scales))
        if lam <= 0.0:
            return float(t_remaining)
        return float(min(cfl * hmin / ((2 * self.p + 1) * lam), t_remaining))

    def step(self, state: SimulationState, dt: float) -> StepStats:
        """Advance one SSP-RK3 step with per-substage selection and limiting."""
        stats = StepStats()
        limiting = self.limiter_cfg.mode != MODE_NONE
        stab = self.indicator_cfg.enabled

        # The subcell candidate needs the stage's convex-combination weights,
        # so run the stages explicitly rather than through the generic helper.
        u0 = state.u
        v = u0
        for a, b in SSP_RK3_STAGES:
            try:
                dv, faces = self.residual(v)
            except NumericalError as err:
                raise NumericalError(f"t={state.t:.6e}, step {state.step}: {err}") from err
            high = a * u0 + b * (v + dt * dv)
            w = high
            if stab:
                low = a * u0 + b * self.low_order_candidate(v, faces, dt)
                flag = stabilize.dmp_indicator(low, high, self.indicator_cfg)
                stats.subcell_selections += int(np.count_nonzero(flag))
                w = stabilize.select(high, low, flag)
            if limiting:
                try:
                    w, res = self.limit(w)
                except NumericalError as err:
                    raise NumericalError(
                        f"t={state.t:.6e}, step {state.step}: {err}") from err
                stats.absorb(res)
            v = w
        state.u = v
        state.t += dt
        state.step += 1
        return stats

    def initialize(self) -> SimulationState:
        """Interpolate the initial condition and apply the t=0 limiting pass."""
        if self.ic is None:
            raise ConfigError("no initial condition attached")
        centers = self.mesh.centers()[:, None, :]
        vals = np.asarray(self.ic(self.node_phys, centers), dtype=float)
        u = np.moveaxis(vals, 2, 1).copy()                     # (ne, m, ns)
        state = SimulationState(u=u)
        if self.limiter_cfg.mode != MODE_NONE:
            state.u, _ = self.limit(state.u)
        return state

    # ------------------------------------------------------------- diagnostics

    def modal_coefficients(self, u: np.ndarray) -> np.ndarray:
        """Monomial coefficients for every element: (ne, m, n_modes)."""
        return u @ self.nodal.vandermonde_inv.T

    def element_means(self, u: np.ndarray) -> np.ndarray:
        return self.modal_coefficients(u) @ self.mono.mean_weights

    def conserved_totals(self, u: np.ndarray) -> np.ndarray:
        vol = float(np.prod(self.mesh.scales))
        return self.element_means(u).sum(axis=0) * vol
