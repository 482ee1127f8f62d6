"""Squeeze limiter enforcing constraints across the whole solution polynomial.

The limited solution is the convex contraction u_hat = (1 - alpha) u + alpha
u_mean. The limiting factor comes from minimizing a modified functional

    h(u) = g(u) / g(u_mean)              if g(u) >= 0
    h(u) = g(u) / (g(u_mean) - g(u))     otherwise

over the element and setting alpha = max(0, -h**), where h** is a lower bound
on the minimum extrapolated from the optimizer state (h** = max(-1, h* - dh)
with dh = |J| |dx_last|). Minimizing h finds where the most limiting is
required, not where g is most negative, which is what makes a single
optimization pass sufficient.

The optimizer is Newton-Raphson with centered-difference derivatives, falling
back to projected gradient descent with a backtracking Armijo line search when
the Hessian is not positive definite. Iterates are kept inside the element by
the reference-element step projection. Discrete (nodes-only) limiting is the
zero-iteration special case of the same path.

Everything here is vectorized over a batch of elements; the per-element
operations delegate to the batch engine with a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import ModalSolution, MonomialBasis, NodalBasis, monomials
from .constraints import INDEPENDENT, SEQUENTIAL, ConstraintFunctional, ConstraintSet
from .errors import ConfigError, NumericalError
from .reference import ReferenceElement, project_step_batch

MODE_NONE = "none"
MODE_DISCRETE = "discrete"
MODE_CONTINUOUS = "continuous"
MODES = (MODE_NONE, MODE_DISCRETE, MODE_CONTINUOUS)

_TINY = 1e-300


@dataclass(frozen=True)
class LimiterConfig:
    mode: str = MODE_CONTINUOUS
    n_iters: int = 3
    fd_step: float = 1e-4
    tol: float = 1e-12
    beta0: float | None = None      # None -> 2 / (p + 1)
    max_line_search: int = 5
    armijo_c: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown limiter mode {self.mode!r}; expected one of {MODES}")
        if self.n_iters < 0:
            raise ConfigError("n_iters must be >= 0")

    def resolved_beta0(self, p: int) -> float:
        return self.beta0 if self.beta0 is not None else 2.0 / (p + 1)

    @property
    def effective_iters(self) -> int:
        return 0 if self.mode == MODE_DISCRETE else self.n_iters


@dataclass
class ConstraintRecord:
    """Audit record of one constraint's limiting decision on one element."""

    name: str
    alpha: float
    alpha_discrete: float
    h_star: float
    h_bound: float            # h**
    delta_h: float
    x_final: np.ndarray
    iterations: int
    used_fallback: bool
    edge_case: bool           # g(u_mean) < tol forced alpha = 1


@dataclass
class LimiterReport:
    element_id: int
    records: list[ConstraintRecord]

    @property
    def alpha_applied(self) -> float:
        return max((r.alpha for r in self.records), default=0.0)


@dataclass
class BatchLimitResult:
    """Per-constraint arrays over a batch of elements (shape (n_constraints, n_elem))."""

    names: list[str]
    alpha: np.ndarray
    alpha_discrete: np.ndarray
    h_star: np.ndarray
    h_bound: np.ndarray
    delta_h: np.ndarray
    x_final: np.ndarray       # (nc, ne, dim)
    used_fallback: np.ndarray
    edge_case: np.ndarray
    iterations: int
    alpha_max: np.ndarray     # (ne,) contraction actually applied


def eval_h(g, g_mean):
    """The modified constraint functional; both branches vanish at g = 0."""
    g = np.asarray(g, dtype=float)
    g_mean = np.asarray(g_mean, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(g >= 0.0, g / g_mean, g / (g_mean - g))


def discrete_alpha(g_nodes: np.ndarray, g_mean: float) -> float:
    """Limiting factor for nodes-only bounds preservation."""
    g_star = float(np.min(g_nodes))
    return max(0.0, g_star / (g_star - g_mean))


def fd_jacobian(h_field, x: np.ndarray, dx: float) -> np.ndarray:
    """Centered-difference gradient of a scalar field at one point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = len(x)
    pts = np.repeat(x[None, :], 2 * d, axis=0)
    for j in range(d):
        pts[2 * j, j] -= dx
        pts[2 * j + 1, j] += dx
    h = np.asarray(h_field(pts), dtype=float)
    return (h[1::2] - h[0::2]) / (2.0 * dx)


def fd_hessian(h_field, x: np.ndarray, dx: float) -> np.ndarray:
    """Centered-difference Hessian (3-point diagonal, 4-point cross terms)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = len(x)
    hc = float(np.asarray(h_field(x[None, :]))[0])
    H = np.empty((d, d))
    for j in range(d):
        pts = np.repeat(x[None, :], 2, axis=0)
        pts[0, j] -= dx
        pts[1, j] += dx
        hm, hp = np.asarray(h_field(pts), dtype=float)
        H[j, j] = (hp - 2.0 * hc + hm) / dx**2
    for i in range(d):
        for j in range(i + 1, d):
            pts = np.repeat(x[None, :], 4, axis=0)
            pts[0, [i, j]] += dx
            pts[1, i] -= dx
            pts[1, j] += dx
            pts[2, i] += dx
            pts[2, j] -= dx
            pts[3, [i, j]] -= dx
            hpp, hmp, hpm, hmm = np.asarray(h_field(pts), dtype=float)
            H[i, j] = H[j, i] = (hpp - hmp - hpm + hmm) / (4.0 * dx**2)
    return H


def _h_multi(modal, mono, pts, g, g_mean):
    """h at per-element point sets: modal (ne,m,n), pts (ne,k,d) -> (ne,k)."""
    psi = monomials(mono, pts)
    u = np.einsum("ekn,emn->ekm", psi, modal)
    return eval_h(g(u), g_mean[:, None])


def _h_single(modal, mono, pts, g, g_mean):
    """h at one point per element: pts (ne,d) -> (ne,)."""
    psi = monomials(mono, pts)
    u = np.einsum("en,emn->em", psi, modal)
    return eval_h(g(u), g_mean)


def _fd_batch(modal, mono, x, h_cur, g, g_mean, dx):
    """Batched centered-difference Jacobian and Hessian of h at x (ne,d)."""
    ne, d = x.shape
    if d == 1:
        pts = np.stack([x - dx, x + dx], axis=1)
        hm, hp = np.moveaxis(_h_multi(modal, mono, pts, g, g_mean), 1, 0)
        J = ((hp - hm) / (2.0 * dx))[:, None]
        H = ((hp - 2.0 * h_cur + hm) / dx**2)[:, None, None]
        return J, H
    e1 = np.array([dx, 0.0])
    e2 = np.array([0.0, dx])
    pts = np.stack(
        [x - e1, x + e1, x - e2, x + e2,
         x + e1 + e2, x - e1 + e2, x + e1 - e2, x - e1 - e2],
        axis=1,
    )
    h = _h_multi(modal, mono, pts, g, g_mean)
    hxm, hxp, hym, hyp, hpp, hmp, hpm, hmm = (h[:, k] for k in range(8))
    J = np.stack([(hxp - hxm) / (2.0 * dx), (hyp - hym) / (2.0 * dx)], axis=1)
    H = np.empty((ne, 2, 2))
    H[:, 0, 0] = (hxp - 2.0 * h_cur + hxm) / dx**2
    H[:, 1, 1] = (hyp - 2.0 * h_cur + hym) / dx**2
    H[:, 0, 1] = H[:, 1, 0] = (hpp - hmp - hpm + hmm) / (4.0 * dx**2)
    return J, H


def _newton_step(J, H, tol):
    """PSD mask and Newton descent step -H^{-1} J (2x2 closed form in 2D)."""
    d = J.shape[1]
    if d == 1:
        h11 = H[:, 0, 0]
        mask = h11 > tol
        step = np.where(mask[:, None], -J / np.where(mask, h11, 1.0)[:, None], 0.0)
        return mask, step
    h11, h12, h22 = H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]
    det = h11 * h22 - h12 * h12
    mask = (det > tol) & (h11 + h22 > 0.0)
    safe = np.where(mask, det, 1.0)
    sx = -(h22 * J[:, 0] - h12 * J[:, 1]) / safe
    sy = -(-h12 * J[:, 0] + h11 * J[:, 1]) / safe
    return mask, np.where(mask[:, None], np.stack([sx, sy], axis=1), 0.0)


def _optimize(modal, mono, elem, x0, h0, h_samples_min, g, g_mean, cfg, beta0):
    """Iterate the bounded optimizer from the sample-set minimizer.

    modal (ne,m,n); x0 (ne,d) start points with h0 = h(x0); h_samples_min is
    the running minimum over the initial sample set. Returns per-element
    h_star, h_bound (h**), delta_h, final iterate, and a fallback flag.
    """
    ne, d = x0.shape
    tol = cfg.tol
    dx_fd = cfg.fd_step
    x = x0.copy()
    h_cur = h0.copy()
    h_star = h_samples_min.copy()
    j_last = np.zeros((ne, d))
    dx_last = np.zeros((ne, d))
    fell_back = np.zeros(ne, dtype=bool)

    for _ in range(cfg.effective_iters):
        J, H = _fd_batch(modal, mono, x, h_cur, g, g_mean, dx_fd)
        newton, step_n = _newton_step(J, H, tol)
        j_norm = np.linalg.norm(J, axis=1)
        descent = -J / np.maximum(j_norm, _TINY)[:, None]
        step = np.where(newton[:, None], step_n, beta0 * descent)
        step = project_step_batch(elem, x, step, tol)

        gd = ~newton
        fell_back |= gd
        chosen = step.copy()
        if gd.any():
            accepted = np.zeros(ne, dtype=bool)
            trial = step.copy()
            for k in range(1, cfg.max_line_search + 1):
                trial *= 0.5
                active = gd & ~accepted
                if not active.any():
                    break
                idx = np.nonzero(active)[0]
                h_try = _h_single(modal[idx], mono, x[idx] + trial[idx],
                                  g, g_mean[idx])
                np.minimum.at(h_star, idx, h_try)
                beta_k = beta0 / 2.0**k
                ok = h_try <= h_cur[idx] - cfg.armijo_c * beta_k * j_norm[idx]
                chosen[idx[ok]] = trial[idx[ok]]
                accepted[idx[ok]] = True
            left = gd & ~accepted
            chosen[left] = trial[left]

        x = x + chosen
        h_cur = _h_single(modal, mono, x, g, g_mean)
        h_star = np.minimum(h_star, h_cur)
        j_last, dx_last = J, chosen

    delta_h = np.linalg.norm(j_last, axis=1) * np.linalg.norm(dx_last, axis=1)
    h_bound = np.maximum(-1.0, h_star - delta_h)
    return h_star, h_bound, delta_h, x, fell_back


def _constraint_pass(modal, u_nodes, mean, node_xy, g, elem, mono, cfg, beta0,
                     element_ids=None):
    """alpha and optimizer trace for one constraint over a batch of elements."""
    ne = len(modal)
    g_mean = g(mean)
    worst = int(np.argmin(g_mean))
    if g_mean[worst] < -cfg.tol:
        eid = worst if element_ids is None else element_ids[worst]
        raise NumericalError(
            f"element {eid}: mean violates constraint {g.name!r} "
            f"(g(mean) = {g_mean[worst]:.6e}); mean preservation was broken upstream"
        )
    edge = g_mean < cfg.tol
    gm = np.where(edge, 1.0, g_mean)

    g_nodes = g(u_nodes)                       # (ne, n_nodes)
    h_nodes = eval_h(g_nodes, gm[:, None])
    g_star = g_nodes.min(axis=1)
    alpha_disc = np.where(edge, 1.0, np.maximum(0.0, g_star / (g_star - gm)))

    imin = np.argmin(h_nodes, axis=1)
    rows = np.arange(ne)
    h0 = h_nodes[rows, imin]
    x0 = node_xy[imin]
    h_star, h_bound, delta_h, x_fin, fell_back = _optimize(
        modal, mono, elem, x0, h0, h0.copy(), g, gm, cfg, beta0
    )
    alpha = np.where(edge, 1.0, np.maximum(0.0, -h_bound))
    return {
        "alpha": alpha,
        "alpha_discrete": np.where(edge, 1.0, alpha_disc),
        "h_star": h_star,
        "h_bound": h_bound,
        "delta_h": delta_h,
        "x_final": x_fin,
        "used_fallback": fell_back,
        "edge_case": edge,
    }


def _apply_alpha(nodal, modal, mean, alpha):
    """Contract nodal values and modal coefficients toward the mean in place."""
    a = alpha[:, None, None]
    nodal += a * (mean[:, :, None] - nodal)
    modal *= 1.0 - a
    modal[:, :, 0] += alpha[:, None] * mean


def limit_batch(nodal, nodal_basis: NodalBasis, mono: MonomialBasis,
                elem: ReferenceElement, cset: ConstraintSet, cfg: LimiterConfig,
                element_ids=None):
    """Limit a batch of elements; returns (limited nodal values, BatchLimitResult).

    nodal is (n_elem, m, n_nodes). In sequential mode each constraint sees the
    output of the previous one; in independent mode every alpha is computed
    from the original solution and the maximum is applied once.
    """
    nodal = np.array(nodal, dtype=float)
    ne = len(nodal)
    modal = nodal @ nodal_basis.vandermonde_inv.T
    mean = modal @ mono.mean_weights
    beta0 = cfg.resolved_beta0(mono.p)
    node_xy = nodal_basis.nodes

    traces = []
    alpha_max = np.zeros(ne)
    for g in cset:
        u_nodes = np.swapaxes(nodal, 1, 2)
        tr = _constraint_pass(modal, u_nodes, mean, node_xy, g, elem, mono,
                              cfg, beta0, element_ids)
        traces.append(tr)
        if cset.mode == SEQUENTIAL:
            _apply_alpha(nodal, modal, mean, tr["alpha"])
            alpha_max = 1.0 - (1.0 - alpha_max) * (1.0 - tr["alpha"])
    if cset.mode == INDEPENDENT:
        alpha_max = np.max([tr["alpha"] for tr in traces], axis=0)
        _apply_alpha(nodal, modal, mean, alpha_max)

    result = BatchLimitResult(
        names=[g.name for g in cset],
        alpha=np.stack([tr["alpha"] for tr in traces]),
        alpha_discrete=np.stack([tr["alpha_discrete"] for tr in traces]),
        h_star=np.stack([tr["h_star"] for tr in traces]),
        h_bound=np.stack([tr["h_bound"] for tr in traces]),
        delta_h=np.stack([tr["delta_h"] for tr in traces]),
        x_final=np.stack([tr["x_final"] for tr in traces]),
        used_fallback=np.stack([tr["used_fallback"] for tr in traces]),
        edge_case=np.stack([tr["edge_case"] for tr in traces]),
        iterations=cfg.effective_iters,
        alpha_max=alpha_max,
    )
    return nodal, result


def optimize_h(modal: ModalSolution, g: ConstraintFunctional, g_mean: float,
               elem: ReferenceElement, nodes: np.ndarray, cfg: LimiterConfig):
    """Minimize h over one element starting from the given sample set.

    Returns (h_bound, x_final, trace dict). g_mean must be at least the edge
    tolerance; the alpha = 1 edge case is the caller's job.
    """
    if g_mean < cfg.tol:
        raise ValueError(f"g(mean) = {g_mean:.3e} is below the edge tolerance; "
                         "caller must apply the alpha = 1 edge case")
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    coeffs = modal.coeffs[None]
    gm = np.array([g_mean])
    h_samples = _h_multi(coeffs, modal.basis, nodes[None], g, gm)[0]
    i0 = int(np.argmin(h_samples))
    h0 = np.array([h_samples[i0]])
    x0 = nodes[i0][None].copy()
    beta0 = cfg.resolved_beta0(modal.basis.p)
    h_star, h_bound, delta_h, x_fin, fell_back = _optimize(
        coeffs, modal.basis, elem, x0, h0, h0.copy(), g, gm, cfg, beta0
    )
    trace = {
        "h_star": float(h_star[0]),
        "delta_h": float(delta_h[0]),
        "used_fallback": bool(fell_back[0]),
        "iterations": cfg.effective_iters,
    }
    return float(h_bound[0]), x_fin[0], trace


def apply_limit(modal: ModalSolution, mean: np.ndarray, alpha: float) -> ModalSolution:
    """Contract a modal solution toward its mean by alpha in [0, 1]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha = {alpha} outside [0, 1]")
    coeffs = (1.0 - alpha) * modal.coeffs
    coeffs[:, 0] += alpha * np.asarray(mean, dtype=float)
    return ModalSolution(modal.element_id, coeffs, modal.basis)


def limit_element(modal: ModalSolution, cset: ConstraintSet, elem: ReferenceElement,
                  nodal_basis: NodalBasis, cfg: LimiterConfig):
    """Limit one element; returns (limited ModalSolution, LimiterReport)."""
    nodal = (modal.coeffs @ nodal_basis.vandermonde.T)[None]
    limited, res = limit_batch(nodal, nodal_basis, modal.basis, elem, cset, cfg,
                               element_ids=[modal.element_id])
    coeffs = limited[0] @ nodal_basis.vandermonde_inv.T
    records = [
        ConstraintRecord(
            name=res.names[c],
            alpha=float(res.alpha[c, 0]),
            alpha_discrete=float(res.alpha_discrete[c, 0]),
            h_star=float(res.h_star[c, 0]),
            h_bound=float(res.h_bound[c, 0]),
            delta_h=float(res.delta_h[c, 0]),
            x_final=res.x_final[c, 0],
            iterations=res.iterations,
            used_fallback=bool(res.used_fallback[c, 0]),
            edge_case=bool(res.edge_case[c, 0]),
        )
        for c in range(len(res.names))
    ]
    return ModalSolution(modal.element_id, coeffs, modal.basis), LimiterReport(
        modal.element_id, records
    )
