"""Nodal and monomial modal bases on reference elements.

The nodal side uses Gauss-Lobatto points (tensor products on quads); the modal
side is the monomial (power) basis, which makes point evaluation anywhere in
the element cheap. Transforms between the two go through the monomial
Vandermonde matrix, whose conditioning is checked at build time. Element means
are exact: monomial integrals over each reference element are precomputed
analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .errors import ConfigError, NumericalError
from .reference import QUAD, SEGMENT, TRIANGLE, reference_element

MAX_ORDER = 8
MAX_CONDITION = 1e12


def gauss_lobatto(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto nodes and weights for polynomial order p (p+1 points on [-1, 1])."""
    n = p + 1
    if p == 1:
        return np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    pn = np.zeros(n)
    pn[-1] = 1.0  # Legendre P_p
    interior = legendre.legroots(legendre.legder(pn))
    nodes = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    weights = 2.0 / (p * n * legendre.legval(nodes, pn) ** 2)
    return nodes, weights


def _multi_indices(kind: str, p: int) -> np.ndarray:
    """Monomial exponent multi-indices, sorted by (total degree, lexicographic)."""
    if kind == SEGMENT:
        idx = [(q,) for q in range(p + 1)]
    elif kind == QUAD:
        idx = [(i, j) for i in range(p + 1) for j in range(p + 1)]
    elif kind == TRIANGLE:
        idx = [(i, j) for i in range(p + 1) for j in range(p + 1) if i + j <= p]
    else:
        raise ValueError(f"unknown element kind {kind!r}")
    idx.sort(key=lambda q: (sum(q), q))
    return np.array(idx, dtype=int)


def _segment_integrals(q: np.ndarray) -> np.ndarray:
    # int_{-1}^{1} x^q dx
    return np.where(q % 2 == 0, 2.0 / (q + 1.0), 0.0)


def _triangle_integral(i: int, j: int) -> float:
    # int over the triangle (-1,-1),(1,-1),(-1,1) of x^i y^j, via x=-1+2a, y=-1+2b
    # on the unit simplex and int a^m b^n = m! n! / (m+n+2)!.
    total = 0.0
    for mm in range(i + 1):
        for nn in range(j + 1):
            c = (
                math.comb(i, mm) * math.comb(j, nn)
                * (-1.0) ** (i - mm + j - nn) * 2.0 ** (mm + nn)
            )
            total += c * math.factorial(mm) * math.factorial(nn) / math.factorial(mm + nn + 2)
    return 4.0 * total


@dataclass(frozen=True)
class MonomialBasis:
    """Monomial basis psi_i(x) = prod_j x_j^{q_ij} on a reference element."""

    kind: str
    p: int
    exponents: np.ndarray   # (n_modes, dim)
    integrals: np.ndarray   # (n_modes,) integral of each monomial over the element

    @property
    def n_modes(self) -> int:
        return len(self.exponents)

    @property
    def dim(self) -> int:
        return self.exponents.shape[1]

    @property
    def mean_weights(self) -> np.ndarray:
        return self.integrals / reference_element(self.kind).measure


@dataclass(frozen=True)
class NodalBasis:
    """Interpolation nodes, collocated quadrature weights and monomial Vandermonde."""

    kind: str
    p: int
    nodes: np.ndarray        # (n_nodes, dim)
    weights: np.ndarray      # (n_nodes,)
    vandermonde: np.ndarray  # V[i, j] = psi_j(node_i)
    vandermonde_inv: np.ndarray
    condition: float

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


@dataclass
class ModalSolution:
    """Monomial coefficients of one element's solution (m components x n_modes)."""

    element_id: int
    coeffs: np.ndarray
    basis: MonomialBasis


def monomials(basis: MonomialBasis, x: np.ndarray) -> np.ndarray:
    """Evaluate every monomial at points x (..., dim) -> (..., n_modes).

    Per-axis power tables are built by repeated multiplication, then gathered
    per multi-index; no float exponentiation.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and basis.dim == 1:
        x = x[:, None]
    lead = x.shape[:-1]
    out = np.ones(lead + (basis.n_modes,))
    for j in range(basis.dim):
        xp = np.empty(lead + (basis.p + 1,))
        xp[..., 0] = 1.0
        for k in range(1, basis.p + 1):
            xp[..., k] = xp[..., k - 1] * x[..., j]
        out *= xp[..., basis.exponents[:, j]]
    return out


def build_basis(kind: str, p: int) -> tuple[NodalBasis, MonomialBasis]:
    """Build the nodal/modal basis pair for an element kind and order p."""
    if not 1 <= p <= MAX_ORDER:
        raise ConfigError(f"order p={p} unsupported; need 1 <= p <= {MAX_ORDER}")
    return _build_basis_cached(kind, p)


@lru_cache(maxsize=None)
def _build_basis_cached(kind: str, p: int) -> tuple[NodalBasis, MonomialBasis]:
    exponents = _multi_indices(kind, p)
    if kind == SEGMENT:
        x1, w1 = gauss_lobatto(p)
        nodes = x1[:, None]
        weights = w1
        integrals = _segment_integrals(exponents[:, 0])
    elif kind == QUAD:
        x1, w1 = gauss_lobatto(p)
        xx, yy = np.meshgrid(x1, x1)  # y slow, x fast
        nodes = np.column_stack([xx.ravel(), yy.ravel()])
        weights = np.outer(w1, w1).ravel()
        integrals = (
            _segment_integrals(exponents[:, 0]) * _segment_integrals(exponents[:, 1])
        )
    elif kind == TRIANGLE:
        pts = [
            (-1.0 + 2.0 * i / p, -1.0 + 2.0 * j / p)
            for j in range(p + 1)
            for i in range(p + 1)
            if i + j <= p
        ]
        nodes = np.array(pts)
        integrals = np.array([_triangle_integral(i, j) for i, j in exponents])
        weights = None  # interpolatory, filled from V below
    else:
        raise ValueError(f"unknown element kind {kind!r}")

    mono = MonomialBasis(kind, p, exponents, integrals)
    V = monomials(mono, nodes)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericalError(
            f"monomial Vandermonde for {kind} p={p} is too ill-conditioned (cond={cond:.3e})"
        )
    V_inv = np.linalg.inv(V)
    if weights is None:
        # Interpolatory weights: w = V^{-T} integrals (exact for the spanned space).
        weights = V_inv.T @ integrals
    nodal = NodalBasis(kind, p, nodes, weights, V, V_inv, cond)
    return nodal, mono


def nodal_to_modal(values: np.ndarray, nodal: NodalBasis, element_id: int = 0) -> ModalSolution:
    """Solve V u_modal = u_nodal per component. values is (m, n_nodes)."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[-1] != nodal.n_nodes:
        raise ValueError(f"expected {nodal.n_nodes} nodal values, got {values.shape[-1]}")
    coeffs = values @ nodal.vandermonde_inv.T
    mono = _build_basis_cached(nodal.kind, nodal.p)[1]
    return ModalSolution(element_id, coeffs, mono)


def modal_evaluate(solution: ModalSolution, x: np.ndarray) -> np.ndarray:
    """Evaluate the modal solution at reference points x (..., dim) -> (..., m)."""
    psi = monomials(solution.basis, x)
    return psi @ solution.coeffs.T


def element_mean(solution: ModalSolution) -> np.ndarray:
    """Exact polynomial average over the reference element, per component."""
    return solution.coeffs @ solution.basis.mean_weights
