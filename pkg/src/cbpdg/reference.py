"""Reference-element geometry: convex domains with planar faces.

Supported reference elements are the segment [-1, 1], the quad [-1, 1]^2 and
the triangle with vertices (-1,-1), (1,-1), (-1,1). Each face is the halfspace
n.x <= b with unit outward normal n. Besides containment queries, this module
hosts the projection of an optimizer step onto the element: steps that would
leave the element are either scaled back to the boundary or, when starting on
a face, slid along it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_TOL = 1e-12

SEGMENT = "segment"
QUAD = "quad"
TRIANGLE = "triangle"

KINDS = (SEGMENT, QUAD, TRIANGLE)


@dataclass(frozen=True)
class ReferenceElement:
    """A convex reference domain bounded by planar faces (n.x <= b)."""

    kind: str
    dim: int
    vertices: np.ndarray       # (n_vertices, dim)
    face_normals: np.ndarray   # (n_faces, dim), unit length
    face_offsets: np.ndarray   # (n_faces,)

    @property
    def n_faces(self) -> int:
        return len(self.face_offsets)

    @property
    def measure(self) -> float:
        if self.kind == SEGMENT:
            return 2.0
        if self.kind == QUAD:
            return 4.0
        return 2.0  # triangle


@lru_cache(maxsize=None)
def reference_element(kind: str) -> ReferenceElement:
    """Build (and cache) the reference element of the given kind."""
    if kind == SEGMENT:
        verts = np.array([[-1.0], [1.0]])
        normals = np.array([[-1.0], [1.0]])
        offsets = np.array([1.0, 1.0])
        dim = 1
    elif kind == QUAD:
        verts = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        normals = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
        offsets = np.array([1.0, 1.0, 1.0, 1.0])
        dim = 2
    elif kind == TRIANGLE:
        verts = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
        s = 1.0 / np.sqrt(2.0)
        normals = np.array([[-1.0, 0.0], [0.0, -1.0], [s, s]])
        offsets = np.array([1.0, 1.0, 0.0])
        dim = 2
    else:
        raise ValueError(f"unknown reference element kind {kind!r}; expected one of {KINDS}")
    return ReferenceElement(kind, dim, verts, normals, offsets)


def _check_dim(elem: ReferenceElement, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != elem.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != element dimension {elem.dim}")
    return x


def contains(elem: ReferenceElement, x: np.ndarray, tol: float = DEFAULT_TOL):
    """True where n.x <= b + tol for every face. Works on (..., dim) arrays."""
    x = _check_dim(elem, x)
    slack = x @ elem.face_normals.T - elem.face_offsets
    return np.all(slack <= tol, axis=-1)


def active_faces(elem: ReferenceElement, x: np.ndarray, tol: float = DEFAULT_TOL) -> list[int]:
    """Indices of faces within tol of the point; empty for strictly interior points."""
    x = _check_dim(elem, x)
    slack = x @ elem.face_normals.T - elem.face_offsets
    return [int(i) for i in np.nonzero(np.abs(slack) <= tol)[0]]


def project_step_batch(
    elem: ReferenceElement,
    x: np.ndarray,
    dx: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Project optimizer steps so that x + dx' stays inside the element.

    Vectorized over the leading axis: ``x`` and ``dx`` are (n, dim). All start
    points must be inside the element (within tol). Steps already landing
    inside are returned unchanged; steps leaving from the interior are scaled
    back to the boundary along the search direction; steps leaving from a face
    first have that face's normal component removed and are then scaled back
    against the remaining faces if still exiting. If a corner leaves no valid
    direction, the step collapses to zero.
    """
    x = np.atleast_2d(_check_dim(elem, x))
    dx = np.atleast_2d(np.asarray(dx, dtype=float))
    inside = contains(elem, x, tol)
    if not np.all(inside):
        bad = int(np.argmin(inside))
        raise ValueError(f"start point {x[bad]} lies outside the {elem.kind} element")

    out = dx.copy()
    exiting = ~contains(elem, x + dx, tol)
    if not exiting.any():
        return out

    normals = elem.face_normals
    offsets = elem.face_offsets
    slack = x @ normals.T - offsets                      # (n, nf), <= tol
    on_face = slack >= -tol

    d = out[exiting]
    xs = x[exiting]
    act = on_face[exiting]
    # Slide along active faces, index order, only against faces the step exits.
    for f in range(elem.n_faces):
        n_f = normals[f]
        comp = d @ n_f
        mask = act[:, f] & (comp > 0.0)
        if mask.any():
            d[mask] -= np.outer(comp[mask], n_f)

    # Scale back along the (possibly slid) direction against faces still exited.
    still = ~contains(elem, xs + d, tol)
    if still.any():
        denom = d[still] @ normals.T                     # (k, nf)
        numer = offsets - xs[still] @ normals.T          # distance to each face plane
        with np.errstate(divide="ignore", invalid="ignore"):
            eta_f = np.where(denom > tol, numer / denom, np.inf)
        eta = np.clip(eta_f.min(axis=1), 0.0, 1.0)
        d[still] *= eta[:, None]

    # Corner pathologies: zero step terminates the optimizer safely.
    bad = ~contains(elem, xs + d, tol)
    if bad.any():
        d[bad] = 0.0

    out[exiting] = d
    return out


def project_step(
    elem: ReferenceElement,
    x: np.ndarray,
    dx: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Single-point form of :func:`project_step_batch`."""
    return project_step_batch(elem, x, dx, tol)[0]
