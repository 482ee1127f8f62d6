"""Structured interval and Cartesian quad meshes with affine reference maps.

Elements are uniform boxes; the reference->physical map is x = origin +
scale * (xhat + 1) / 2 per axis, so Jacobians are constant and element means
can be computed in reference space. Face connectivity is stored explicitly as
(neighbor element, neighbor face) pairs with -1 marking Dirichlet boundary
faces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .reference import QUAD, SEGMENT

PERIODIC = "periodic"
DIRICHLET = "dirichlet"

# Face ordering: 1D (left, right); 2D (-x, +x, -y, +y).
OPPOSITE_FACE = {0: 1, 1: 0, 2: 3, 3: 2}


@dataclass(frozen=True)
class Mesh:
    kind: str
    dim: int
    shape: tuple[int, ...]        # (N,) or (Nx, Ny)
    box: tuple[float, ...]        # (x_lo, x_hi[, y_lo, y_hi])
    origins: np.ndarray           # (n_elements, dim) lower corner of each element
    scales: np.ndarray            # (dim,) element width per axis (uniform)
    neighbors: np.ndarray         # (n_elements, n_faces) element id, -1 at boundaries
    neighbor_faces: np.ndarray    # (n_elements, n_faces) matching face id, -1 at boundaries
    boundary: str

    @property
    def n_elements(self) -> int:
        return len(self.origins)

    @property
    def volume(self) -> float:
        return float(np.prod(self.scales)) * self.n_elements

    def element_volumes(self) -> np.ndarray:
        return np.full(self.n_elements, float(np.prod(self.scales)))

    def centers(self) -> np.ndarray:
        return self.origins + 0.5 * self.scales

    def to_physical(self, xhat: np.ndarray) -> np.ndarray:
        """Map reference points (k, dim) into every element -> (n_elements, k, dim)."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        return self.origins[:, None, :] + 0.5 * self.scales * (xhat + 1.0)[None, :, :]

    def to_reference(self, element: int, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 2.0 * (x - self.origins[element]) / self.scales - 1.0


def build_interval_mesh(n: int, x_lo: float, x_hi: float, boundary: str = PERIODIC) -> Mesh:
    """Uniform 1D mesh of n segments on [x_lo, x_hi]."""
    _check(n, x_lo, x_hi, boundary)
    width = (x_hi - x_lo) / n
    origins = (x_lo + width * np.arange(n))[:, None]
    ids = np.arange(n)
    neighbors = np.stack([ids - 1, (ids + 1) % n], axis=1)
    neighbors[0, 0] = n - 1
    nfaces = np.broadcast_to(np.array([1, 0]), (n, 2)).copy()
    if boundary == DIRICHLET:
        neighbors[0, 0] = -1
        neighbors[-1, 1] = -1
        nfaces[0, 0] = -1
        nfaces[-1, 1] = -1
    return Mesh(SEGMENT, 1, (n,), (x_lo, x_hi), origins, np.array([width]),
                neighbors, nfaces, boundary)


def build_cartesian_mesh(
    nx: int, ny: int, box: tuple[float, float, float, float], boundary: str = PERIODIC
) -> Mesh:
    """Uniform quad mesh of nx*ny elements on [x_lo, x_hi] x [y_lo, y_hi].

    Elements are numbered row-major with x fastest: e = ey*nx + ex.
    """
    x_lo, x_hi, y_lo, y_hi = box
    _check(nx, x_lo, x_hi, boundary)
    _check(ny, y_lo, y_hi, boundary)
    wx = (x_hi - x_lo) / nx
    wy = (y_hi - y_lo) / ny
    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    ex = ex.ravel()
    ey = ey.ravel()
    origins = np.column_stack([x_lo + wx * ex, y_lo + wy * ey])
    west = ey * nx + (ex - 1) % nx
    east = ey * nx + (ex + 1) % nx
    south = ((ey - 1) % ny) * nx + ex
    north = ((ey + 1) % ny) * nx + ex
    neighbors = np.stack([west, east, south, north], axis=1)
    nfaces = np.broadcast_to(np.array([1, 0, 3, 2]), (nx * ny, 4)).copy()
    if boundary == DIRICHLET:
        for face, mask in ((0, ex == 0), (1, ex == nx - 1), (2, ey == 0), (3, ey == ny - 1)):
            neighbors[mask, face] = -1
            nfaces[mask, face] = -1
    return Mesh(QUAD, 2, (nx, ny), box, origins, np.array([wx, wy]),
                neighbors, nfaces, boundary)


def _check(n: int, lo: float, hi: float, boundary: str) -> None:
    if n < 2:
        raise ConfigError(f"need at least 2 elements per axis, got {n}")
    if hi <= lo:
        raise ConfigError(f"empty domain [{lo}, {hi}]")
    if boundary not in (PERIODIC, DIRICHLET):
        raise ConfigError(f"unknown boundary kind {boundary!r}")
