"""Meshes of intervals and rectangles, and the quadrature rules used on them."""
import logging
from functools import cached_property
from typing import Iterable, Tuple

import numpy as np

from homogeig.core.errors import ConfigError

logger = logging.getLogger(__name__)

# Degree-4 symmetric rule on the reference triangle (6 points, weights sum to 1).
_A, _B = 0.445948490915965, 0.091576213509771
_WA, _WB = 0.223381589678011, 0.109951743655322
TRIANGLE_POINTS = np.array(
    [
        [_A, _A],
        [1.0 - 2.0 * _A, _A],
        [_A, 1.0 - 2.0 * _A],
        [_B, _B],
        [1.0 - 2.0 * _B, _B],
        [_B, 1.0 - 2.0 * _B],
    ]
)
TRIANGLE_WEIGHTS = np.array([_WA, _WA, _WA, _WB, _WB, _WB])
# Barycentric weights (l0, l1, l2) of each quadrature point.
TRIANGLE_BARY = np.column_stack(
    [1.0 - TRIANGLE_POINTS.sum(axis=1), TRIANGLE_POINTS[:, 0], TRIANGLE_POINTS[:, 1]]
)

GAUSS_ORDER = 8


def gauss_legendre(a: np.ndarray, b: np.ndarray, order: int = GAUSS_ORDER):
    """Gauss points and weights on each interval [a_i, b_i].

    Returns:
        Arrays of shape (n_intervals, order) with points and weights
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


class Mesh1:
    """A mesh of the interval (0, L) given by sorted nodes."""

    def __init__(self, nodes: Iterable[float]):
        nodes = np.unique(np.asarray(list(nodes), dtype=float))
        if nodes.size < 2 or nodes[0] != 0.0:
            raise ConfigError("nodes: a 1D mesh needs at least two nodes starting at 0")
        nodes.flags.writeable = False
        self.nodes = nodes

    @classmethod
    def uniform(cls, length: float, n: int, breakpoints: Iterable[float] = ()) -> "Mesh1":
        """Uniform mesh of n cells refined by the given breakpoints."""
        base = np.linspace(0.0, length, n + 1)
        extra = [x for x in breakpoints if 0.0 < x < length]
        nodes = np.concatenate([base, extra])
        # merge points closer than rounding noise so no cell degenerates
        nodes = np.sort(nodes)
        keep = np.concatenate([[True], np.diff(nodes) > 1e-12 * max(1.0, length)])
        return cls(nodes[keep])

    @property
    def dim(self) -> int:
        return 1

    @property
    def length(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.array([0, self.nodes.size - 1])

    @property
    def h(self) -> float:
        return float(np.max(np.diff(self.nodes)))


class Mesh2:
    """Structured triangulation of the rectangle [0, W] x [0, H].

    Every cell is split along its (0,0)-(1,1) diagonal, so halving the mesh
    size refines the previous mesh and the P1 spaces are nested.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        """
        Initialize the mesh from its grid lines.

        Args:
            x: Sorted x grid lines from 0 to W
            y: Sorted y grid lines from 0 to H
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size < 2 or y.size < 2 or np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ConfigError("mesh: grid lines must be strictly increasing")
        self.x = x
        self.y = y
        self.nx = x.size - 1
        self.ny = y.size - 1
        X, Y = np.meshgrid(x, y)
        self.vertices = np.column_stack([X.ravel(), Y.ravel()])

        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        v00 = (j * (self.nx + 1) + i).ravel()
        v10, v01 = v00 + 1, v00 + self.nx + 1
        v11 = v01 + 1
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        self.triangles = np.vstack([lower, upper])

        edges = []
        stride = self.nx + 1
        for k in range(self.nx):
            edges.append((k, k + 1))
            top = self.ny * stride + k
            edges.append((top + 1, top))
        for k in range(self.ny):
            edges.append((k * stride + self.nx, (k + 1) * stride + self.nx))
            edges.append(((k + 1) * stride, k * stride))
        self.boundary_edges = np.array(edges, dtype=int)
        flags = np.zeros(len(self.vertices), dtype=bool)
        flags[self.boundary_edges.ravel()] = True
        self.boundary_flags = flags
        logger.debug("mesh %dx%d: %d vertices", self.nx, self.ny, len(self.vertices))

    @classmethod
    def rectangle(
        cls,
        width: float,
        height: float,
        nx: int,
        ny: int,
        x_lines: Iterable[float] = (),
        y_lines: Iterable[float] = (),
    ) -> "Mesh2":
        """Uniform nx x ny mesh, optionally refined by extra grid lines."""
        if nx < 1 or ny < 1:
            raise ConfigError(f"mesh_n: need at least one cell per side, got {nx}x{ny}")
        x = Mesh1.uniform(width, nx, x_lines).nodes
        y = Mesh1.uniform(height, ny, y_lines).nodes
        return cls(x, y)

    @property
    def dim(self) -> int:
        return 2

    @property
    def n_nodes(self) -> int:
        return len(self.vertices)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_flags)

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_flags)

    @property
    def diameter(self) -> float:
        """Largest element diameter."""
        return float(np.hypot(np.diff(self.x).max(), np.diff(self.y).max()))

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Edge matrices [v1 - v0, v2 - v0] per triangle, shape (T, 2, 2)."""
        p = self.vertices[self.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.det(self.jacobians)

    @cached_property
    def gradients(self) -> np.ndarray:
        """Gradients of the three hat functions per triangle, shape (T, 3, 2)."""
        inv = np.linalg.inv(self.jacobians)
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.einsum("kd,tdj->tkj", ref, inv)

    @cached_property
    def quadrature_points(self) -> np.ndarray:
        """Physical quadrature points per triangle, shape (T, Q, 2)."""
        p = self.vertices[self.triangles]
        return np.einsum("qk,tkd->tqd", TRIANGLE_BARY, p)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        a, b = self.vertices[self.boundary_edges].transpose(1, 0, 2)
        return np.linalg.norm(b - a, axis=1)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    def refined(self) -> "Mesh2":
        """Mesh with every cell split in four."""
        mx = np.sort(np.concatenate([self.x, 0.5 * (self.x[1:] + self.x[:-1])]))
        my = np.sort(np.concatenate([self.y, 0.5 * (self.y[1:] + self.y[:-1])]))
        return Mesh2(mx, my)

    def counts(self) -> Tuple[int, int]:
        return len(self.vertices), len(self.triangles)
