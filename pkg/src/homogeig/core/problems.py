"""Problem instances and the Rayleigh-quotient functionals F, G and H."""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple, Union

import numpy as np

from homogeig.core.coefficients import AVERAGED, CoefficientField, Epsilon, ScaledField
from homogeig.core.errors import ConfigError, ZeroDenominatorError
from homogeig.core.mesh import TRIANGLE_BARY, TRIANGLE_WEIGHTS, Mesh1, Mesh2, gauss_legendre
from homogeig.core.operators import OperatorSpec

logger = logging.getLogger(__name__)

BC_TAGS = ("dirichlet", "neumann", "robin", "nonflux", "dependent", "steklov")
BC_LETTERS = {
    "dirichlet": "D",
    "neumann": "N",
    "robin": "R",
    "nonflux": "P",
    "dependent": "B",
    "steklov": "S",
}
_BY_LETTER = {v: k for k, v in BC_LETTERS.items()}
# Boundary conditions whose theory needs a C^1 boundary.
SMOOTH_BOUNDARY_TAGS = ("neumann", "robin", "dependent", "steklov")


@dataclass(frozen=True)
class Box:
    """The interval (0, L) or the rectangle (0, W) x (0, H)."""

    lengths: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lengths) not in (1, 2) or any(not L > 0 for L in self.lengths):
            raise ConfigError(f"domain: need one or two positive lengths, got {self.lengths}")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def perimeter(self) -> float:
        return 2.0 if self.dim == 1 else 2.0 * sum(self.lengths)


@dataclass(frozen=True)
class BoundaryCondition:
    """One of the six boundary conditions; Robin carries its beta."""

    tag: str
    beta: float = 0.0

    def __post_init__(self):
        tag = str(self.tag).lower()
        tag = _BY_LETTER.get(self.tag, tag)
        if tag not in BC_TAGS:
            raise ConfigError(f"bc.tag: unknown boundary condition {self.tag!r}")
        object.__setattr__(self, "tag", tag)
        if not self.beta >= 0.0:
            raise ConfigError(f"bc.beta: Robin coefficient must be >= 0, got {self.beta}")

    @property
    def letter(self) -> str:
        return BC_LETTERS[self.tag]

    @property
    def label(self) -> str:
        if self.tag == "robin":
            return f"R({self.beta:g})"
        return self.letter

    @classmethod
    def from_spec(cls, spec: Dict, path: str = "bc") -> "BoundaryCondition":
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}: expected a record with a tag")
        unknown = sorted(set(spec) - {"tag", "beta"})
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}: unknown key")
        if "tag" not in spec:
            raise ConfigError(f"{path}.tag: missing")
        try:
            return cls(spec["tag"], float(spec.get("beta", 0.0)))
        except ConfigError as exc:
            raise ConfigError(f"{path}.{str(exc).split('.', 1)[-1]}") from None

    def to_spec(self) -> Dict:
        spec: Dict = {"tag": self.tag}
        if self.tag == "robin":
            spec["beta"] = self.beta
        return spec


@dataclass(frozen=True)
class ProblemInstance:
    """Domain, boundary condition, operator and weights at one scale."""

    domain: Box
    op: OperatorSpec
    rho: ScaledField
    V: ScaledField
    bc: BoundaryCondition

    def __post_init__(self):
        N = self.domain.dim
        if self.op.dim != N or self.rho.dim != N or self.V.dim != N:
            raise ConfigError(f"dimension: operator and fields must live in {N}D")
        if self.rho.base.lo <= 0.0:
            raise ConfigError(f"rho.lo: weight must be bounded below by a positive constant, got {self.rho.base.lo}")
        if self.rho.epsilon != self.V.epsilon:
            raise ConfigError("epsilon: rho and V must share the same scale")
        if self.bc.tag in ("dependent", "steklov"):
            if N != 2:
                raise ConfigError(f"bc.tag: {self.bc.tag} is only available in 2D")
            if self.V.base.lo <= 0.0:
                raise ConfigError(f"V.lo: {self.bc.tag} needs a strictly positive potential")

    @classmethod
    def build(
        cls,
        domain: Union[Box, Tuple[float, ...], float],
        op: OperatorSpec,
        rho: CoefficientField,
        V: CoefficientField,
        bc: BoundaryCondition,
        epsilon: Epsilon = AVERAGED,
    ) -> "ProblemInstance":
        if not isinstance(domain, Box):
            domain = Box(tuple(np.atleast_1d(domain).astype(float).tolist()))
        return cls(domain, op, ScaledField(rho, epsilon), ScaledField(V, epsilon), bc)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def epsilon(self) -> Epsilon:
        return self.rho.epsilon

    @property
    def p(self) -> float:
        return self.op.p

    @property
    def needs_smooth_boundary(self) -> bool:
        return self.bc.tag in SMOOTH_BOUNDARY_TAGS

    def at(self, epsilon: Epsilon) -> "ProblemInstance":
        return replace(self, rho=ScaledField(self.rho.base, epsilon), V=ScaledField(self.V.base, epsilon))

    def with_bc(self, bc: BoundaryCondition) -> "ProblemInstance":
        return replace(self, bc=bc)

    def validate_bc(self, bc: BoundaryCondition) -> None:
        """Raise ConfigError when bc cannot be posed on this domain and potential."""
        self.with_bc(bc)


class DiscreteFunction:
    """A continuous piecewise-linear function given by its nodal values."""

    def __init__(self, mesh: Union[Mesh1, Mesh2], values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes,):
            raise ConfigError(f"values: expected {mesh.n_nodes} nodal values, got {values.shape}")
        self.mesh = mesh
        self.values = values

    def __mul__(self, t: float) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, t * self.values)

    __rmul__ = __mul__

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.mesh.dim != 1:
            raise NotImplementedError("pointwise evaluation is provided for 1D meshes")
        return np.interp(x, self.mesh.nodes, self.values)

    def trace(self) -> np.ndarray:
        """Nodal values on the boundary."""
        return self.values[self.mesh.boundary_nodes]

    def conforms(self, bc: BoundaryCondition, tol: float = 1e-12) -> bool:
        trace = self.trace()
        scale = tol * max(1.0, float(np.max(np.abs(self.values))))
        if bc.tag == "dirichlet":
            return bool(np.all(np.abs(trace) <= scale))
        if bc.tag == "nonflux":
            return bool(np.ptp(trace) <= scale)
        return True

    def gradients(self) -> np.ndarray:
        """Elementwise constant gradients: (n_cells,) in 1D, (T, 2) in 2D."""
        if self.mesh.dim == 1:
            return np.diff(self.values) / np.diff(self.mesh.nodes)
        local = self.values[self.mesh.triangles]
        return np.einsum("tk,tkj->tj", local, self.mesh.gradients)


def _subdivide(mesh: Mesh1, extra: np.ndarray, u: Optional[DiscreteFunction] = None) -> np.ndarray:
    points = [mesh.nodes, extra]
    if u is not None:
        v, x = u.values, mesh.nodes
        cross = np.flatnonzero(v[:-1] * v[1:] < 0.0)
        points.append(x[cross] - v[cross] * (x[cross + 1] - x[cross]) / (v[cross + 1] - v[cross]))
    return np.unique(np.concatenate(points))


def _law_breakpoints(law, length: float) -> np.ndarray:
    if isinstance(law, CoefficientField) and law.kind == "piecewise":
        return ScaledField(law, 1.0).breakpoints(length)
    return np.zeros(0)


def _abs_pow(u: np.ndarray, p: float) -> np.ndarray:
    return np.abs(u) ** p


def functional_F(u: DiscreteFunction, w: ScaledField, p: float) -> float:
    """Integral of w |u|^p over the domain."""
    mesh = u.mesh
    if mesh.dim == 1:
        cuts = _subdivide(mesh, w.breakpoints(mesh.length), u)
        x, wq = gauss_legendre(cuts[:-1], cuts[1:])
        return float(np.sum(wq * w(x) * _abs_pow(u(x), p)))
    local = u.values[mesh.triangles] @ TRIANGLE_BARY.T
    qp = mesh.quadrature_points
    weight = w(qp[..., 0], qp[..., 1])
    return float(np.sum(mesh.areas[:, None] * TRIANGLE_WEIGHTS * weight * _abs_pow(local, p)))


def functional_G(u: DiscreteFunction, op: OperatorSpec) -> float:
    """Integral of the potential Phi(x, grad u) over the domain."""
    mesh = u.mesh
    grads = u.gradients()
    if mesh.dim == 1:
        law = op.A if not op.matrix else None
        cuts = _subdivide(mesh, _law_breakpoints(law, mesh.length))
        x, wq = gauss_legendre(cuts[:-1], cuts[1:])
        mid = 0.5 * (cuts[:-1] + cuts[1:])
        cell = np.clip(np.searchsorted(mesh.nodes, mid) - 1, 0, grads.size - 1)
        xi = np.broadcast_to(grads[cell][:, None], x.shape)
        return float(np.sum(wq * op.potential(x, xi)))
    qp = mesh.quadrature_points
    xi = np.broadcast_to(grads[:, None, :], qp.shape)
    phi = op.potential(qp, xi)
    return float(np.sum(mesh.areas[:, None] * TRIANGLE_WEIGHTS * phi))


def functional_H(u: DiscreteFunction, p: float) -> float:
    """Boundary integral of |u|^p (sum of endpoint values in 1D)."""
    mesh = u.mesh
    if mesh.dim == 1:
        return float(np.sum(_abs_pow(u.trace(), p)))
    ends = u.values[mesh.boundary_edges]
    a, b = ends[:, 0], ends[:, 1]
    # split each edge at a sign change so |u|^p is smooth on every piece
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(a * b < 0.0, a / (a - b), 1.0)
    s0, s1 = np.zeros_like(root), root
    t, wq = gauss_legendre(np.concatenate([s0, s1]), np.concatenate([s1, np.ones_like(root)]))
    lengths = np.concatenate([mesh.edge_lengths, mesh.edge_lengths])
    aa, bb = np.concatenate([a, a]), np.concatenate([b, b])
    vals = (1.0 - t) * aa[:, None] + t * bb[:, None]
    return float(np.sum(lengths[:, None] * wq * _abs_pow(vals, p)))


def rayleigh_quotient(u: DiscreteFunction, prob: ProblemInstance) -> float:
    """
    The Rayleigh quotient whose critical values are the eigenvalues of prob.

    Args:
        u: Admissible discrete function
        prob: Problem defining weights and boundary condition

    Returns:
        Quotient value
    """
    p = prob.p
    G = functional_G(u, prob.op)
    FV = functional_F(u, prob.V, p)
    tag = prob.bc.tag
    numerator = G + FV
    if tag == "robin":
        numerator += prob.bc.beta * functional_H(u, p)
    if tag == "steklov":
        denominator = functional_H(u, p)
    elif tag == "dependent":
        denominator = functional_H(u, p) + functional_F(u, prob.rho, p)
    else:
        denominator = functional_F(u, prob.rho, p)
    if not denominator > 0.0:
        raise ZeroDenominatorError(f"ZERO_DENOMINATOR: {tag} quotient has vanishing denominator")
    return numerator / denominator
