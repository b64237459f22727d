"""2D spectra for p = 2 with conforming P1 elements on rectangles."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import scipy.sparse as sp

from homogeig.core.coefficients import CoefficientField, ScaledField
from homogeig.core.eigensolve import (
    DEFAULT_DENSE_LIMIT,
    pencil_residuals,
    solve_boundary_pencil,
    solve_pencil,
)
from homogeig.core.errors import ConfigError, MeshTooCoarseError, SingularPencilError, SolverError
from homogeig.core.mesh import TRIANGLE_BARY, TRIANGLE_WEIGHTS, Mesh2
from homogeig.core.problems import BoundaryCondition, DiscreteFunction, ProblemInstance
from homogeig.core.spectrum import Spectrum

logger = logging.getLogger(__name__)

CONSTRAINTS = ("dirichlet", "nonflux", "none")
DEFAULT_FEM_TOL = 1e-8
RESOLUTION = 4.0


@dataclass
class AssembledSystem:
    """P1 matrices of one problem on one mesh.

    Attributes:
        mesh: The triangulation
        K: Stiffness matrix of the operator
        M_rho: Mass matrix weighted by rho_eps
        M_V: Mass matrix weighted by V_eps
        B: Boundary mass matrix
        constraint: "dirichlet", "nonflux" or "none"
        P: Prolongation from active unknowns to nodal values
        lower_ratio: Lower bound of V / rho, used to place shifts
    """

    mesh: Mesh2
    K: sp.csr_matrix
    M_rho: sp.csr_matrix
    M_V: sp.csr_matrix
    B: sp.csr_matrix
    constraint: str
    P: sp.csr_matrix
    lower_ratio: float = 0.0

    def reduce(self, matrix: sp.csr_matrix) -> sp.csr_matrix:
        reduced = (self.P.T @ matrix @ self.P).tocsr()
        return 0.5 * (reduced + reduced.T)


def aligned_lines(prob: ProblemInstance, axis: int) -> np.ndarray:
    """Discontinuity lines of rho_eps, V_eps and a piecewise A along an axis."""
    length = prob.domain.lengths[axis]
    cuts = [prob.rho.breakpoints(length, axis), prob.V.breakpoints(length, axis)]
    law = prob.op.A
    laws = [a for row in law for a in row] if prob.op.matrix else [law]
    for a in laws:
        if isinstance(a, CoefficientField) and a.kind == "piecewise":
            cuts.append(ScaledField(a, 1.0).breakpoints(length, axis))
    return np.unique(np.concatenate(cuts))


def mesh_for(prob: ProblemInstance, n: int) -> Mesh2:
    """Uniform n-per-unit-length mesh refined along every discontinuity line."""
    W, H = prob.domain.lengths
    nx, ny = max(1, int(round(n * W))), max(1, int(round(n * H)))
    return Mesh2.rectangle(W, H, nx, ny, aligned_lines(prob, 0), aligned_lines(prob, 1))


def _constraint_map(mesh: Mesh2, constraint: str) -> sp.csr_matrix:
    n = mesh.n_nodes
    if constraint == "none":
        return sp.eye(n, format="csr")
    interior = mesh.interior_nodes
    cols = np.arange(interior.size)
    rows, data = interior, np.ones(interior.size)
    if constraint == "dirichlet":
        return sp.csr_matrix((data, (rows, cols)), shape=(n, interior.size))
    boundary = mesh.boundary_nodes
    rows = np.concatenate([rows, boundary])
    cols = np.concatenate([cols, np.full(boundary.size, interior.size)])
    data = np.ones(rows.size)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, interior.size + 1))


def default_constraint(bc: BoundaryCondition) -> str:
    if bc.tag == "dirichlet":
        return "dirichlet"
    if bc.tag == "nonflux":
        return "nonflux"
    return "none"


def _triplet_matrix(mesh: Mesh2, local: np.ndarray) -> sp.csr_matrix:
    """Sum (T, 3, 3) element matrices into a global sparse matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    matrix = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return 0.5 * (matrix + matrix.T)


def assemble(
    prob: ProblemInstance,
    mesh: Mesh2,
    constraint: Optional[str] = None,
    check_resolution: bool = True,
) -> AssembledSystem:
    """
    Assemble the P1 realization of G, F(., rho_eps), F(., V_eps) and H.

    Args:
        prob: 2D problem with p = 2
        mesh: Rectangle mesh of the problem's domain
        constraint: Boundary constraint; derived from prob.bc when omitted
        check_resolution: Require element diameter <= eps / 4

    Returns:
        The assembled system
    """
    if prob.dim != 2 or prob.p != 2.0:
        raise ConfigError("p: the 2D finite-element solver needs p = 2")
    constraint = constraint or default_constraint(prob.bc)
    if constraint not in CONSTRAINTS:
        raise ConfigError(f"constraint: unknown constraint {constraint!r}")
    eps = prob.epsilon
    oscillating = not (prob.rho.is_constant() and prob.V.is_constant())
    if check_resolution and oscillating and mesh.diameter > eps / RESOLUTION:
        raise MeshTooCoarseError(
            f"MESH_TOO_COARSE: element diameter {mesh.diameter:.4g} exceeds eps/4 = {eps / RESOLUTION:.4g}"
        )

    qp = mesh.quadrature_points
    qw = mesh.areas[:, None] * TRIANGLE_WEIGHTS
    grads = mesh.gradients
    A = prob.op.coefficient(qp)
    if prob.op.matrix:
        weighted = np.einsum("tq,tqij->tij", qw, A)
        K_local = np.einsum("tai,tij,tbj->tab", grads, weighted, grads)
    else:
        weighted = np.sum(qw * A, axis=1)
        K_local = weighted[:, None, None] * np.einsum("tai,tbi->tab", grads, grads)
    K = _triplet_matrix(mesh, K_local)

    def mass(weight: ScaledField) -> sp.csr_matrix:
        w = qw * weight(qp[..., 0], qp[..., 1])
        local = np.einsum("tq,qa,qb->tab", w, TRIANGLE_BARY, TRIANGLE_BARY)
        return _triplet_matrix(mesh, local)

    edges = mesh.boundary_edges
    lengths = mesh.edge_lengths
    local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    data = (lengths[:, None, None] * local).ravel()
    n = mesh.n_nodes
    B = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    rho_lo = prob.rho.lo
    V_lo = prob.V.lo
    lower = V_lo / prob.rho.hi if V_lo >= 0.0 else V_lo / rho_lo
    logger.debug("assembled %d nodes, constraint=%s", n, constraint)
    return AssembledSystem(
        mesh=mesh,
        K=K,
        M_rho=mass(prob.rho),
        M_V=mass(prob.V),
        B=0.5 * (B + B.T),
        constraint=constraint,
        P=_constraint_map(mesh, constraint),
        lower_ratio=lower,
    )


def pencil(sys: AssembledSystem, bc: BoundaryCondition):
    """Left and right matrices of the pencil for a boundary condition."""
    stiffness = sys.K + sys.M_V
    if bc.tag in ("dirichlet", "neumann", "nonflux"):
        return stiffness, sys.M_rho
    if bc.tag == "robin":
        return stiffness + bc.beta * sys.B, sys.M_rho
    if bc.tag == "dependent":
        return stiffness, sys.M_rho + sys.B
    return stiffness, sys.B


def solve_gevp(
    sys: AssembledSystem,
    bc: BoundaryCondition,
    k_max: int,
    tol: float = DEFAULT_FEM_TOL,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
    epsilon=None,
) -> Spectrum:
    """
    Smallest k_max eigenvalues of the pencil of bc on the constrained space.

    Args:
        sys: Assembled system
        bc: Boundary condition selecting the pencil
        k_max: Number of eigenvalues
        tol: Largest accepted relative pencil residual
        dense_limit: Largest active size solved with the dense solver
        epsilon: Scale recorded in the spectrum

    Returns:
        The spectrum, nodal eigenvectors attached
    """
    left, right = pencil(sys, bc)
    A_r, B_r = sys.reduce(left), sys.reduce(right)
    meta: Dict = {"nodes": sys.mesh.n_nodes, "active": int(A_r.shape[0]), "mesh": [sys.mesh.nx, sys.mesh.ny]}
    if bc.tag == "steklov":
        if sys.constraint == "dirichlet":
            raise SingularPencilError("SINGULAR_PENCIL: Steklov pencil on a zero-trace space")
        values, vectors, path, infinite = solve_boundary_pencil(A_r, B_r, k_max, dense_limit)
        meta["infinite_modes"] = infinite
    else:
        sigma = min(0.0, sys.lower_ratio) - 1.0
        values, vectors, path = solve_pencil(A_r, B_r, k_max, sigma, dense_limit)
    residuals = pencil_residuals(A_r, B_r, values, vectors)
    if np.any(residuals > tol):
        raise SolverError(f"pencil residual {residuals.max():.3g} exceeds tolerance {tol:g}")
    if not np.all(np.isfinite(values)):
        raise SolverError("non-finite eigenvalue returned")
    meta["path"] = path
    meta["residual"] = float(residuals.max())
    logger.info("2D %s: %d eigenvalues on %s path, lambda_1=%.10g", bc.label, len(values), path, values[0])
    return Spectrum(
        eigenvalues=values,
        bc=bc,
        epsilon=epsilon,
        solver=f"fem2d-{path}",
        tol=tol,
        errors=residuals * np.abs(values),
        meta=meta,
        eigenvectors=sys.P @ vectors,
    )


def solve_2d(
    prob: ProblemInstance,
    k_max: int,
    mesh: Mesh2,
    tol: float = DEFAULT_FEM_TOL,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> Spectrum:
    sys = assemble(prob, mesh)
    return solve_gevp(sys, prob.bc, k_max, tol, dense_limit, epsilon=prob.epsilon)


def reference_spectrum(
    prob: ProblemInstance,
    k_max: int,
    mesh: Optional[Mesh2] = None,
    n: int = 32,
    tol: float = DEFAULT_FEM_TOL,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> Spectrum:
    """
    Richardson-extrapolated eigenvalues (4 lam_{h/2} - lam_h) / 3.

    Args:
        prob: 2D problem with p = 2
        k_max: Number of eigenvalues
        mesh: Coarse mesh h (built from n when omitted)
        n: Cells per unit length for the default mesh
        tol: Pencil residual tolerance
        dense_limit: Dense solver size limit

    Returns:
        The extrapolated spectrum; errors hold |lam_{h/2} - lam_h| / 3
    """
    mesh = mesh or mesh_for(prob, n)
    coarse = solve_2d(prob, k_max, mesh, tol, dense_limit)
    fine = solve_2d(prob, k_max, mesh.refined(), tol, dense_limit)
    k = min(len(coarse), len(fine))
    values = (4.0 * fine.eigenvalues[:k] - coarse.eigenvalues[:k]) / 3.0
    errors = np.abs(fine.eigenvalues[:k] - coarse.eigenvalues[:k]) / 3.0
    return Spectrum(
        eigenvalues=values,
        bc=prob.bc,
        epsilon=prob.epsilon,
        solver="fem2d-richardson",
        tol=tol,
        errors=errors,
        meta={
            "mesh": [mesh.nx, mesh.ny],
            "coarse": coarse.eigenvalues[:k].tolist(),
            "fine": fine.eigenvalues[:k].tolist(),
        },
    )


def eigenfunction_2d(spectrum: Spectrum, k: int, mesh: Mesh2) -> DiscreteFunction:
    """The k-th nodal eigenvector of a solve_gevp spectrum."""
    return DiscreteFunction(mesh, np.asarray(spectrum.eigenvectors)[:, k - 1])


def export_triplets(sys: AssembledSystem, directory: Union[str, Path]) -> Path:
    """
    Write the mesh and matrices in plain-text triplet form.

    Each matrix file starts with "rows cols nnz" and lists "i j value" lines
    (0-based). The mesh goes to vertices.txt ("x y") and triangles.txt
    ("v0 v1 v2").

    Args:
        sys: Assembled system
        directory: Target directory

    Returns:
        The directory written to
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in ("K", "M_rho", "M_V", "B"):
        matrix = getattr(sys, name).tocoo()
        lines = [f"{matrix.shape[0]} {matrix.shape[1]} {matrix.nnz}"]
        lines += [f"{i} {j} {v:.17g}" for i, j, v in zip(matrix.row, matrix.col, matrix.data)]
        (directory / f"{name}.txt").write_text("\n".join(lines) + "\n")
    vertices = [f"{x:.17g} {y:.17g}" for x, y in sys.mesh.vertices]
    (directory / "vertices.txt").write_text("\n".join(vertices) + "\n")
    triangles = [" ".join(str(v) for v in t) for t in sys.mesh.triangles]
    (directory / "triangles.txt").write_text("\n".join(triangles) + "\n")
    return directory
