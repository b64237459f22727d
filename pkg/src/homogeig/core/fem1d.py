"""Independent p = 2 reference for 1D spectra: P1 elements plus Richardson."""
import logging
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from homogeig.core.coefficients import CoefficientField, ScaledField
from homogeig.core.eigensolve import pencil_residuals, solve_pencil
from homogeig.core.errors import ConfigError
from homogeig.core.mesh import Mesh1, gauss_legendre
from homogeig.core.problems import ProblemInstance
from homogeig.core.spectrum import Spectrum

logger = logging.getLogger(__name__)

DEFAULT_CELLS = 512


def _breakpoints(prob: ProblemInstance, length: float) -> np.ndarray:
    cuts = [prob.rho.breakpoints(length), prob.V.breakpoints(length)]
    law = prob.op.A
    if isinstance(law, CoefficientField) and law.kind == "piecewise":
        cuts.append(ScaledField(law, 1.0).breakpoints(length))
    return np.unique(np.concatenate(cuts))


def assemble_1d(prob: ProblemInstance, mesh: Mesh1) -> Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Stiffness, rho-mass and V-mass matrices of P1 elements on mesh."""
    x = mesh.nodes
    n = x.size
    h = np.diff(x)
    pts, wts = gauss_legendre(x[:-1], x[1:])
    t = (pts - x[:-1, None]) / h[:, None]
    shape = np.stack([1.0 - t, t], axis=1)

    A = prob.op.coefficient(pts)
    stiff_local = (wts * A).sum(axis=1) / h**2
    rows, cols = [], []
    for a in range(2):
        for b in range(2):
            rows.append(np.arange(n - 1) + a)
            cols.append(np.arange(n - 1) + b)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    sign = np.array([1.0, -1.0, -1.0, 1.0])
    K = sp.coo_matrix(((sign[:, None] * stiff_local).ravel(), (rows, cols)), shape=(n, n))

    def mass(weight: ScaledField) -> sp.coo_matrix:
        w = weight(pts) * wts
        data = [np.sum(w * shape[:, a] * shape[:, b], axis=1) for a in range(2) for b in range(2)]
        return sp.coo_matrix((np.concatenate(data), (rows, cols)), shape=(n, n))

    return K.tocsr(), mass(prob.rho).tocsr(), mass(prob.V).tocsr()


def _constraint(tag: str, n: int) -> sp.csr_matrix:
    if tag == "dirichlet":
        return sp.eye(n, format="csr")[:, 1:-1]
    if tag == "nonflux":
        P = sp.lil_matrix((n, n - 1))
        for i in range(n - 1):
            P[i, i] = 1.0
        P[n - 1, 0] = 1.0
        return P.tocsr()
    return sp.eye(n, format="csr")


def solve_fem1d(prob: ProblemInstance, k_max: int, n_cells: int = DEFAULT_CELLS) -> Spectrum:
    """
    P1 spectrum of a 1D problem with p = 2 on a breakpoint-aligned mesh.

    Args:
        prob: 1D problem, p = 2
        k_max: Number of eigenvalues
        n_cells: Number of uniform cells before adding breakpoints

    Returns:
        The discrete spectrum
    """
    if prob.dim != 1 or prob.p != 2.0:
        raise ConfigError("p: the finite-element reference needs a 1D problem with p = 2")
    L = prob.domain.lengths[0]
    mesh = Mesh1.uniform(L, n_cells, _breakpoints(prob, L))
    K, M_rho, M_V = assemble_1d(prob, mesh)
    n = mesh.n_nodes
    lhs = K + M_V
    if prob.bc.tag == "robin":
        lhs = lhs + prob.bc.beta * sp.csr_matrix(([1.0, 1.0], ([0, n - 1], [0, n - 1])), shape=(n, n))
    elif prob.bc.tag not in ("dirichlet", "neumann", "nonflux"):
        raise ConfigError(f"bc.tag: {prob.bc.tag} is not solved in 1D")
    P = _constraint(prob.bc.tag, n)
    A_r = (P.T @ lhs @ P).tocsr()
    B_r = (P.T @ M_rho @ P).tocsr()
    A_r, B_r = 0.5 * (A_r + A_r.T), 0.5 * (B_r + B_r.T)
    values, vectors, path = solve_pencil(A_r, B_r, k_max, dense_limit=n + 1)
    residuals = pencil_residuals(A_r, B_r, values, vectors)
    return Spectrum(
        eigenvalues=values,
        bc=prob.bc,
        epsilon=prob.epsilon,
        solver="fem1d",
        tol=float(residuals.max()),
        errors=residuals * np.abs(values),
        meta={"cells": int(n - 1), "h": mesh.h, "path": path},
    )


def reference_spectrum_1d(prob: ProblemInstance, k_max: int, n_cells: int = DEFAULT_CELLS) -> Spectrum:
    """Richardson extrapolation (4 lam_{h/2} - lam_h) / 3 of P1 spectra."""
    coarse = solve_fem1d(prob, k_max, n_cells)
    fine = solve_fem1d(prob, k_max, 2 * n_cells)
    values = (4.0 * fine.eigenvalues - coarse.eigenvalues) / 3.0
    errors = np.abs(fine.eigenvalues - coarse.eigenvalues) / 3.0
    logger.info("1D P1 reference %s: lambda_1=%.10g (+- %.2g)", prob.bc.label, values[0], errors[0])
    return Spectrum(
        eigenvalues=values,
        bc=prob.bc,
        epsilon=prob.epsilon,
        solver="fem1d-richardson",
        tol=float(errors.max()),
        errors=errors,
        meta={"cells": [n_cells, 2 * n_cells]},
    )
