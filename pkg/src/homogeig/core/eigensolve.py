"""Smallest eigenpairs of symmetric pencils (A, B), dense or shift-invert."""
import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from homogeig.core.errors import SingularPencilError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_DENSE_LIMIT = 4000
SCHUR_LIMIT = 20_000_000


def _dense(matrix) -> np.ndarray:
    return matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)


def pencil_residuals(A, B, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Relative residuals |A u - lam B u| / (|A u| + |lam| |B u|) per pair."""
    Au, Bu = A @ vectors, B @ vectors
    num = np.linalg.norm(Au - Bu * values, axis=0)
    den = np.linalg.norm(Au, axis=0) + np.abs(values) * np.linalg.norm(Bu, axis=0)
    return num / np.where(den > 0.0, den, 1.0)


def solve_pencil(
    A,
    B,
    k: int,
    sigma: float = -1.0,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
    tol: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray, str]:
    """
    Smallest k eigenpairs of A u = lam B u with B positive definite.

    Args:
        A: Symmetric matrix
        B: Symmetric positive definite matrix; semidefinite is accepted on the sparse path
        k: Number of eigenpairs
        sigma: Shift below the smallest eigenvalue (sparse path)
        dense_limit: Largest size solved with the dense symmetric solver
        tol: Convergence tolerance handed to the iterative solver

    Returns:
        (eigenvalues ascending, eigenvectors as columns, path name)
    """
    n = A.shape[0]
    k = min(k, n)
    if k < 1:
        raise SingularPencilError("pencil has no active unknowns")
    if n <= dense_limit or k >= n - 1:
        values, vectors = scipy.linalg.eigh(_dense(A), _dense(B), subset_by_index=[0, k - 1])
        path = "dense"
    else:
        try:
            values, vectors = eigsh(
                sp.csc_matrix(A), k=k, M=sp.csc_matrix(B), sigma=sigma, which="LM", tol=tol
            )
        except Exception as exc:
            raise SolverError(f"shift-invert iteration failed: {exc}") from exc
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
        path = "sparse"
    logger.debug("pencil n=%d k=%d solved on the %s path", n, k, path)
    return values, vectors, path


def solve_boundary_pencil(
    A,
    B,
    k: int,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
    schur_limit: int = SCHUR_LIMIT,
    sigma: float = -1.0,
) -> Tuple[np.ndarray, np.ndarray, str, int]:
    """
    Smallest k finite eigenpairs of A u = lam B u with B semidefinite.

    Unknowns outside the support of B are eliminated by the Schur complement
    S = A_bb - A_bi A_ii^-1 A_ib (the discrete harmonic extension), leaving
    the definite pencil (S, B_bb). Modes supported away from the boundary
    have lam = +inf and are not returned. When the dense extension would
    exceed schur_limit entries, the full pencil is solved in shift-invert
    mode instead, where infinite modes map to zero and are never selected.

    Args:
        A: Symmetric positive definite matrix
        B: Symmetric positive semidefinite matrix
        k: Number of eigenpairs
        dense_limit: Largest reduced size solved densely
        schur_limit: Largest interior x boundary extension kept in memory
        sigma: Shift below the smallest eigenvalue for the full pencil

    Returns:
        (eigenvalues, full eigenvectors as columns, path, number of infinite modes)
    """
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    support = np.abs(B).sum(axis=1).A1 > 0.0
    b = np.flatnonzero(support)
    i = np.flatnonzero(~support)
    if b.size == 0:
        raise SingularPencilError("SINGULAR_PENCIL: boundary space is empty")
    if i.size * b.size > schur_limit:
        values, vectors, path = solve_pencil(A, B, min(k, b.size), sigma, dense_limit=-1)
        return values, vectors, f"full-{path}", int(i.size)
    A_bb = A[b][:, b].toarray()
    B_bb = B[b][:, b]
    if i.size:
        A_ii = A[i][:, i].tocsc()
        A_ib = A[i][:, b].toarray()
        try:
            extension = splu(A_ii).solve(A_ib)
        except RuntimeError as exc:
            raise SingularPencilError(f"SINGULAR_PENCIL: interior block is singular ({exc})") from exc
        S = A_bb - A[b][:, i] @ extension
    else:
        extension = np.zeros((0, b.size))
        S = A_bb
    S = 0.5 * (S + S.T)
    values, reduced, path = solve_pencil(S, B_bb, k, dense_limit=dense_limit)
    vectors = np.zeros((A.shape[0], reduced.shape[1]))
    vectors[b] = reduced
    if i.size:
        vectors[i] = -extension @ reduced
    return values, vectors, f"schur-{path}", int(i.size)
