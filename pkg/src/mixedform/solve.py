"""Linear and generalized eigenvalue solves with residual checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearSolution:
    x: np.ndarray
    residual: float
    method: str


@dataclass(frozen=True)
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    zero_threshold: float


def solve_linear(A, b, rtol: float = 1e-10) -> LinearSolution:
    """Direct sparse LU (handles symmetric indefinite saddle-point systems)."""
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != len(b):
        raise SolverError(f"incompatible system: A {A.shape}, b {b.shape}")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return LinearSolution(np.zeros_like(b), 0.0, "trivial")
    if sp.issparse(A):
        x = spla.spsolve(sp.csc_matrix(A), b)
        method = "sparse-lu"
    else:
        x = np.linalg.solve(np.asarray(A), b)
        method = "dense-lu"
    res = float(np.linalg.norm(A @ x - b))
    if not np.all(np.isfinite(x)) or res > rtol * bnorm:
        # one step of iterative refinement before giving up
        if np.all(np.isfinite(x)) and sp.issparse(A):
            x = x + spla.spsolve(sp.csc_matrix(A), b - A @ x)
            res = float(np.linalg.norm(A @ x - b))
        if not np.all(np.isfinite(x)) or res > rtol * bnorm:
            raise SolverError(f"solve failed: residual {res:.3e} > {rtol:.1e} * |b|")
    return LinearSolution(x, res / bnorm, method)


def solve_generalized_eigen(A, M, k: int, zero_threshold: float | None = None,
                            free=None) -> EigenSolution:
    """The ``k`` smallest eigenvalues of ``A x = lam M x`` above a zero threshold.

    ``free`` restricts both matrices to the listed dofs (constrained dofs
    removed); the default threshold is 1e-6 times the largest eigenvalue.
    """
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if free is not None:
        free = np.asarray(free)
        A = A[np.ix_(free, free)]
        M = M[np.ix_(free, free)]
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    try:
        lam, vec = la.eigh(A, M)
    except la.LinAlgError as exc:
        raise SolverError(f"eigensolver failed: {exc}") from exc
    if zero_threshold is None:
        zero_threshold = 1e-6 * max(abs(lam[-1]), 1e-300)
    keep = np.nonzero(lam > zero_threshold)[0]
    if len(keep) < k:
        raise SolverError(f"only {len(keep)} nonzero eigenvalues available, {k} requested")
    keep = keep[:k]
    lam, vec = lam[keep], vec[:, keep]
    for j in range(k):
        Ax = A @ vec[:, j]
        r = np.linalg.norm(Ax - lam[j] * (M @ vec[:, j]))
        if r > 1e-8 * max(np.linalg.norm(Ax), 1e-300):
            raise SolverError(f"eigenpair {j} residual {r:.2e} too large")
    return EigenSolution(lam, vec, float(zero_threshold))
