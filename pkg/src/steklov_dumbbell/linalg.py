"""Symmetric linear-algebra kernel.

Sparse matrices are plain ``scipy.sparse.csr_matrix`` objects holding the full
symmetric pattern; dense symmetric matrices are 2-D ``numpy`` arrays.  The
kernel supplies a Jacobi-preconditioned conjugate-gradient solver (with a
block variant for many right-hand sides), a dense Cholesky factorization, a
cyclic Jacobi eigensolver and the Cholesky-reduced generalized eigensolver.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numba
import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import NoConvergence, NotPositiveDefinite


@dataclass(frozen=True)
class NumericSettings:
    cg_tol: float = 1e-12
    cg_maxiter_factor: int = 10
    pivot_tol: float = 1e-14
    jacobi_tol: float = 1e-12
    jacobi_max_sweeps: int = 100
    # "jacobi" is the in-house rotation solver; "lapack" defers to numpy.linalg.eigh
    eig_backend: str = "jacobi"

    def updated(self, **changes) -> "NumericSettings":
        return replace(self, **changes)


DEFAULT_SETTINGS = NumericSettings()


@dataclass
class Spectrum:
    """Ascending eigenvalues with column eigenvectors.

    ``gram`` names the inner product the vectors are orthonormal in
    (``"identity"``, ``"B"`` or ``"M"``); ``gram_matrix`` holds it when it is
    not the identity so that orthonormality can be checked directly.
    """

    values: np.ndarray
    vectors: np.ndarray
    gram: str = "identity"
    gram_matrix: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.values)

    def orthonormality_defect(self) -> float:
        V = self.vectors
        G = V.T @ V if self.gram_matrix is None else V.T @ (self.gram_matrix @ V)
        return float(np.max(np.abs(G - np.eye(G.shape[0])))) if G.size else 0.0


def sym_from_triplets(n, rows, cols, vals) -> sp.csr_matrix:
    """Sum duplicate triplets into an n-by-n CSR matrix and drop explicit zeros."""
    A = sp.coo_matrix((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))), shape=(n, n))
    A = A.tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def symmetrize(A: np.ndarray) -> np.ndarray:
    A = np.array(A, dtype=float)
    return 0.5 * (A + A.T)


def cg_solve(A, b, tol=None, x0=None, maxiter=None, settings: NumericSettings = DEFAULT_SETTINGS):
    """Solve ``A x = b`` for SPD ``A`` by Jacobi-preconditioned CG.

    ``b`` may be a vector or a 2-D array whose columns are independent
    right-hand sides; the columns are iterated together but every column has
    its own step lengths, so the result equals column-by-column CG.
    Convergence is declared per column on ``||A x - b|| <= tol * ||b||``.
    """
    tol = settings.cg_tol if tol is None else tol
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    B = b[:, None] if single else b
    n = B.shape[0]
    if maxiter is None:
        maxiter = settings.cg_maxiter_factor * max(n, 1)

    d = np.asarray(A.diagonal(), dtype=float)
    if np.any(d <= 0):
        raise NotPositiveDefinite("CG requires a positive diagonal")
    dinv = (1.0 / d)[:, None]

    X = np.zeros_like(B) if x0 is None else np.array(x0, dtype=float).reshape(B.shape)
    R = B - A @ X
    bnorm = np.linalg.norm(B, axis=0)
    target = tol * np.where(bnorm > 0, bnorm, 1.0)
    active = np.linalg.norm(R, axis=0) > target
    Z = dinv * R
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)

    it = 0
    while active.any():
        if it >= maxiter:
            worst = float(np.max(np.linalg.norm(R, axis=0) / np.where(bnorm > 0, bnorm, 1.0)))
            raise NoConvergence(f"CG did not converge in {maxiter} iterations (relative residual {worst:.3e})")
        idx = np.flatnonzero(active)
        Pa = P[:, idx]
        AP = A @ Pa
        pAp = np.einsum("ij,ij->j", Pa, AP)
        if np.any(pAp <= 0):
            raise NotPositiveDefinite("CG encountered a non-positive curvature direction")
        alpha = rz[idx] / pAp
        X[:, idx] += alpha * Pa
        R[:, idx] -= alpha * AP
        Za = dinv * R[:, idx]
        rz_new = np.einsum("ij,ij->j", R[:, idx], Za)
        beta = rz_new / rz[idx]
        P[:, idx] = Za + beta * Pa
        rz[idx] = rz_new
        it += 1
        done = np.linalg.norm(R[:, idx], axis=0) <= target[idx]
        active[idx[done]] = False

    return X[:, 0] if single else X


def cholesky(A, settings: NumericSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Lower Cholesky factor of a dense SPD matrix.

    Raises NotPositiveDefinite when a pivot drops to ``pivot_tol * max|A|``.
    """
    A = symmetrize(A)
    n = A.shape[0]
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    floor = settings.pivot_tol * scale
    L = np.zeros_like(A)
    for j in range(n):
        row = L[j, :j]
        pivot = A[j, j] - row @ row
        if pivot <= floor:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at column {j} is not positive")
        ljj = np.sqrt(pivot)
        L[j, j] = ljj
        if j + 1 < n:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ row) / ljj
    return L


def cholesky_solve(L, b):
    y = scipy.linalg.solve_triangular(L, b, lower=True)
    return scipy.linalg.solve_triangular(L.T, y, lower=False)


@numba.njit(cache=True)
def _jacobi_sweeps(A, Vt, tol, max_sweeps):
    """Cyclic row-by-row Jacobi; returns the number of sweeps used or -1."""
    n = A.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                if abs(A[i, j]) > off:
                    off = abs(A[i, j])
        if off <= tol:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 0.01 * tol:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif theta > 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                app = A[p, p]
                aqq = A[q, q]
                # rows p and q are contiguous; mirror them into the columns
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        A[k, p] = A[p, k]
                        A[k, q] = A[q, k]
                for k in range(n):
                    vpk = Vt[p, k]
                    vqk = Vt[q, k]
                    Vt[p, k] = c * vpk - s * vqk
                    Vt[q, k] = s * vpk + c * vqk
    return -1


def _jacobi_eig(A, settings):
    A = symmetrize(A)
    n = A.shape[0]
    Vt = np.eye(n)
    scale = float(np.max(np.abs(A))) if n else 0.0
    if n <= 1 or scale == 0.0:
        return A.diagonal().copy(), Vt
    used = _jacobi_sweeps(A, Vt, settings.jacobi_tol * scale, settings.jacobi_max_sweeps)
    if used < 0:
        raise NoConvergence(f"Jacobi eigensolver exceeded {settings.jacobi_max_sweeps} sweeps")
    return A.diagonal().copy(), Vt.T.copy()


def sym_eig(A, settings: NumericSettings = DEFAULT_SETTINGS) -> Spectrum:
    """All eigenpairs of a dense symmetric matrix, ascending."""
    if settings.eig_backend == "lapack":
        w, V = np.linalg.eigh(symmetrize(A))
    else:
        w, V = _jacobi_eig(A, settings)
    order = np.argsort(w, kind="stable")
    return Spectrum(w[order], V[:, order], gram="identity")


def gen_sym_eig(A, B, settings: NumericSettings = DEFAULT_SETTINGS) -> Spectrum:
    """Solve ``A v = lam B v`` for symmetric A and SPD B via ``B = L L^T``.

    The returned vectors are B-orthonormal.
    """
    B = symmetrize(B)
    L = cholesky(B, settings)
    Y = scipy.linalg.solve_triangular(L, symmetrize(A), lower=True)
    C = scipy.linalg.solve_triangular(L, Y.T, lower=True)
    std = sym_eig(symmetrize(C), settings)
    V = scipy.linalg.solve_triangular(L.T, std.vectors, lower=False)
    return Spectrum(std.values, V, gram="B", gram_matrix=B)
