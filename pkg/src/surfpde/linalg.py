"""Sparse direct solves, the bordered mean-zero system, and eigenvalue helpers.

Everything here wraps scipy.sparse machinery behind the small set of
operations the solvers need: a reusable LU factorization with iterative
refinement, the (n+1)-sized bordered solve used by the surface Poisson
problem, shift-invert eigenvalues, and dense resolvent entry reports.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularMatrixError


def assemble_csr(rows, cols, vals, shape):
    """COO triplets -> CSR; duplicate entries are summed."""
    return sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()


class Factorization:
    """Reusable sparse LU factorization with cheap iterative refinement.

    solve() applies at most two refinement passes and stops when the residual
    is at machine-roundoff scale relative to ||A||_inf ||x||_inf + ||b||_inf.
    """

    def __init__(self, mat):
        mat = sp.csc_matrix(mat)
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"matrix must be square, got {mat.shape}")
        self._mat = mat
        self._norm = float(np.abs(mat).sum(axis=1).max()) if mat.nnz else 0.0
        try:
            self._lu = spla.splu(mat)
        except RuntimeError as exc:
            raise SingularMatrixError(
                f"sparse LU factorization failed on "
                f"{mat.shape[0]}x{mat.shape[1]} matrix: {exc}") from exc

    @property
    def shape(self):
        return self._mat.shape

    def solve(self, rhs, refine=2, rtol=1e-10):
        rhs = np.asarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        for _ in range(refine):
            r = rhs - self._mat @ x
            scale = (self._norm * np.abs(x).max(initial=0.0)
                     + np.abs(rhs).max(initial=0.0))
            if np.abs(r).max(initial=0.0) <= rtol * max(scale, 1e-300):
                break
            x = x + self._lu.solve(r)
        if not np.isfinite(x).all():
            raise SingularMatrixError("solve produced non-finite values "
                                      "(matrix numerically singular)")
        return x


def factorize(mat):
    return Factorization(mat)


def bordered_solve(mat, rhs, residual_rtol=1e-9):
    """Solve the mean-constrained system [[A, 1], [1^T, 0]] (u, beta) = (f, 0).

    Returns (u, beta) with sum(u) = 0.  The border makes the system
    nonsingular when A's null space is spanned by the constant vector.
    """
    mat = sp.csr_matrix(mat)
    n = mat.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (n,):
        raise ValueError(f"rhs must have shape ({n},), got {rhs.shape}")
    ones_col = sp.csr_matrix(np.ones((n, 1)))
    top = sp.hstack([mat, ones_col], format="csr")
    bottom = sp.hstack([ones_col.T, sp.csr_matrix((1, 1))], format="csr")
    big = sp.vstack([top, bottom], format="csc")
    sol = Factorization(big).solve(np.concatenate([rhs, [0.0]]))
    u, beta = sol[:n], float(sol[n])
    resid = np.abs(mat @ u + beta - rhs).max()
    scale = max(np.abs(rhs).max(), np.abs(u).max(), 1e-300)
    if resid > residual_rtol * max(scale, 1.0) * max(1.0, abs(beta)):
        raise SingularMatrixError(
            f"bordered solve residual {resid:.3e} too large; null space is "
            f"probably not the constant vector")
    return u, beta


def smallest_eigenvalues(mat, count, sigma=None, residual_tol=1e-8,
                         dense_threshold=1200):
    """Eigenvalues of smallest magnitude, sorted by |lambda|.

    Uses shift-invert ARPACK around `sigma` (default 0, retried with a tiny
    positive shift if the matrix is exactly singular).  Falls back to a dense
    solve for small matrices or when count is too close to the dimension.
    Intended for real nonpositive spectra, where any sigma > 0 preserves the
    by-magnitude ordering.
    """
    mat = sp.csc_matrix(mat)
    n = mat.shape[0]
    if count < 1 or count > n:
        raise ValueError(f"count must be in [1, {n}], got {count}")

    if n <= dense_threshold or count > n - 2:
        vals = np.linalg.eigvals(mat.toarray())
        order = np.argsort(np.abs(vals), kind="stable")
        return vals[order][:count]

    if sigma is None:
        trial_sigmas = [0.0, 1e-6 * max(1.0, float(np.abs(mat).sum(axis=1).max()))]
    else:
        trial_sigmas = [float(sigma)]
    last_exc = None
    for s in trial_sigmas:
        try:
            shifted = mat - s * sp.identity(n, format="csc")
            lu = spla.splu(shifted)
        except RuntimeError as exc:
            last_exc = exc
            continue
        op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        v0 = np.ones(n) / np.sqrt(n)  # fixed start vector for determinism
        evals, evecs = spla.eigs(op, k=count, which="LM", v0=v0)
        evals = 1.0 / evals + s
        # residual check against the original matrix
        res = np.linalg.norm(mat @ evecs - evecs * evals, axis=0)
        scale = np.maximum(np.abs(evals), 1.0)
        if np.any(res / scale > residual_tol):
            raise SingularMatrixError(
                f"eigensolver residual {res.max():.3e} exceeds "
                f"{residual_tol:.1e}")
        order = np.argsort(np.abs(evals), kind="stable")
        return evals[order]
    raise SingularMatrixError(
        f"shift-invert factorization failed for all shifts: {last_exc}")


def resolvent_entry_report(mat_reduced, sigmas, h, dense_limit=9000):
    """Entrywise study of (I - k A)^{-1} for k = sigma h^2.

    Returns a list of dicts with keys sigma, min_entry, max_rowsum_dev,
    invertible.  Dense inversion, so mat_reduced must be modest in size.
    """
    a = sp.csr_matrix(mat_reduced)
    n = a.shape[0]
    if n > dense_limit:
        raise ValueError(f"resolvent report needs a dense inverse; "
                         f"n={n} exceeds limit {dense_limit}")
    dense = a.toarray()
    eye = np.eye(n)
    out = []
    for sigma in sigmas:
        k = float(sigma) * h * h
        system = eye - k * dense
        try:
            inv = np.linalg.inv(system)
            ok = bool(np.isfinite(inv).all())
        except np.linalg.LinAlgError:
            inv, ok = None, False
        if not ok:
            out.append({"sigma": float(sigma), "min_entry": float("nan"),
                        "max_rowsum_dev": float("nan"), "invertible": False})
            continue
        rowsums = inv.sum(axis=1)
        out.append({
            "sigma": float(sigma),
            "min_entry": float(inv.min()),
            "max_rowsum_dev": float(np.abs(rowsums - 1.0).max()),
            "invertible": True,
        })
    return out
