import numpy as np
import pytest
import scipy.sparse as sp

from surfpde.errors import SingularMatrixError
from surfpde.linalg import (assemble_csr, bordered_solve, factorize,
                            resolvent_entry_report, smallest_eigenvalues)


def periodic_laplacian(n, h=1.0):
    i = np.arange(n)
    rows = np.concatenate([i, i, i])
    cols = np.concatenate([i, (i + 1) % n, (i - 1) % n])
    vals = np.concatenate([np.full(n, -2.0), np.ones(n), np.ones(n)]) / h ** 2
    return assemble_csr(rows, cols, vals, (n, n))


def test_assemble_sums_duplicates():
    mat = assemble_csr([0, 0, 1], [1, 1, 0], [2.0, 3.0, 1.0], (2, 2))
    assert mat[0, 1] == 5.0
    assert mat[1, 0] == 1.0
    assert mat.nnz == 2


def test_factorize_solves():
    rng = np.random.default_rng(3)
    dense = rng.normal(size=(40, 40)) + 40 * np.eye(40)
    mat = sp.csr_matrix(dense)
    x = rng.normal(size=40)
    fac = factorize(mat)
    assert np.abs(fac.solve(mat @ x) - x).max() < 1e-10


def test_factorize_singular_raises():
    mat = sp.csr_matrix((3, 3))
    with pytest.raises(SingularMatrixError):
        factorize(mat)


def closed_form_smallest(n, h, count):
    lam = [-(2.0 / h ** 2) * (1 - np.cos(2 * np.pi * m / n))
           for m in range(n)]
    return np.array(sorted(lam, key=abs)[:count])


def test_periodic_laplacian_eigenvalues_closed_form():
    n, h = 64, 0.1
    vals = smallest_eigenvalues(periodic_laplacian(n, h), 5)
    assert np.abs(vals.imag).max() < 1e-9
    assert np.abs(np.sort(vals.real) - np.sort(closed_form_smallest(n, h, 5))
                  ).max() < 1e-8


def test_shift_invert_path_matches_dense_path():
    # large enough to take the iterative branch; singular zero shift retried
    n, h = 2000, 0.1
    vals = smallest_eigenvalues(periodic_laplacian(n, h), 5)
    assert np.abs(vals.imag).max() < 1e-7
    assert np.abs(np.sort(vals.real) - np.sort(closed_form_smallest(n, h, 5))
                  ).max() < 1e-6


def test_bordered_solve_constant_shift():
    # singular system A u + beta 1 = f with sum(u) = 0
    lap = periodic_laplacian(32)
    rng = np.random.default_rng(11)
    f = rng.normal(size=32)
    u, beta = bordered_solve(lap, f)
    assert abs(u.sum()) < 1e-9
    assert np.abs(lap @ u + beta - f).max() < 1e-9
    assert beta == pytest.approx(f.mean())


def test_resolvent_entry_report_m_matrix_case():
    lap = periodic_laplacian(32, h=0.5)
    reports = resolvent_entry_report(lap, [0.5, 2.0], h=0.5)
    for rep in reports:
        assert rep["invertible"]
        # classic five-point resolvent is entrywise nonnegative, row sums 1
        assert rep["min_entry"] >= -1e-14
        assert rep["max_rowsum_dev"] < 1e-12
