"""Surface diffusion u_t = alpha * Laplace-Beltrami(u), explicit and implicit."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import SolverAbortError
from .linalg import factorize
from .operators import laplace_beltrami, reduced_operator


def forward_euler_solve(disc, u0_p, alpha, k, n_steps, form="divergence",
                        lb=None, use_reduced=True):
    """March u^{n+1} = u^n + k*alpha*L(E u^n) at the primary points.

    With `use_reduced` the product L E is materialized once and each step is a
    single matrix-vector product; otherwise extend/apply are interleaved.  The
    two routes agree to rounding (L E is exact, not an approximation).
    """
    lb = laplace_beltrami(disc, form) if lb is None else lb
    u = np.asarray(u0_p, dtype=float).copy()
    ka = k * alpha
    red = reduced_operator(lb, disc) if use_reduced else None
    for step in range(n_steps):
        if use_reduced:
            u = u + ka * (red @ u)
        else:
            u = u + ka * (lb @ disc.extend(u))
        if not np.isfinite(u).all():
            raise SolverAbortError(
                f"diffusion step {step + 1} produced non-finite values",
                step=step + 1, time=(step + 1) * k)
    return u


def bdf2_solve(disc, u0_p, alpha, k, n_steps, form="divergence", lb=None):
    """Second-order implicit (two-step backward differentiation) diffusion.

    Startup is one backward Euler step.  Both implicit matrices involve the
    reduced operator L E and are factored once up front.
    """
    red = reduced_operator(laplace_beltrami(disc, form) if lb is None else lb,
                           disc)
    n_p = disc.n_p
    eye = sp.identity(n_p, format="csr")
    fac_be = factorize(eye - k * alpha * red)
    u_prev = np.asarray(u0_p, dtype=float).copy()
    if n_steps == 0:
        return u_prev
    u = fac_be.solve(u_prev)
    fac = factorize(eye - (2.0 / 3.0) * k * alpha * red)
    for step in range(1, n_steps):
        u, u_prev = fac.solve((4.0 * u - u_prev) / 3.0), u
        if not np.isfinite(u).all():
            raise SolverAbortError(
                f"diffusion step {step + 1} produced non-finite values",
                step=step + 1, time=(step + 1) * k)
    return u
