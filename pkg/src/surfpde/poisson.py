"""Surface Poisson problems Laplace-Beltrami(u) = f with a mean constraint.

On a closed surface the operator kernel holds the constants, so the linear
system is bordered with a uniform row and column: the extra multiplier
absorbs the component of f outside the discrete range and the solution is
pinned to zero mean over the primaries.
"""

from __future__ import annotations

import numpy as np

from .linalg import bordered_solve
from .operators import laplace_beltrami, reduced_operator


def poisson_solve(disc, f_p, form="divergence", lb=None):
    """Solve L u = f at the primary points; returns (u_p, beta).

    beta is the bordering multiplier; for consistent data it shrinks at the
    rate of the truncation error (O(h^2)).
    """
    red = reduced_operator(laplace_beltrami(disc, form) if lb is None else lb,
                           disc)
    return bordered_solve(red, np.asarray(f_p, dtype=float))
