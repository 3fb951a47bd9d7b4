"""Predictor-corrector (MacCormack) time stepping on cut-point sets.

The forward predictor and backward corrector use mirrored one-sided chart
differences; the average recovers second order in time and space.  State is
kept at primary points and re-equilibrated after each substep so one-sided
neighbors are always available.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverAbortError


def maccormack_step(state_p, k, rhs_forward, rhs_backward, equilibrate,
                    extra_corrector=None):
    """One predictor-corrector step of u_t = R(u) at the primary points.

    rhs_forward / rhs_backward evaluate R with forward / backward chart
    differences on an equilibrated field; `equilibrate` extends primary
    values to all points.  `extra_corrector(full_old)` may add a stabilizing
    increment evaluated at the old state (applied once, after averaging).
    """
    full = equilibrate(state_p)
    pred_p = state_p + k * rhs_forward(full)
    full_pred = equilibrate(pred_p)
    corr_p = pred_p + k * rhs_backward(full_pred)
    new_p = 0.5 * (state_p + corr_p)
    if extra_corrector is not None:
        new_p = new_p + extra_corrector(full)
    return new_p


def check_finite(state, step, time):
    """Abort with context if a solver state leaves the finite range."""
    if not np.isfinite(state).all():
        raise SolverAbortError(
            f"solution lost finiteness at step {step} (t = {time:.6g})",
            step=step, time=time)
