"""Closed curves in the plane: the one-dimensional analogue of the surface
discretization, used to study resolvent positivity of the reduced Laplacian.

Cut points are taken on grid intervals in two direction sets; each primary
point differences along the grid axis transverse to its interval, with
coefficients built from the arclength density.  The module also constructs,
explicitly, the near-M-matrix of the positivity argument and the row
operations that finish it, so the structural claims can be checked directly
instead of only observing signs of the inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (BracketingError, EmptySurfaceError, GridError,
                     StencilError)
from .linalg import assemble_csr, factorize, resolvent_entry_report

_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class Grid2:
    """Uniform square-cell grid on a rectangle."""
    origin: tuple[float, float]
    h: float
    n_cells: tuple[int, int]

    @staticmethod
    def square(lo: float, hi: float, n: int) -> "Grid2":
        if n < 2 or hi <= lo:
            raise GridError(f"bad grid request: [{lo}, {hi}] with {n} cells")
        return Grid2(origin=(lo, lo), h=(hi - lo) / n, n_cells=(n, n))

    def coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h * np.arange(self.n_cells[axis] + 1)


class PlaneCurve:
    """Closed curve as the zero set of phi(x, y) with an analytic gradient."""

    def __init__(self, kind, phi, grad, params=None):
        self.kind = kind
        self._phi = phi
        self._grad = grad
        self.params = dict(params or {})

    def phi(self, points):
        p = np.asarray(points, dtype=float)
        return self._phi(p[..., 0], p[..., 1])

    def unit_normal(self, points):
        p = np.asarray(points, dtype=float)
        gx, gy = self._grad(p[..., 0], p[..., 1])
        g = np.stack([gx, gy], axis=-1)
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
        if (norm < 1e-12).any():
            raise BracketingError("vanishing gradient on the curve")
        return g / norm


def circle(radius=1.0):
    r2 = radius ** 2
    return PlaneCurve("circle",
                      lambda x, y: x ** 2 + y ** 2 - r2,
                      lambda x, y: (2.0 * x, 2.0 * y),
                      {"radius": radius})


def ellipse(a=1.0, b=0.65):
    return PlaneCurve("ellipse",
                      lambda x, y: (x / a) ** 2 + (y / b) ** 2 - 1.0,
                      lambda x, y: (2.0 * x / a ** 2, 2.0 * y / b ** 2),
                      {"a": a, "b": b})


def perturbed_circle(base=1.0, amp=0.2, lobes=3):
    """Non-convex closed curve r(polar angle) = base + amp*cos(lobes*angle)."""
    def phi(x, y):
        rho = np.sqrt(x ** 2 + y ** 2)
        tau = np.arctan2(y, x)
        return rho - base - amp * np.cos(lobes * tau)

    def grad(x, y):
        rho2 = x ** 2 + y ** 2
        rho = np.sqrt(rho2)
        tau = np.arctan2(y, x)
        s = amp * lobes * np.sin(lobes * tau)
        return x / rho - s * y / rho2, y / rho + s * x / rho2

    return PlaneCurve("perturbed_circle", phi, grad,
                      {"base": base, "amp": amp, "lobes": lobes})


CURVE_CATALOG = {
    "circle": circle,
    "ellipse": ellipse,
    "perturbed_circle": perturbed_circle,
}


def make_curve(name, **params):
    try:
        factory = CURVE_CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown curve {name!r}; "
                         f"available: {sorted(CURVE_CATALOG)}") from None
    return factory(**params)


@dataclass
class CurveDiscretization:
    """Cut points of a closed plane curve with equilibration data.

    Points are ordered primaries first.  `chart_neighbors[i] = (minus, plus)`
    are the same-axis cut points one grid column away along the graph
    direction of primary i (-1 when absent).  `dropped_cuts` counts interval
    crossings discarded by the admissibility threshold; it is nonzero only
    when eta exceeds 1/sqrt(2) and flags arcs left uncovered.
    """
    grid: Grid2
    eta: float
    positions: np.ndarray
    axis: np.ndarray
    base_index: np.ndarray
    closest_node: np.ndarray
    theta: np.ndarray
    normals: np.ndarray
    n_p: int
    associated_primary: np.ndarray
    chart_neighbors: np.ndarray
    interp_points: np.ndarray
    interp_coeffs: np.ndarray
    pi_sp: sp.csr_matrix
    pi_ss: sp.csr_matrix
    dropped_cuts: int
    curve_kind: str = "custom"
    _factor_cache: object = field(default=None, repr=False)
    _ext_cache: object = field(default=None, repr=False)

    @property
    def n_tot(self):
        return self.positions.shape[0]

    @property
    def n_s(self):
        return self.n_tot - self.n_p

    @property
    def h(self):
        return self.grid.h

    def extend(self, values_p):
        """Equilibrated values at all points from primary values."""
        values_p = np.asarray(values_p, dtype=float)
        if self.n_s == 0:
            return values_p.copy()
        if self._factor_cache is None:
            eye = sp.identity(self.n_s, format="csc")
            self._factor_cache = factorize(eye - self.pi_ss)
        u_s = self._factor_cache.solve(self.pi_sp @ values_p)
        return np.concatenate([values_p, u_s])

    def extension_matrix(self):
        """Sparse (n_tot, n_p) map from primary values to all values."""
        if self._ext_cache is not None:
            return self._ext_cache
        eye_p = sp.identity(self.n_p, format="csr")
        if self.n_s == 0:
            self._ext_cache = eye_p.tocsr()
            return self._ext_cache
        w = self.pi_sp.tocsr()
        term = w.copy()
        for _ in range(200):
            term = (self.pi_ss @ term).tocsr()
            if term.nnz == 0 or np.abs(term.data).max() < 1e-17:
                break
            w = w + term
        else:
            raise RuntimeError("equilibration series failed to converge")
        self._ext_cache = sp.vstack([eye_p, w]).tocsr()
        return self._ext_cache


def _bisect_1d(curve, lo_pts, hi_pts, axis, tol):
    # keeps phi(lo) <= 0 <= phi(hi); frozen coordinate stays exact
    lo = lo_pts.copy()
    hi = hi_pts.copy()
    n_iter = max(1, math.ceil(math.log2(max(2.0, 1.0 / tol))))
    for _ in range(n_iter):
        mid = lo.copy()
        mid[:, axis] = 0.5 * (lo[:, axis] + hi[:, axis])
        neg = curve.phi(mid) <= 0.0
        lo[neg, axis] = mid[neg, axis]
        hi[~neg, axis] = mid[~neg, axis]
    out = lo.copy()
    out[:, axis] = 0.5 * (lo[:, axis] + hi[:, axis])
    return out


def discretize_curve(curve, grid, eta=0.45, tol=1e-12):
    """Cut-point discretization of a closed plane curve.

    eta below 1/sqrt(2) guarantees every crossing keeps an admissible
    direction; larger values are allowed and the discarded crossings are
    counted in `dropped_cuts`.
    """
    if not (0.0 < eta < 1.0):
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    xs, ys = grid.coords(0), grid.coords(1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([gx, gy], axis=-1)
    phi = curve.phi(nodes)
    if not np.isfinite(phi).all():
        raise GridError("curve level set is not finite on the grid")
    boundary = np.zeros(phi.shape, dtype=bool)
    boundary[0, :] = boundary[-1, :] = True
    boundary[:, 0] = boundary[:, -1] = True
    if (phi[boundary] <= 0.0).any():
        raise GridError("curve touches or leaves the grid box")
    inside = phi <= 0.0
    if not inside.any():
        raise EmptySurfaceError("curve interior contains no grid node")

    h = grid.h
    positions = []
    axes = []
    bases = []
    for ax in range(2):
        flip = np.diff(inside, axis=ax)
        idx = np.argwhere(flip)
        if idx.size == 0:
            continue
        lo_nodes = nodes[idx[:, 0], idx[:, 1]]
        hi_nodes = lo_nodes.copy()
        hi_nodes[:, ax] += h
        phi_lo = curve.phi(lo_nodes)
        lo = np.where(phi_lo[:, None] <= 0.0, lo_nodes, hi_nodes)
        hi = np.where(phi_lo[:, None] <= 0.0, hi_nodes, lo_nodes)
        cuts = _bisect_1d(curve, lo, hi, ax, tol)
        positions.append(cuts)
        axes.append(np.full(len(cuts), ax, dtype=np.int64))
        bases.append(idx)
    if not positions:
        raise EmptySurfaceError("no grid interval crosses the curve")
    positions = np.vstack(positions)
    axis = np.concatenate(axes)
    base = np.vstack(bases).astype(np.int64)

    normals = curve.unit_normal(positions)

    # snap near-node cuts onto the node and merge duplicates across axes
    m = len(positions)
    scaled = (positions[np.arange(m), axis]
              - np.asarray(grid.origin)[axis]) / h
    frac = scaled - base[np.arange(m), axis]
    snap_lo = frac < _SNAP_TOL
    snap_hi = frac > 1.0 - _SNAP_TOL
    snapped = bool(snap_lo.any() or snap_hi.any())
    if snapped:
        node_of = base.copy()
        node_of[np.arange(m), axis] += snap_hi.astype(np.int64)
        at_node = snap_lo | snap_hi
        positions = positions.copy()
        rows = np.where(at_node)[0]
        for r in rows:
            positions[r, axis[r]] = (grid.origin[axis[r]]
                                     + h * node_of[r, axis[r]])
        keep = np.ones(m, dtype=bool)
        groups = {}
        for r in rows:
            groups.setdefault((node_of[r, 0], node_of[r, 1]), []).append(r)
        for members in groups.values():
            if len(members) > 1:
                best = max(members,
                           key=lambda r: (abs(normals[r, axis[r]]), -axis[r]))
                for r in members:
                    if r != best:
                        keep[r] = False
        positions = positions[keep]
        axis = axis[keep]
        base = base[keep]
        normals = curve.unit_normal(positions)
        m = len(positions)
        scaled = (positions[np.arange(m), axis]
                  - np.asarray(grid.origin)[axis]) / h
        frac = scaled - base[np.arange(m), axis]

    admissible = np.abs(normals[np.arange(m), axis]) >= eta
    dropped = int(m - admissible.sum())
    positions = positions[admissible]
    axis = axis[admissible]
    base = base[admissible]
    normals = normals[admissible]
    frac = frac[admissible]
    m = len(positions)
    if m == 0:
        raise EmptySurfaceError("all curve crossings failed the "
                                "admissibility threshold")

    interval_key = axis * (max(grid.n_cells) + 2) ** 2 \
        + base[:, 0] * (max(grid.n_cells) + 2) + base[:, 1]
    if len(np.unique(interval_key)) != m:
        raise GridError("multiple admissible cuts on one grid interval; "
                        "refine the grid")

    offset = (frac > 0.5).astype(np.int64)
    closest = base.copy()
    closest[np.arange(m), axis] += offset
    theta = frac - offset

    # primary = cut nearest its node; deterministic tie-break
    node_key = closest[:, 0] * (max(grid.n_cells) + 2) + closest[:, 1]
    order = np.lexsort((base[:, 1], base[:, 0], axis, np.abs(theta),
                        node_key))
    sorted_keys = node_key[order]
    first = np.ones(m, dtype=bool)
    first[1:] = sorted_keys[1:] != sorted_keys[:-1]
    is_primary = np.zeros(m, dtype=bool)
    is_primary[order[first]] = True
    rep_of_key = {}
    for r in order[first]:
        rep_of_key[node_key[r]] = r

    block = np.lexsort((base[:, 1], base[:, 0], axis,
                        (~is_primary).astype(np.int64)))
    new_id = np.empty(m, dtype=np.int64)
    new_id[block] = np.arange(m)
    positions = positions[block]
    axis = axis[block]
    base = base[block]
    closest = closest[block]
    theta = theta[block]
    normals = normals[block]
    node_key = node_key[block]
    n_p = int(is_primary.sum())

    assoc = np.full(m, -1, dtype=np.int64)
    for i in range(n_p, m):
        assoc[i] = new_id[rep_of_key[node_key[i]]]

    # same-axis chart neighbors of each primary, one column over
    big = max(grid.n_cells) + 3
    col_lookup = {}
    for j in range(m):
        f = 1 - axis[j]
        key = (axis[j], base[j, f])
        col_lookup.setdefault(key, []).append(j)
    neighbors = np.full((n_p, 2), -1, dtype=np.int64)
    for i in range(n_p):
        f = 1 - axis[i]
        mu = axis[i]
        for slot, delta in enumerate((-1, 1)):
            cands = col_lookup.get((axis[i], base[i, f] + delta), [])
            if cands:
                j_best = min(cands,
                             key=lambda j: abs(positions[j, mu]
                                               - positions[i, mu]))
                neighbors[i, slot] = j_best

    for s in range(n_p, m):
        if axis[s] == axis[assoc[s]]:
            raise StencilError(
                f"secondary point {s} shares its axis with its primary; "
                "interpolation direction unavailable (grid too coarse)")

    # secondaries whose interpolation neighbors are missing (or themselves
    # uncovered) cannot be equilibrated; below the guaranteed threshold
    # that is a hard error, above it they join the coverage-gap count
    removed = np.zeros(m, dtype=bool)
    while True:
        changed = False
        for s in range(n_p, m):
            if removed[s]:
                continue
            q_minus, q_plus = neighbors[assoc[s]]
            ok = (q_minus >= 0 and q_plus >= 0
                  and not removed[q_minus] and not removed[q_plus])
            if not ok:
                removed[s] = True
                changed = True
        if not changed:
            break
    if removed.any():
        if eta <= 1.0 / math.sqrt(2.0):
            bad = int(np.where(removed)[0][0])
            raise StencilError(
                f"secondary point {bad} lacks interpolation neighbors")
        dropped += int(removed.sum())
        keep2 = ~removed
        old_to_new = np.full(m, -1, dtype=np.int64)
        old_to_new[keep2] = np.arange(int(keep2.sum()))
        nb_ok = (neighbors >= 0) & keep2[np.maximum(neighbors, 0)]
        neighbors = np.where(nb_ok, old_to_new[np.maximum(neighbors, 0)], -1)
        positions = positions[keep2]
        axis = axis[keep2]
        base = base[keep2]
        closest = closest[keep2]
        theta = theta[keep2]
        normals = normals[keep2]
        assoc = assoc[keep2]
        m = int(keep2.sum())

    n_s = m - n_p
    interp_points = np.full((n_s, 3), -1, dtype=np.int64)
    interp_coeffs = np.zeros((n_s, 3))
    for s in range(n_p, m):
        q_minus, q_plus = neighbors[assoc[s]]
        t = theta[s]
        interp_points[s - n_p] = (q_minus, assoc[s], q_plus)
        interp_coeffs[s - n_p] = (0.5 * (-t + t * t), 1.0 - t * t,
                                  0.5 * (t + t * t))

    rows = np.repeat(np.arange(n_s), 3)
    cols = interp_points.ravel()
    vals = interp_coeffs.ravel()
    in_p = cols < n_p
    pi_sp = assemble_csr(rows[in_p], cols[in_p], vals[in_p], (n_s, n_p))
    pi_ss = assemble_csr(rows[~in_p], cols[~in_p] - n_p, vals[~in_p],
                         (n_s, n_s))
    if n_s:
        row_abs = np.abs(pi_ss).sum(axis=1)
        assert float(row_abs.max()) <= 0.5 + 1e-12

    return CurveDiscretization(
        grid=grid, eta=eta, positions=positions, axis=axis, base_index=base,
        closest_node=closest, theta=theta, normals=normals, n_p=n_p,
        associated_primary=assoc, chart_neighbors=neighbors,
        interp_points=interp_points, interp_coeffs=interp_coeffs,
        pi_sp=pi_sp, pi_ss=pi_ss, dropped_cuts=dropped,
        curve_kind=curve.kind)


def curve_coefficients(disc):
    """Arclength-density stencil coefficients of each primary.

    gamma is |n_axis| at a cut point, the local ds/dxi inverse of its chart.
    The neighbor coefficients are the half-interval products
    gamma_i (gamma_i + gamma_neighbor)/2 of the divergence form; the center
    is their sum, so the averaging identity holds exactly.  Returns
    (c_minus, c_plus, c_center) arrays over primaries.
    """
    idx = np.arange(disc.n_tot)
    gamma = np.abs(disc.normals[idx, disc.axis])
    nb = disc.chart_neighbors
    if (nb < 0).any():
        bad = int(np.where((nb < 0).any(axis=1))[0][0])
        raise StencilError(f"primary point {bad} lacks a chart neighbor")
    g_c = gamma[:disc.n_p]
    c_minus = 0.5 * g_c * (g_c + gamma[nb[:, 0]])
    c_plus = 0.5 * g_c * (g_c + gamma[nb[:, 1]])
    return c_minus, c_plus, c_minus + c_plus


def lb_curve(disc):
    """Second-arclength-derivative operator, one row per primary point."""
    c_minus, c_plus, c_center = curve_coefficients(disc)
    nb = disc.chart_neighbors
    n_p = disc.n_p
    h2 = disc.h ** 2
    rows = np.repeat(np.arange(n_p), 3)
    cols = np.stack([nb[:, 0], nb[:, 1], np.arange(n_p)], axis=1).ravel()
    vals = np.stack([c_minus, c_plus, -c_center], axis=1).ravel() / h2
    return assemble_csr(rows, cols, vals, (n_p, disc.n_tot))


def reduced_lb_curve(disc):
    return (lb_curve(disc) @ disc.extension_matrix()).tocsr()


def coefficient_report(disc):
    """Size and smoothness diagnostics of the stencil coefficients.

    min_center_half is min of c_center/2 (compare 1/2 - O(h)); max_jump is
    the largest |neighbor - center/2| (compare O(h)); pointwise_gap is the
    largest |c_center/2 - gamma^2|, the discrepancy between the averaged
    and the pointwise readings of the coefficient (O(h^2)).
    """
    c_minus, c_plus, c_center = curve_coefficients(disc)
    half = 0.5 * c_center
    idx = np.arange(disc.n_p)
    gamma = np.abs(disc.normals[idx, disc.axis[:disc.n_p]])
    return {
        "min_center_half": float(half.min()),
        "max_jump": float(np.maximum(np.abs(c_minus - half),
                                     np.abs(c_plus - half)).max()),
        "pointwise_gap": float(np.abs(half - gamma ** 2).max()),
    }


def resolvent_positivity(disc, k_over_h2_list):
    """Sign report on (I - k reduced_LB)^{-1} for each sigma = k/h^2."""
    return resolvent_entry_report(reduced_lb_curve(disc), k_over_h2_list,
                                  disc.h)


def proof_matrix(disc, sigma):
    """The (n_tot x n_tot) matrix A of the positivity argument.

    Upper rows are I - k*LB at the primaries (k = sigma h^2); lower rows
    state that each secondary equals its quadratic interpolation.
    """
    c_minus, c_plus, c_center = curve_coefficients(disc)
    nb = disc.chart_neighbors
    n_p, n_s, n = disc.n_p, disc.n_s, disc.n_tot
    rows = [np.repeat(np.arange(n_p), 3)]
    cols = [np.stack([nb[:, 0], nb[:, 1], np.arange(n_p)], axis=1).ravel()]
    vals = [np.stack([-sigma * c_minus, -sigma * c_plus,
                      1.0 + sigma * c_center], axis=1).ravel()]
    if n_s:
        rows.append(np.repeat(np.arange(n_p, n), 4))
        sec_cols = np.column_stack([np.arange(n_p, n), disc.interp_points])
        sec_vals = np.column_stack([np.ones(n_s), -disc.interp_coeffs])
        cols.append(sec_cols.ravel())
        vals.append(sec_vals.ravel())
    return assemble_csr(np.concatenate(rows), np.concatenate(cols),
                        np.concatenate(vals), (n, n))


def proof_row_operations(disc, sigma):
    """The matrix P that clears the positive interpolation entries of A.

    For each secondary row with a positive entry at one neighbor of its
    primary, add 1/(8 sigma c_that_side) times the primary row.  P has unit
    diagonal and those multipliers in the (secondary, primary) slots.
    """
    c_minus, c_plus, _ = curve_coefficients(disc)
    n_p, n_s, n = disc.n_p, disc.n_s, disc.n_tot
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.ones(n)]
    for s in range(n_s):
        t = disc.theta[n_p + s]
        if t == 0.0:
            continue
        p = int(disc.associated_primary[n_p + s])
        # positive entry sits at q_minus for t > 0, q_plus for t < 0
        c_side = c_minus[p] if t > 0.0 else c_plus[p]
        rows.append(np.array([n_p + s]))
        cols.append(np.array([p]))
        vals.append(np.array([1.0 / (8.0 * sigma * c_side)]))
    return assemble_csr(np.concatenate(rows), np.concatenate(cols),
                        np.concatenate(vals), (n, n))


def m_matrix_report(disc, sigma):
    """Structural check that PA is an M-matrix at the given sigma.

    Reports the worst positive off-diagonal of A before the row operations,
    then for PA: the largest off-diagonal, the smallest diagonal, and the
    smallest row sum (strict dominance needs it positive).
    """
    a = proof_matrix(disc, sigma)
    p = proof_row_operations(disc, sigma)
    pa = (p @ a).tocsr()

    def split(mat):
        mat = mat.tocoo()
        off = mat.row != mat.col
        diag = mat.tocsr().diagonal()
        off_max = float(mat.data[off].max(initial=-np.inf))
        return diag, off_max

    _, off_before = split(a)
    diag, off_after = split(pa)
    rowsums = np.asarray(pa.sum(axis=1)).ravel()
    return {
        "sigma": float(sigma),
        "positive_offdiag_before": off_before,
        "max_offdiag_after": off_after,
        "min_diag_after": float(diag.min()),
        "min_rowsum_after": float(rowsums.min()),
        "is_m_matrix": bool(off_after <= 1e-13 and diag.min() > 0.0
                            and rowsums.min() > 0.0),
    }


def block_elimination_residual(disc, sigma, seed=0):
    """Consistency of the proof matrix with the reduced resolvent.

    Solves A (u_p, u_s) = (y, 0) and measures both the defect of
    (I - k LB_red) u_p = y and the gap to the directly solved u_p.
    """
    n_p = disc.n_p
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(n_p)
    a = proof_matrix(disc, sigma)
    rhs = np.concatenate([y, np.zeros(disc.n_s)])
    u_all = factorize(a.tocsc()).solve(rhs)
    u_p = u_all[:n_p]
    k = sigma * disc.h ** 2
    red = reduced_lb_curve(disc)
    lhs = u_p - k * (red @ u_p)
    direct = factorize(sp.identity(n_p, format="csc")
                       - k * red.tocsc()).solve(y)
    return {
        "defect": float(np.abs(lhs - y).max() / np.abs(y).max()),
        "route_gap": float(np.abs(u_p - direct).max()
                           / max(np.abs(direct).max(), 1e-300)),
    }
