"""Cut-point discretization of a closed level-set surface on a Cartesian grid.

Cut points are the intersections of the surface with grid intervals.  Points
cut from intervals along axis nu form the set Gamma_nu and carry a local chart
over the other two coordinate planes.  Each cut point is owned by its closest
grid point; the nearest cut point of each grid point is "primary", the rest
are "secondary" and carry values interpolated from primary data (equilibration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .errors import EmptySurfaceError, GridError, StencilError

ROLE_PRIMARY = 0
ROLE_SECONDARY = 1
ROLE_NAMES = {ROLE_PRIMARY: "primary", ROLE_SECONDARY: "secondary",
              2: "inadmissible"}

# fixed slot order for the 3x3 chart stencil, offsets along (chart1, chart2)
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
                    (0, 1), (1, -1), (1, 0), (1, 1))
SLOT = {off: i for i, off in enumerate(NEIGHBOR_OFFSETS)}
# frequently used slots
SLOT_W, SLOT_E = SLOT[(-1, 0)], SLOT[(1, 0)]
SLOT_S, SLOT_N = SLOT[(0, -1)], SLOT[(0, 1)]
SLOT_SW, SLOT_NE = SLOT[(-1, -1)], SLOT[(1, 1)]
SLOT_NW, SLOT_SE = SLOT[(-1, 1)], SLOT[(1, -1)]
AXIS_SLOTS = (SLOT_W, SLOT_E, SLOT_S, SLOT_N)

_SNAP_TOL = 1e-9  # fraction of h below which a cut is snapped to a grid point


def chart_axes(axis):
    """Chart coordinate axes for Gamma_axis, cyclic: (y,z), (z,x), (x,y)."""
    return (axis + 1) % 3, (axis + 2) % 3


@dataclass(frozen=True)
class Grid3:
    """Axis-aligned grid: points origin + (i,j,k)*h, 0 <= i <= n_cells."""
    origin: tuple
    h: float
    n_cells: tuple

    def __post_init__(self):
        if self.h <= 0:
            raise GridError(f"grid spacing must be positive, got {self.h}")

    @classmethod
    def cube(cls, lo, hi, n):
        """Cubic grid with n intervals per axis spanning [lo, hi]^3."""
        if not hi > lo or n < 1:
            raise GridError(f"bad cube bounds ({lo}, {hi}) or count {n}")
        return cls((lo, lo, lo), (hi - lo) / n, (n, n, n))

    def coords(self, axis):
        return self.origin[axis] + self.h * np.arange(self.n_cells[axis] + 1)

    @property
    def shape(self):
        return tuple(n + 1 for n in self.n_cells)


def interpolation_coefficients(theta):
    """Quadratic interpolation weights at offset theta from the center node.

    Nodes sit at chart offsets -1, 0, +1; returns (w_minus, w_center, w_plus).
    """
    theta = np.asarray(theta, dtype=float)
    return (0.5 * (-theta + theta ** 2),
            1.0 - theta ** 2,
            0.5 * (theta + theta ** 2))


@dataclass
class CutPoint:
    """Per-point view onto a SurfaceDiscretization (see `point`)."""
    index: int
    position: np.ndarray
    axis: int
    base_index: tuple
    closest_grid_point: tuple
    theta: float
    role: str
    normal: np.ndarray
    associated_primary: int | None
    chart_neighbors: dict | None


class SurfaceDiscretization:
    """Cut points, roles, chart stencils and equilibration matrices."""

    def __init__(self, grid, eta, positions, axis, base_index, closest_gp,
                 theta, normals, n_p, associated_primary, chart_neighbors,
                 interp_points, interp_coeffs, pi_sp, pi_ss,
                 surface_kind="user", surface_params=None):
        self.grid = grid
        self.eta = float(eta)
        self.positions = positions
        self.axis = axis
        self.base_index = base_index
        self.closest_gp = closest_gp
        self.theta = theta
        self.normals = normals
        self.n_p = int(n_p)
        self.associated_primary = associated_primary
        self.chart_neighbors = chart_neighbors
        self.interp_points = interp_points
        self.interp_coeffs = interp_coeffs
        self.pi_sp = pi_sp
        self.pi_ss = pi_ss
        self.surface_kind = surface_kind
        self.surface_params = dict(surface_params or {})
        self._pi_factor = None
        self._extension = None

    # -- basic queries ---------------------------------------------------

    @property
    def n_tot(self):
        return self.positions.shape[0]

    @property
    def n_s(self):
        return self.n_tot - self.n_p

    @property
    def h(self):
        return self.grid.h

    @property
    def role(self):
        r = np.full(self.n_tot, ROLE_SECONDARY, dtype=np.int8)
        r[:self.n_p] = ROLE_PRIMARY
        return r

    def points_in_set(self, axis):
        """Indices of cut points in Gamma_axis."""
        return np.nonzero(self.axis == axis)[0]

    def point(self, i):
        """Materialize one cut point as a CutPoint record."""
        i = int(i)
        primary = i < self.n_p
        nbrs = None
        if primary:
            nbrs = {off: int(j) for off, j in
                    zip(NEIGHBOR_OFFSETS, self.chart_neighbors[i]) if j >= 0}
        return CutPoint(
            index=i,
            position=self.positions[i].copy(),
            axis=int(self.axis[i]),
            base_index=tuple(int(v) for v in self.base_index[i]),
            closest_grid_point=tuple(int(v) for v in self.closest_gp[i]),
            theta=float(self.theta[i]),
            role=ROLE_NAMES[ROLE_PRIMARY if primary else ROLE_SECONDARY],
            normal=self.normals[i].copy(),
            associated_primary=None if primary
            else int(self.associated_primary[i]),
            chart_neighbors=nbrs,
        )

    # -- equilibration ---------------------------------------------------

    def _factor(self):
        if self._pi_factor is None:
            n_s = self.n_s
            mat = (sp.identity(n_s, format="csc") - self.pi_ss.tocsc())
            self._pi_factor = spla.splu(mat)
        return self._pi_factor

    def extend(self, values_p):
        """Extend primary values to all cut points by solving the
        interpolation system exactly (sparse direct factorization)."""
        values_p = np.asarray(values_p, dtype=float)
        if values_p.shape[0] != self.n_p:
            raise ValueError(f"expected {self.n_p} primary values, "
                             f"got {values_p.shape[0]}")
        if self.n_s == 0:
            return values_p.copy()
        rhs = self.pi_sp @ values_p
        u_s = self._factor().solve(rhs)
        return np.concatenate([values_p, u_s], axis=0)

    def restrict(self, values):
        return np.asarray(values)[:self.n_p]

    def extension_matrix(self):
        """Explicit sparse extension E: u_p -> all points.

        Built as the Neumann series sum_k Pi_ss^k Pi_sp (geometric decay,
        ||Pi_ss||_inf <= 1/2), summed until terms vanish at double precision.
        """
        if self._extension is None:
            w = self.pi_sp.copy()
            term = self.pi_sp
            for _ in range(200):
                term = self.pi_ss @ term
                if term.nnz == 0 or np.abs(term.data).max() < 1e-17:
                    break
                w = w + term
            else:  # pragma: no cover - ||Pi_ss|| <= 1/2 forbids this
                raise RuntimeError("extension series failed to converge")
            self._extension = sp.vstack(
                [sp.identity(self.n_p, format="csr"), w], format="csr")
        return self._extension

    def equilibration_residual(self, values):
        """max |u_s - (Pi_sp u_p + Pi_ss u_s)| for a full field."""
        values = np.asarray(values, dtype=float)
        u_p, u_s = values[:self.n_p], values[self.n_p:]
        if self.n_s == 0:
            return 0.0
        r = u_s - (self.pi_sp @ u_p + self.pi_ss @ u_s)
        return float(np.abs(r).max())

    # -- stencil gathers used by the operators ---------------------------

    def stencil_ids(self, slots=None):
        """(n_p, len(slots)) neighbor ids for the requested slots (default all 8)."""
        if slots is None:
            return self.chart_neighbors.copy()
        return self.chart_neighbors[:, list(slots)]

    def require_full_stencil(self, what="operator stencil", slots=None):
        """Raise StencilError if any primary lacks a neighbor in `slots`.

        `slots=None` demands the full 3x3 stencil; operators that read only
        part of it (one-sided differences need the axis slots, the
        divergence form needs one diagonal pair per point) pass a subset.
        """
        slot_ids = list(range(8) if slots is None else slots)
        nb = self.chart_neighbors[:, slot_ids]
        missing = np.nonzero((nb < 0).any(axis=1))[0]
        if missing.size:
            i = int(missing[0])
            offs = [NEIGHBOR_OFFSETS[slot_ids[s]] for s in
                    np.nonzero(nb[i] < 0)[0]]
            raise StencilError(
                f"{what}: {missing.size} primary points lack chart-stencil "
                f"neighbors; first at {self.positions[i]} (set Gamma_"
                f"{int(self.axis[i]) + 1}), missing offsets {offs}. "
                f"Try a finer grid or a smaller eta (eta={self.eta}).")


def equilibrate(disc, values_p):
    """Extend primary values to all cut points (module-level convenience)."""
    return disc.extend(values_p)


# -- construction --------------------------------------------------------


def _grid_phi(surface, grid):
    xs, ys, zs = (grid.coords(a) for a in range(3))
    shape = grid.shape
    out = np.empty(shape)
    plane = shape[1] * shape[2]
    chunk = max(1, int(4_000_000 // max(plane, 1)))
    for i0 in range(0, shape[0], chunk):
        i1 = min(shape[0], i0 + chunk)
        x, y, z = np.meshgrid(xs[i0:i1], ys, zs, indexing="ij")
        out[i0:i1] = surface.phi(np.stack([x, y, z], axis=-1))
    return out


def _check_containment(phi_grid):
    faces = [phi_grid[0], phi_grid[-1], phi_grid[:, 0], phi_grid[:, -1],
             phi_grid[:, :, 0], phi_grid[:, :, -1]]
    worst = min(float(f.min()) for f in faces)
    if worst <= 0.0:
        raise GridError(
            f"surface is not strictly inside the grid box "
            f"(min boundary phi = {worst:.3e})")


def _admissible_mask(normals, axis, eta):
    """Admissibility filter: keep cuts whose free-axis normal component is
    at least eta in magnitude.  An all-False result is not an error."""
    normals = np.atleast_2d(normals)
    ax = np.broadcast_to(np.asarray(axis), normals.shape[:1])
    return np.abs(normals[np.arange(normals.shape[0]), ax]) >= eta


def _batch_bisect(surface, p_in, p_out, axis, tol):
    """Bisection on many segments at once along one axis (phi(p_in) <= 0)."""
    m = p_in.shape[0]
    lo = np.zeros(m)
    hi = np.ones(m)
    delta = p_out[:, axis] - p_in[:, axis]
    q = p_in.copy()
    for _ in range(max(1, math.ceil(math.log2(1.0 / tol)))):
        mid = 0.5 * (lo + hi)
        q[:, axis] = p_in[:, axis] + mid * delta
        neg = surface.phi(q) <= 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    q[:, axis] = p_in[:, axis] + 0.5 * (lo + hi) * delta
    return q


def _locate_axis_cuts(surface, grid, phi_grid, axis, tol):
    """Find all sign-change intervals along one axis and their cut points."""
    inside = phi_grid <= 0.0
    lo_slice = [slice(None)] * 3
    hi_slice = [slice(None)] * 3
    lo_slice[axis] = slice(None, -1)
    hi_slice[axis] = slice(1, None)
    in_lo = inside[tuple(lo_slice)]
    in_hi = inside[tuple(hi_slice)]
    change = in_lo != in_hi
    base = np.argwhere(change).astype(np.int64)
    if base.shape[0] == 0:
        return base, np.empty((0, 3))
    origin = np.asarray(grid.origin)
    p_lo = origin + grid.h * base
    p_hi = p_lo.copy()
    p_hi[:, axis] += grid.h
    lo_is_in = in_lo[change]
    p_in = np.where(lo_is_in[:, None], p_lo, p_hi)
    p_out = np.where(lo_is_in[:, None], p_hi, p_lo)
    cuts = _batch_bisect(surface, p_in, p_out, axis, tol)
    # frozen coordinates are exact grid coordinates by construction
    for a in range(3):
        if a != axis:
            cuts[:, a] = p_lo[:, a]
    return base, cuts


def _snap_and_dedupe(grid, positions, axis, base, normals):
    """Snap near-grid-point cuts to grid points exactly and keep only one
    record per snapped node: the axis of largest |n| component."""
    origin = np.asarray(grid.origin)
    free = positions[np.arange(len(axis)), axis]
    scaled = (free - origin[axis]) / grid.h
    nearest = np.rint(scaled)
    snap = np.abs(scaled - nearest) <= _SNAP_TOL
    if not snap.any():
        return np.ones(len(axis), dtype=bool), positions, False
    positions = positions.copy()
    positions[snap, axis[snap]] = origin[axis[snap]] + grid.h * nearest[snap]

    keep = np.ones(len(axis), dtype=bool)
    node = base.copy()
    node[np.arange(len(axis)), axis] = 0
    node[snap, axis[snap]] = nearest[snap].astype(np.int64)
    snap_ids = np.nonzero(snap)[0]
    key = np.ravel_multi_index(node[snap_ids].T, [n + 1 for n in grid.n_cells])
    for k in np.unique(key):
        group = snap_ids[key == k]
        if group.size == 1:
            continue
        n = normals[group[0]]
        want = int(np.argmax(np.abs(n)))
        cand = group[axis[group] == want]
        chosen = cand[0] if cand.size else group[
            int(np.argmax(np.abs(normals[group, axis[group]])))]
        keep[group] = False
        keep[chosen] = True
    return keep, positions, True


def _resolve_neighbors(grid, positions, axis, base, n_p):
    """For each primary point, resolve the 8 chart-stencil neighbor ids.

    Candidates share the primary's set Gamma_nu and the queried chart index
    pair; when a chart column crosses several sheets of the surface the
    candidate nearest in the free coordinate is taken.
    """
    n_tot = positions.shape[0]
    c1 = (axis + 1) % 3
    c2 = (axis + 2) % 3
    idx = np.arange(n_tot)
    c1i = base[idx, c1]
    c2i = base[idx, c2]
    bmax = max(grid.n_cells) + 3
    key = (axis.astype(np.int64) * bmax + (c1i + 1)) * bmax + (c2i + 1)
    pos_free = positions[idx, axis]
    span = float(pos_free.max() - pos_free.min()) * 1.5 + 1.0
    sortval = key.astype(float) * span + (pos_free - pos_free.min())
    order = np.argsort(sortval, kind="stable")
    s_sortval = sortval[order]
    s_key = key[order]
    s_pos = pos_free[order]

    prim = np.arange(n_p)
    p_axis = axis[:n_p].astype(np.int64)
    p_c1 = c1i[:n_p]
    p_c2 = c2i[:n_p]
    p_pos = pos_free[:n_p]
    out = np.full((n_p, 8), -1, dtype=np.int64)
    for slot, (d1, d2) in enumerate(NEIGHBOR_OFFSETS):
        qkey = (p_axis * bmax + (p_c1 + d1 + 1)) * bmax + (p_c2 + d2 + 1)
        qval = qkey.astype(float) * span + (p_pos - pos_free.min())
        j = np.searchsorted(s_sortval, qval)
        best = np.full(n_p, -1, dtype=np.int64)
        best_d = np.full(n_p, np.inf)
        for cand in (j - 1, j):
            ok = (cand >= 0) & (cand < n_tot)
            cc = np.clip(cand, 0, n_tot - 1)
            ok &= s_key[cc] == qkey
            d = np.where(ok, np.abs(s_pos[cc] - p_pos), np.inf)
            better = d < best_d
            best = np.where(better, order[cc], best)
            best_d = np.where(better, d, best_d)
        out[prim, slot] = best
    return out


def _interpolation_data(positions, axis, theta, n_p, associated_primary,
                        neighbors):
    """Secondary interpolation triples (q-, p, q+) and their weights."""
    n_tot = positions.shape[0]
    n_s = n_tot - n_p
    sec = np.arange(n_p, n_tot)
    p = associated_primary[sec]
    mu = axis[p]
    nu = axis[sec]
    same = nu == mu
    if same.any():
        i = sec[same][0]
        raise StencilError(
            f"secondary cut point at {positions[i]} shares its interval axis "
            f"with its associated primary; interpolation along the chart is "
            f"impossible (under-resolved surface)")
    along_c1 = nu == (mu + 1) % 3
    slot_minus = np.where(along_c1, SLOT_W, SLOT_S)
    slot_plus = np.where(along_c1, SLOT_E, SLOT_N)
    qm = neighbors[p, slot_minus]
    qp = neighbors[p, slot_plus]
    bad = (qm < 0) | (qp < 0)
    if bad.any():
        i = sec[bad][0]
        raise StencilError(
            f"secondary cut point at {positions[i]} needs chart neighbors of "
            f"its primary at {positions[p[bad][0]]} that do not exist "
            f"(admissibility gap); refine the grid or lower eta")
    wm, wc, wp = interpolation_coefficients(theta[sec])
    points = np.stack([qm, p, qp], axis=1).astype(np.int64)
    coeffs = np.stack([wm, wc, wp], axis=1)
    return points, coeffs


def _pi_matrices(points, coeffs, n_p, n_s):
    rows = np.repeat(np.arange(n_s), 3)
    cols = points.ravel()
    vals = coeffs.ravel()
    in_p = cols < n_p
    pi_sp = sp.coo_matrix((vals[in_p], (rows[in_p], cols[in_p])),
                          shape=(n_s, n_p)).tocsr()
    pi_ss = sp.coo_matrix((vals[~in_p], (rows[~in_p], cols[~in_p] - n_p)),
                          shape=(n_s, n_s)).tocsr()
    return pi_sp, pi_ss


def discretize(surface, grid, eta=0.45, tol=1e-12):
    """Build the cut-point discretization of `surface` on `grid`.

    Parameters
    ----------
    surface : LevelSetSurface
    grid : Grid3
        Must strictly contain the surface (checked on the boundary faces).
    eta : float
        Admissibility threshold on |n_nu| at the cut point; 0 < eta < 1/sqrt(3).
    tol : float
        Bisection parameter tolerance (fraction of a grid interval).

    Returns
    -------
    SurfaceDiscretization with primary points first (each block ordered by
    (axis, base index) for deterministic output).
    """
    if not 0.0 < eta < 1.0 / math.sqrt(3.0):
        raise ValueError(f"eta must lie in (0, 1/sqrt(3)), got {eta}")
    phi_grid = _grid_phi(surface, grid)
    if not np.isfinite(phi_grid).all():
        raise GridError("phi evaluated to non-finite values on the grid")
    _check_containment(phi_grid)

    bases, cuts, axes = [], [], []
    for ax in range(3):
        base, q = _locate_axis_cuts(surface, grid, phi_grid, ax, tol)
        bases.append(base)
        cuts.append(q)
        axes.append(np.full(base.shape[0], ax, dtype=np.int8))
    base = np.concatenate(bases, axis=0)
    positions = np.concatenate(cuts, axis=0)
    axis = np.concatenate(axes)
    if positions.shape[0] == 0:
        raise EmptySurfaceError("no grid interval crosses the surface")

    normals = surface.unit_normal(positions)
    keep, positions, snapped = _snap_and_dedupe(grid, positions, axis, base,
                                                normals)
    if not keep.all():
        base, positions = base[keep], positions[keep]
        axis, normals = axis[keep], normals[keep]
    if snapped:
        normals = surface.unit_normal(positions)

    admissible = _admissible_mask(normals, axis, eta)
    base, positions = base[admissible], positions[admissible]
    axis, normals = axis[admissible], normals[admissible]
    if positions.shape[0] == 0:
        raise EmptySurfaceError(
            f"all {admissible.size} located cut points failed the "
            f"admissibility test at eta={eta}")

    m = positions.shape[0]
    ids = np.arange(m)
    origin = np.asarray(grid.origin)
    scaled = (positions[ids, axis] - origin[axis]) / grid.h
    frac = scaled - base[ids, axis]
    offset = (frac > 0.5).astype(np.int64)
    closest = base.copy()
    closest[ids, axis] += offset
    theta = np.clip(scaled - closest[ids, axis], -0.5, 0.5)

    # at most one admissible cut per grid interval
    interval_key = np.ravel_multi_index(
        np.vstack([axis.astype(np.int64), base.T]),
        (3,) + tuple(n + 1 for n in grid.n_cells))
    if np.unique(interval_key).size != m:
        raise GridError("duplicate cut points on a single grid interval")

    gp_key = np.ravel_multi_index(closest.T, grid.shape)
    order = np.lexsort((axis, base[:, 2], base[:, 1], base[:, 0],
                        np.abs(theta), gp_key))
    sorted_gp = gp_key[order]
    first = np.ones(m, dtype=bool)
    first[1:] = sorted_gp[1:] != sorted_gp[:-1]
    is_primary = np.zeros(m, dtype=bool)
    is_primary[order[first]] = True
    # owner primary for every point, via its grid-point group
    group_rep = np.empty(m, dtype=np.int64)
    group_rep[order] = order[first][np.cumsum(first) - 1]

    # deterministic final ordering: primaries then secondaries, each block
    # sorted by (axis, base index)
    block_order = np.lexsort((base[:, 2], base[:, 1], base[:, 0], axis,
                              ~is_primary * 1))
    new_id = np.empty(m, dtype=np.int64)
    new_id[block_order] = np.arange(m)
    n_p = int(is_primary.sum())

    positions = positions[block_order]
    axis = axis[block_order]
    base = base[block_order]
    closest = closest[block_order]
    theta = theta[block_order]
    normals = normals[block_order]
    associated = np.full(m, -1, dtype=np.int64)
    associated[n_p:] = new_id[group_rep[block_order[n_p:]]]

    neighbors = _resolve_neighbors(grid, positions, axis, base, n_p)
    interp_points, interp_coeffs = _interpolation_data(
        positions, axis, theta, n_p, associated, neighbors)
    pi_sp, pi_ss = _pi_matrices(interp_points, interp_coeffs, n_p, m - n_p)
    if m - n_p:
        row_sums = np.abs(pi_ss).sum(axis=1)
        assert float(row_sums.max()) <= 0.5 + 1e-12

    return SurfaceDiscretization(
        grid=grid, eta=eta, positions=positions, axis=axis, base_index=base,
        closest_gp=closest, theta=theta, normals=normals, n_p=n_p,
        associated_primary=associated, chart_neighbors=neighbors,
        interp_points=interp_points, interp_coeffs=interp_coeffs,
        pi_sp=pi_sp, pi_ss=pi_ss, surface_kind=surface.kind,
        surface_params=surface.params)


# -- discretization quality report ---------------------------------------


@dataclass
class QualityReport:
    """Geometric quality bounds of the primary point set."""
    h: float
    n_p: int
    n_s: int
    normal_ratio_max: float        # max over primaries of max_other |n_mu|/|n_nu|
    min_primary_spacing: float     # min pairwise distance between primaries
    max_primary_gap: float         # max distance to the nearest other primary
    extras: dict = field(default_factory=dict)


def quality_report(disc):
    """Check the geometric guarantees of the primary set.

    The free-axis normal component of a primary point nearly dominates the
    others (ratio <= 1 + O(h)); primaries are pairwise separated by at least
    (sqrt(2)/2) h - O(h^2) and no primary is farther than (3 sqrt(2)/2) h +
    O(h^2) from another.
    """
    n_p = disc.n_p
    n = disc.normals[:n_p]
    ax = disc.axis[:n_p].astype(np.int64)
    own = np.abs(n[np.arange(n_p), ax])
    others = np.abs(n).copy()
    others[np.arange(n_p), ax] = 0.0
    ratio = others.max(axis=1) / own
    tree = cKDTree(disc.positions[:n_p])
    d, _ = tree.query(disc.positions[:n_p], k=2)
    nearest = d[:, 1]
    return QualityReport(
        h=disc.h, n_p=n_p, n_s=disc.n_s,
        normal_ratio_max=float(ratio.max()),
        min_primary_spacing=float(nearest.min()),
        max_primary_gap=float(nearest.max()))
