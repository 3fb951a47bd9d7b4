"""Reference experiment drivers: one runner per report table.

Each runner returns a flat record list (N, time, metric, value) in a fixed
order, so CSV output is byte-identical across runs.  Console rendering adds
observed-order columns log2(err_N / err_2N) whenever two grids are present.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.spatial import cKDTree

from . import advection as adv_mod
from . import swe as swe_mod
from .curve1d import (Grid2, discretize_curve, m_matrix_report, make_curve,
                      resolvent_positivity)
from .diffusion import bdf2_solve, forward_euler_solve
from .discretization import Grid3, discretize, interpolation_coefficients
from .errors import StencilError
from .fields import error_norms
from .geometry import make_surface
from .operators import laplace_beltrami, primary_chart_axes
from .poisson import poisson_solve
from .quadrature import quadrature_weights
from .spectrum import cluster_errors, laplacian_eigenvalues

BOX_HALF = 1.2
SPHERE_CLUSTERS = tuple(-n * (n + 1) for n in range(7))
SPHERE_MULTIPLICITIES = tuple(2 * n + 1 for n in range(7))

_DISC_CACHE: dict = {}


def get_discretization(surface_name, n, eta=0.45):
    """Build (and memoize per process) a catalog-surface discretization."""
    key = (surface_name, int(n), float(eta))
    if key not in _DISC_CACHE:
        surf = make_surface(surface_name)
        grid = Grid3.cube(-BOX_HALF, BOX_HALF, int(n))
        _DISC_CACHE[key] = discretize(surf, grid, eta=eta)
    return _DISC_CACHE[key]


def _pmap(fn, arg_list, jobs):
    if jobs is None or jobs <= 1 or len(arg_list) <= 1:
        return [fn(a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, arg_list))


# ---------------------------------------------------------------------------
# fine-to-coarse comparison

def chart_interpolate(fine, full_values, points):
    """Evaluate a point field of `fine` at off-grid surface points.

    Each query point is assigned to its nearest primary and interpolated
    biquadratically over that primary's 3x3 chart stencil.  Primaries with
    incomplete stencils (possible in steep regions) are skipped in favor of
    the next-nearest complete one.
    """
    full_values = np.asarray(full_values, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n_p = fine.n_p
    complete = (fine.chart_neighbors >= 0).all(axis=1)
    hosts = np.flatnonzero(complete)
    if hosts.size == 0:
        raise StencilError("no fine primary has a complete chart stencil; "
                           "cannot interpolate")
    tree = cKDTree(fine.positions[:n_p][complete])
    _, picked = tree.query(points, k=1)
    owner = hosts[picked]
    nb = fine.chart_neighbors[owner]
    ids = np.stack([np.stack([nb[:, 0], nb[:, 1], nb[:, 2]], axis=1),
                    np.stack([nb[:, 3], owner, nb[:, 4]], axis=1),
                    np.stack([nb[:, 5], nb[:, 6], nb[:, 7]], axis=1)], axis=1)
    c1, c2 = primary_chart_axes(fine)
    rows = np.arange(len(points))
    d1 = (points[rows, c1[owner]]
          - fine.positions[owner, c1[owner]]) / fine.grid.h
    d2 = (points[rows, c2[owner]]
          - fine.positions[owner, c2[owner]]) / fine.grid.h
    w1 = np.stack(interpolation_coefficients(d1), axis=1)
    w2 = np.stack(interpolation_coefficients(d2), axis=1)
    return np.einsum("mi,mj,mij->m", w1, w2, full_values[ids])


def successive_errors(coarse, u_coarse_full, fine, u_fine_full):
    """Absolute max and discrete L2 of u_coarse - (fine interpolated)."""
    diff = u_coarse_full - chart_interpolate(fine, u_fine_full,
                                             coarse.positions)
    return float(np.abs(diff).max()), float(np.sqrt((diff ** 2).mean()))


# ---------------------------------------------------------------------------
# table 3.1: diffusion on the unit sphere, known exact solution

def _sphere_initial(points):
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return 7.0 * (x - 2.0 * y) * (15.0 * z ** 2 - 3.0) / 8.0


def _diffusion_sphere_case(args):
    n, stepper, form = args
    disc = get_discretization("sphere", n)
    u0 = _sphere_initial(disc.positions)[:disc.n_p]
    alpha = 1.0 / 12.0
    if stepper == "fe":
        k = 8.0 / n ** 2
    else:
        k = 1.0 / (2.0 * n)
    n_steps = round(1.0 / k)
    solver = forward_euler_solve if stepper == "fe" else bdf2_solve
    u = solver(disc, u0, alpha, k, n_steps, form=form)
    exact = math.exp(-1.0) * _sphere_initial(disc.positions)
    return error_norms(disc.extend(u), exact)


def run_diffusion_sphere(n_list=(80, 160), jobs=1,
                         forms=("nondivergence", "divergence"),
                         steppers=("fe", "bdf2")):
    combos = [(form, stepper) for form in forms for stepper in steppers]
    tasks = [(n, stepper, form) for n in n_list for form, stepper in combos]
    results = _pmap(_diffusion_sphere_case, tasks, jobs)
    records = []
    short = {"nondivergence": "nondiv", "divergence": "div"}
    for (n, stepper, form), (emax, el2) in zip(tasks, results):
        tag = f"{stepper}_{short[form]}"
        records.append((n, 1.0, f"{tag}_max", emax))
        records.append((n, 1.0, f"{tag}_l2", el2))
    return records


# ---------------------------------------------------------------------------
# table 3.2: diffusion on ellipsoid / cassini oval, successive-grid errors

def _diffusion_pair_case(args):
    surface, stepper, n = args
    disc = get_discretization(surface, n)
    p = disc.positions
    u0 = np.cos(p[:, 0] - p[:, 1] + p[:, 2])[:disc.n_p]
    alpha = 0.1
    if stepper == "fe":
        k = 8.0 / n ** 2
    else:
        k = 1.0 / (10.0 * n)
    solver = forward_euler_solve if stepper == "fe" else bdf2_solve
    u = solver(disc, u0, alpha, k, round(1.0 / k), form="divergence")
    return disc.extend(u)


def run_diffusion_pair(n_list=(80, 160), jobs=1,
                       surfaces=("ellipsoid", "cassini_oval")):
    n_list = tuple(n_list)
    all_n = tuple(sorted({*n_list, *(2 * n for n in n_list)}))
    tasks = [(surface, stepper, n)
             for surface in surfaces
             for stepper in ("fe", "bdf2")
             for n in all_n]
    fields = dict(zip(tasks, _pmap(_diffusion_pair_case, tasks, jobs)))
    records = []
    for surface in surfaces:
        for stepper in ("fe", "bdf2"):
            for n in n_list:
                coarse = get_discretization(surface, n)
                fine = get_discretization(surface, 2 * n)
                emax, el2 = successive_errors(
                    coarse, fields[(surface, stepper, n)],
                    fine, fields[(surface, stepper, 2 * n)])
                tag = f"{surface}_{stepper}"
                records.append((n, 1.0, f"{tag}_max", emax))
                records.append((n, 1.0, f"{tag}_l2", el2))
    return records


# ---------------------------------------------------------------------------
# table 3.3: low eigenvalues of the reduced operator on the sphere

def _eigen_case(args):
    n, form = args
    disc = get_discretization("sphere", n)
    count = sum(SPHERE_MULTIPLICITIES)
    eigs, max_imag = laplacian_eigenvalues(disc, count, form=form)
    errs = cluster_errors(eigs, SPHERE_CLUSTERS, SPHERE_MULTIPLICITIES)
    return errs, max_imag


def run_eigenvalues(n_list=(40, 80), jobs=1, form="divergence"):
    results = _pmap(_eigen_case, [(n, form) for n in n_list], jobs)
    records = []
    for n, (errs, max_imag) in zip(n_list, results):
        for level, err in enumerate(errs):
            records.append((n, 0.0, f"cluster_n{level}", float(err)))
        records.append((n, 0.0, "max_imag", float(max_imag)))
    return records


# ---------------------------------------------------------------------------
# poisson problem on the unit sphere

def _poisson_case(n):
    disc = get_discretization("sphere", n)
    p = disc.positions[:disc.n_p]
    s = p[:, 0] + p[:, 1] - 2.0 * p[:, 2]
    f = -(6.0 - s ** 2) * np.cos(s) + 2.0 * s * np.sin(s)
    u, beta = poisson_solve(disc, f, form="divergence")
    exact = np.cos(s)
    exact = exact - exact.mean()
    return float(np.abs(u - exact).max()), float(beta)


def run_poisson(n_list=(80, 160), jobs=1):
    results = _pmap(_poisson_case, list(n_list), jobs)
    records = []
    for n, (emax, beta) in zip(n_list, results):
        records.append((n, 0.0, "err_max", emax))
        records.append((n, 0.0, "beta", beta))
    return records


# ---------------------------------------------------------------------------
# table 4.1: advection on the sphere

def _advection_case(args):
    n, times = args
    disc = get_discretization("sphere", n)
    qw = quadrature_weights(disc)
    out = []
    for t, u_p in adv_mod.solve_advection(disc, times):
        full = disc.extend(u_p)
        exact = adv_mod.exact_solution(disc.positions, t)
        emax, el2 = error_norms(full, exact)
        ref = adv_mod.exact_integral(t)
        rel_int = (qw.integrate(full) - ref) / ref
        out.append((t, emax, el2, float(rel_int)))
    return out

def run_advection(n_list=(80, 160, 320), times=(1.0, 2.0, 5.0), jobs=1):
    times = tuple(float(t) for t in times)
    results = _pmap(_advection_case, [(n, times) for n in n_list], jobs)
    records = []
    for n, rows in zip(n_list, results):
        for t, emax, el2, rel_int in rows:
            records.append((n, t, "err_max", emax))
            records.append((n, t, "err_l2", el2))
            records.append((n, t, "int_rel", rel_int))
    return records


# ---------------------------------------------------------------------------
# tables 4.2 / 4.3: rotated steady state of the shallow water equations

def _swe_case(args):
    n, days, nu = args
    disc = get_discretization("sphere", n)
    params = swe_mod.williamson_params(30.0, nu=nu)
    qw = quadrature_weights(disc)
    exact_phi = swe_mod.exact_height(disc.positions, params)
    exact_mom = exact_phi[:, None] * swe_mod.exact_velocity(disc.positions,
                                                            params)
    mass_ref = swe_mod.exact_height_integral(params)
    energy_ref = swe_mod.exact_energy_integral(params)
    out = []
    for t, phi_p, mom_p in swe_mod.solve_swe(disc, params, days):
        phi = disc.extend(phi_p)
        mom = disc.extend(mom_p)
        pmax, pl2 = error_norms(phi, exact_phi)
        mmax, ml2 = error_norms(mom, exact_mom)
        vel = mom / phi[:, None]
        energy = qw.integrate((vel ** 2).sum(axis=1))
        mass = qw.integrate(phi)
        out.append((t, mmax, pmax, ml2, pl2,
                    float((energy - energy_ref) / energy_ref),
                    float((mass - mass_ref) / mass_ref)))
    return out


def run_swe(nu, n_list=(80, 160), days=(1.0, 2.0, 5.0), jobs=1):
    days = tuple(float(d) for d in days)
    results = _pmap(_swe_case, [(n, days, float(nu)) for n in n_list], jobs)
    records = []
    names = ("mom_max", "phi_max", "mom_l2", "phi_l2",
             "energy_int", "mass_int")
    for n, rows in zip(n_list, results):
        for row in rows:
            t, values = row[0], row[1:]
            for name, value in zip(names, values):
                records.append((n, t, name, value))
    return records


# ---------------------------------------------------------------------------
# surface-integral convergence for the quadrature rule

def _quadrature_case(n):
    disc = get_discretization("sphere", n)
    qw = quadrature_weights(disc)
    area = float(qw.weights.sum())
    return (area - 4.0 * math.pi) / (4.0 * math.pi)


def run_quadrature(n_list=(40, 80, 160), jobs=1):
    results = _pmap(_quadrature_case, list(n_list), jobs)
    return [(n, 0.0, "area_rel", float(v)) for n, v in zip(n_list, results)]


# ---------------------------------------------------------------------------
# resolvent sign reports for plane curves

def run_curve_resolvent(curves=("circle", "ellipse"), n_list=(80, 160),
                        sigmas=(0.75, 1.0, 2.0), jobs=None):
    records = []
    for kind in curves:
        curve = make_curve(kind)
        for n in n_list:
            disc = discretize_curve(curve,
                                    Grid2.square(-BOX_HALF, BOX_HALF, n))
            reports = resolvent_positivity(disc, list(sigmas))
            for rep in reports:
                tag = f"{kind}_s{rep['sigma']:g}"
                records.append((n, 0.0, f"{tag}_min_entry",
                                float(rep["min_entry"])))
                records.append((n, 0.0, f"{tag}_rowsum_dev",
                                float(rep["max_rowsum_dev"])))
            for sigma in sigmas:
                rep = m_matrix_report(disc, sigma)
                records.append((n, 0.0, f"{kind}_s{sigma:g}_m_matrix",
                                1.0 if rep["is_m_matrix"] else 0.0))
    return records


# ---------------------------------------------------------------------------
# output helpers

def write_csv(path, experiment, records):
    """CSV with one metric per row; fixed formats keep output reproducible."""
    lines = ["experiment,N,time,metric,value"]
    for n, t, metric, value in records:
        lines.append(f"{experiment},{n},{t:g},{metric},{value:.12e}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def render_table(title, records):
    """Console table: one row per (N, time), metrics across.

    After each metric column an order column reports log2 of the ratio to the
    same metric on the next-coarser grid at the same time, when available.
    """
    metrics = []
    for _, _, metric, _ in records:
        if metric not in metrics:
            metrics.append(metric)
    keys = []
    for n, t, _, _ in records:
        if (n, t) not in keys:
            keys.append((n, t))
    value = {(n, t, m): v for n, t, m, v in records}
    with_time = len({t for _, t in keys}) > 1
    show_order = len({n for n, _ in keys}) > 1

    head = ["N"] + (["time"] if with_time else [])
    for m in metrics:
        head.append(m)
        if show_order:
            head.append("ord")
    rows = [head]
    for n, t in keys:
        row = [str(n)] + ([f"{t:g}"] if with_time else [])
        for m in metrics:
            v = value.get((n, t, m))
            row.append("" if v is None else f"{v:10.3e}")
            if not show_order:
                continue
            prev = value.get((n // 2, t, m))
            if v is None or prev is None or v == 0 or prev == 0:
                row.append("")
            else:
                row.append(f"{math.log2(abs(prev) / abs(v)):5.2f}")
        rows.append(row)

    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    out = [title]
    for j, row in enumerate(rows):
        out.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
        if j == 0:
            out.append("-" * len(out[-1]))
    return "\n".join(out)
