"""Closed level-set surfaces and cut-point location on grid segments.

A surface is the zero set of a smooth function phi with phi < 0 inside
(phi = 0 counts as inside).  Outward unit normals come from grad phi.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BracketingError, DegenerateGradientError

DEFAULT_FD_STEP = 1e-6


def _fd_gradient(phi, pts, step):
    """Central-difference gradient fallback for user surfaces without one."""
    pts = np.asarray(pts, dtype=float)
    out = np.empty(pts.shape)
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = step
        out[..., ax] = (phi(pts + e) - phi(pts - e)) / (2.0 * step)
    return out


class LevelSetSurface:
    """Implicit closed surface {phi = 0}, negative inside.

    Parameters
    ----------
    kind : str
        Catalog tag ("sphere", "ellipsoid", "cassini_oval") or "user".
    phi : callable
        Vectorized level-set evaluator, shape (..., 3) -> (...).
    grad : callable, optional
        Vectorized gradient, shape (..., 3) -> (..., 3).  When omitted a
        central-difference fallback with step `fd_step` is used.
    params : dict, optional
        Shape parameters, kept for serialization round trips.
    c0 : float
        Lower bound on |grad phi| near the surface; normals below it raise.
    """

    def __init__(self, kind, phi, grad=None, params=None, c0=1e-8,
                 fd_step=DEFAULT_FD_STEP):
        self.kind = kind
        self.params = dict(params or {})
        self.c0 = float(c0)
        self.fd_step = float(fd_step)
        self._phi = phi
        self._grad = grad

    def phi(self, pts):
        return self._phi(np.asarray(pts, dtype=float))

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self._grad is not None:
            return self._grad(pts)
        return _fd_gradient(self._phi, pts, self.fd_step)

    def unit_normal(self, pts):
        """Outward unit normal grad phi / |grad phi|.

        Raises DegenerateGradientError if any |grad phi| < c0.
        """
        g = np.atleast_2d(self.gradient(pts))
        mag = np.linalg.norm(g, axis=-1)
        if np.any(mag < self.c0):
            i = int(np.argmin(mag))
            raise DegenerateGradientError(
                f"|grad phi| = {mag.ravel()[i]:.3e} < c0 = {self.c0:.3e} "
                f"on {self.kind} surface")
        n = g / mag[..., None]
        return n.reshape(np.shape(pts))

    def with_fd_step(self, step):
        """Copy of this surface whose gradient fallback uses a new FD step."""
        if self._grad is not None:
            return self
        return LevelSetSurface(self.kind, self._phi, None, self.params,
                               self.c0, step)

    def __repr__(self):
        ps = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"LevelSetSurface({self.kind}{', ' + ps if ps else ''})"


def sphere(radius=1.0):
    r2 = radius * radius

    def phi(p):
        return p[..., 0] ** 2 + p[..., 1] ** 2 + p[..., 2] ** 2 - r2

    def grad(p):
        return 2.0 * p

    # |grad phi| = 2r on the surface
    return LevelSetSurface("sphere", phi, grad, {"radius": radius}, c0=radius)


def ellipsoid(a=1.0, b=0.8, c=0.65):
    inv = np.array([1.0 / a ** 2, 1.0 / b ** 2, 1.0 / c ** 2])

    def phi(p):
        return (p ** 2 * inv).sum(axis=-1) - 1.0

    def grad(p):
        return 2.0 * p * inv

    c0 = 1.0 / max(a, b, c)  # |grad phi| >= 2/max axis on the surface
    return LevelSetSurface("ellipsoid", phi, grad, {"a": a, "b": b, "c": c},
                           c0=c0)


def cassini_oval(a=0.65, b=0.715):
    """Surface of revolution (x^2+y^2+z^2+a^2)^2 - 4a^2(x^2+y^2) = b^4.

    Nonconvex (dimpled at the poles) for a < b < a*sqrt(2).
    """
    a2, b4 = a * a, b ** 4

    def phi(p):
        s = (p ** 2).sum(axis=-1)
        rho2 = p[..., 0] ** 2 + p[..., 1] ** 2
        return (s + a2) ** 2 - 4.0 * a2 * rho2 - b4

    def grad(p):
        s = (p ** 2).sum(axis=-1)
        g = np.empty(np.shape(p))
        g[..., 0] = 4.0 * p[..., 0] * (s - a2)
        g[..., 1] = 4.0 * p[..., 1] * (s - a2)
        g[..., 2] = 4.0 * p[..., 2] * (s + a2)
        return g

    # conservative: measured min |grad phi| over the surface is ~0.6 for the
    # default shape; anything below 0.05 indicates real degeneracy
    return LevelSetSurface("cassini_oval", phi, grad, {"a": a, "b": b},
                           c0=0.05)


def from_callables(phi, grad=None, c0=1e-8, params=None,
                   fd_step=DEFAULT_FD_STEP):
    """Wrap user-supplied callables as a surface (negative-inside convention)."""
    return LevelSetSurface("user", phi, grad, params, c0=c0, fd_step=fd_step)


SURFACE_CATALOG = {
    "sphere": sphere,
    "ellipsoid": ellipsoid,
    "cassini_oval": cassini_oval,
}


def make_surface(name, **params):
    if name not in SURFACE_CATALOG:
        raise ValueError(
            f"unknown surface {name!r}; catalog: {sorted(SURFACE_CATALOG)}")
    return SURFACE_CATALOG[name](**params)


def find_cut(surface, p_in, p_out, tol=1e-12):
    """Locate the surface crossing on an axis-aligned grid segment.

    p_in must satisfy phi <= 0 and p_out phi >= 0 (not both zero), and the
    endpoints must differ in exactly one coordinate.  Bisection runs until
    the bracketing parameter window is below `tol` (fraction of the segment);
    the returned point keeps the frozen coordinates of the endpoints exactly.
    """
    p_in = np.asarray(p_in, dtype=float)
    p_out = np.asarray(p_out, dtype=float)
    diff = p_out - p_in
    moving = np.nonzero(diff)[0]
    if len(moving) != 1:
        raise ValueError("segment endpoints must differ in exactly one coordinate")
    axis = int(moving[0])

    f_in = float(surface.phi(p_in))
    f_out = float(surface.phi(p_out))
    if f_in > 0.0 or f_out < 0.0 or (f_in == 0.0 and f_out == 0.0):
        raise BracketingError(
            f"segment does not bracket the surface: phi(p_in)={f_in:.3e}, "
            f"phi(p_out)={f_out:.3e}")
    if f_in == 0.0:
        return p_in.copy()
    if f_out == 0.0:
        return p_out.copy()

    lo, hi = 0.0, 1.0
    n_iter = max(1, math.ceil(math.log2(1.0 / tol)))
    q = p_in.copy()
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        q[axis] = p_in[axis] + mid * diff[axis]
        if float(surface.phi(q)) <= 0.0:
            lo = mid
        else:
            hi = mid
    q[axis] = p_in[axis] + 0.5 * (lo + hi) * diff[axis]
    return q
