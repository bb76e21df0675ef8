"""Gridded aerodynamic coefficient surfaces.

The rotor power coefficient Cp(lambda, theta) and thrust coefficient
CT(lambda, theta) are stored as samples on a rectangular grid of
tip-speed ratio (lambda) and blade pitch angle (theta, rad) and
evaluated by bilinear interpolation (affine per axis within each grid
cell).  Queries outside the grid clamp to the boundary; derivative
queries on a cell edge use the cell toward larger lambda / larger theta.

The bundled default surface samples a widely used analytic power
coefficient model (see `default_surface`) so that the package ships a
self-contained, qualitatively correct map without any proprietary
turbine data.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SurfaceError",
    "CoefficientSurface",
    "eval_cp",
    "eval_ct",
    "partial_cp",
    "partial_ct",
    "cp_opt",
    "optimal_point",
    "default_surface",
    "load_surface",
    "save_surface",
]


class SurfaceError(ValueError):
    """Raised when a coefficient surface violates its construction invariants."""


def _validate_grid(grid, name):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise SurfaceError(f"{name} must be a 1-D sequence with at least 2 points")
    if not np.all(np.isfinite(g)):
        raise SurfaceError(f"{name} contains non-finite values")
    if not np.all(np.diff(g) > 0.0):
        raise SurfaceError(f"{name} must be strictly increasing")
    return g


def _make_bilinear(lam, th, values):
    """Build fast scalar evaluation/gradient closures over one value grid.

    Cell selection uses bisect_right, so a query exactly on an interior
    grid line resolves to the cell toward larger coordinates; this is the
    documented derivative tie-break and is value-continuous for eval.
    """
    lam_l = [float(v) for v in lam]
    th_l = [float(v) for v in th]
    rows = [[float(v) for v in row] for row in values]
    nl, nt = len(lam_l), len(th_l)
    lam0, lam1 = lam_l[0], lam_l[-1]
    th0, th1 = th_l[0], th_l[-1]
    inv_dl = [1.0 / (lam_l[i + 1] - lam_l[i]) for i in range(nl - 1)]
    inv_dt = [1.0 / (th_l[j + 1] - th_l[j]) for j in range(nt - 1)]

    def locate(x, y):
        # cell indices plus exact parametric coordinates: t and s are 0 at
        # the low cell edge and exactly 1.0 on the clamped high boundary,
        # so node queries reproduce stored samples bit-exactly
        if x <= lam0:
            i, t = 0, 0.0
        elif x >= lam1:
            i, t = nl - 2, 1.0
        else:
            i = bisect_right(lam_l, x) - 1
            if i > nl - 2:
                i = nl - 2
            t = (x - lam_l[i]) * inv_dl[i]
        if y <= th0:
            j, s = 0, 0.0
        elif y >= th1:
            j, s = nt - 2, 1.0
        else:
            j = bisect_right(th_l, y) - 1
            if j > nt - 2:
                j = nt - 2
            s = (y - th_l[j]) * inv_dt[j]
        return i, j, t, s

    def ev(x, y):
        i, j, t, s = locate(x, y)
        r0 = rows[i]
        r1 = rows[i + 1]
        f00 = r0[j]
        f01 = r0[j + 1]
        f10 = r1[j]
        f11 = r1[j + 1]
        return (1.0 - t) * ((1.0 - s) * f00 + s * f01) + t * ((1.0 - s) * f10 + s * f11)

    def grad(x, y):
        i, j, t, s = locate(x, y)
        r0 = rows[i]
        r1 = rows[i + 1]
        f00 = r0[j]
        f01 = r0[j + 1]
        f10 = r1[j]
        f11 = r1[j + 1]
        dfl = ((1.0 - s) * (f10 - f00) + s * (f11 - f01)) * inv_dl[i]
        dft = ((1.0 - t) * (f01 - f00) + t * (f11 - f10)) * inv_dt[j]
        return dfl, dft

    return ev, grad


@dataclass(frozen=True)
class CoefficientSurface:
    """Immutable Cp/CT sample grids with bilinear evaluation.

    Attributes
    ----------
    lambda_grid : (nl,) strictly increasing tip-speed ratios.
    theta_grid : (nt,) strictly increasing pitch angles, rad.
    cp_values : (nl, nt) power coefficient samples in [0, 1].
    ct_values : (nl, nt) thrust coefficient samples, >= 0.
    """

    lambda_grid: np.ndarray
    theta_grid: np.ndarray
    cp_values: np.ndarray
    ct_values: np.ndarray
    _fast: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lam = _validate_grid(self.lambda_grid, "lambda_grid")
        th = _validate_grid(self.theta_grid, "theta_grid")
        cp = np.asarray(self.cp_values, dtype=float)
        ct = np.asarray(self.ct_values, dtype=float)
        shape = (lam.size, th.size)
        if cp.shape != shape:
            raise SurfaceError(f"cp_values shape {cp.shape} != grid shape {shape}")
        if ct.shape != shape:
            raise SurfaceError(f"ct_values shape {ct.shape} != grid shape {shape}")
        if not np.all(np.isfinite(cp)) or not np.all(np.isfinite(ct)):
            raise SurfaceError("coefficient samples contain non-finite values")
        if cp.min() < 0.0 or cp.max() > 1.0:
            raise SurfaceError("cp_values must lie in [0, 1]")
        if ct.min() < 0.0:
            raise SurfaceError("ct_values must be non-negative")
        lam.setflags(write=False)
        th.setflags(write=False)
        cp.setflags(write=False)
        ct.setflags(write=False)
        object.__setattr__(self, "lambda_grid", lam)
        object.__setattr__(self, "theta_grid", th)
        object.__setattr__(self, "cp_values", cp)
        object.__setattr__(self, "ct_values", ct)
        cp_ev, cp_gr = _make_bilinear(lam, th, cp)
        ct_ev, ct_gr = _make_bilinear(lam, th, ct)
        self._fast.update(
            cp=cp_ev, cp_grad=cp_gr, ct=ct_ev, ct_grad=ct_gr,
            cp_opt=float(cp.max()),
        )

    @property
    def lambda_bounds(self):
        return float(self.lambda_grid[0]), float(self.lambda_grid[-1])

    @property
    def theta_bounds(self):
        return float(self.theta_grid[0]), float(self.theta_grid[-1])


def eval_cp(surface, lam, theta):
    """Power coefficient at (lambda, theta), clamped to the grid box."""
    return surface._fast["cp"](float(lam), float(theta))


def eval_ct(surface, lam, theta):
    """Thrust coefficient at (lambda, theta), clamped to the grid box."""
    return surface._fast["ct"](float(lam), float(theta))


def partial_cp(surface, lam, theta):
    """Gradient (dCp/dlambda, dCp/dtheta) of the interpolant.

    On cell edges the cell toward larger lambda and larger theta is used.
    """
    return surface._fast["cp_grad"](float(lam), float(theta))


def partial_ct(surface, lam, theta):
    """Gradient (dCT/dlambda, dCT/dtheta) of the interpolant."""
    return surface._fast["ct_grad"](float(lam), float(theta))


def cp_opt(surface):
    """Maximum power coefficient over the surface.

    The bilinear interpolant is affine along each axis, so its maximum
    over any cell is attained at a corner; the grid-node maximum is the
    global maximum of the interpolant.
    """
    return surface._fast["cp_opt"]


def optimal_point(surface):
    """(lambda, theta, cp) of the grid node attaining the Cp maximum."""
    i, j = np.unravel_index(int(np.argmax(surface.cp_values)), surface.cp_values.shape)
    return (
        float(surface.lambda_grid[i]),
        float(surface.theta_grid[j]),
        float(surface.cp_values[i, j]),
    )


# Analytic default surface.  Power coefficient from the classic
# exponential approximation (Heier-family constants, pitch in degrees
# inside the formula):
#
#   cp = c1*(c2/li - c3*th_deg - c4)*exp(-c5/li) + c6*lambda
#   1/li = 1/(lambda + 0.08*th_deg) - 0.035/(th_deg^3 + 1)
#
# clipped to [0, 1].  The thrust coefficient is derived from actuator-disc
# momentum theory: solve 4 a (1-a)^2 = cp for the induction factor
# a in [0, 1/3], then ct = 4 a (1-a), clipped to [0, 1.2].
_CP_CONST = (0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068)


def _analytic_cp(lam, th_deg):
    c1, c2, c3, c4, c5, c6 = _CP_CONST
    inv_li = 1.0 / (lam + 0.08 * th_deg) - 0.035 / (th_deg ** 3 + 1.0)
    if inv_li < 1e-9:
        inv_li = 1e-9
    val = c1 * (c2 * inv_li - c3 * th_deg - c4) * math.exp(-c5 * inv_li) + c6 * lam
    return min(max(val, 0.0), 1.0)


def _ct_from_cp(cp):
    # invert 4a(1-a)^2 = cp on [0, 1/3] (monotone there, max 16/27 > any cp here)
    if cp <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0 / 3.0
    for _ in range(60):
        a = 0.5 * (lo + hi)
        if 4.0 * a * (1.0 - a) ** 2 < cp:
            lo = a
        else:
            hi = a
    a = 0.5 * (lo + hi)
    return min(4.0 * a * (1.0 - a), 1.2)


def default_surface(n_lambda=40, n_theta=40):
    """Sample the analytic Cp/CT model onto the default grid.

    Grid: lambda in [1, 15], theta in [0, 30 deg] (stored in radians).
    """
    lam = np.linspace(1.0, 15.0, n_lambda)
    th = np.linspace(0.0, math.radians(30.0), n_theta)
    cp = np.empty((n_lambda, n_theta))
    ct = np.empty((n_lambda, n_theta))
    for i, lv in enumerate(lam):
        for j, tv in enumerate(th):
            c = _analytic_cp(float(lv), math.degrees(float(tv)))
            cp[i, j] = c
            ct[i, j] = _ct_from_cp(c)
    return CoefficientSurface(lam, th, cp, ct)


_HEADER0 = "lambda\\theta"


def _write_grid_csv(path, lam, th, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([_HEADER0] + [f"{v:.17g}" for v in th])
        for i, lv in enumerate(lam):
            w.writerow([f"{lv:.17g}"] + [f"{v:.17g}" for v in values[i]])


def _read_grid_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != _HEADER0:
        raise SurfaceError(f"{path}: missing '{_HEADER0}' header row")
    try:
        th = np.array([float(v) for v in rows[0][1:]])
        lam = np.array([float(r[0]) for r in rows[1:]])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise SurfaceError(f"{path}: malformed numeric data ({exc})") from exc
    if values.ndim != 2 or values.shape != (lam.size, th.size):
        raise SurfaceError(f"{path}: ragged rows or shape mismatch")
    return lam, th, values


def save_surface(surface, cp_path, ct_path):
    """Write the surface as two CSV grids (Cp and CT) of identical shape."""
    _write_grid_csv(cp_path, surface.lambda_grid, surface.theta_grid, surface.cp_values)
    _write_grid_csv(ct_path, surface.lambda_grid, surface.theta_grid, surface.ct_values)


def load_surface(cp_path, ct_path):
    """Load and validate a surface from its two CSV grid files."""
    lam, th, cp = _read_grid_csv(cp_path)
    lam2, th2, ct = _read_grid_csv(ct_path)
    if lam2.shape != lam.shape or th2.shape != th.shape \
            or not np.array_equal(lam2, lam) or not np.array_equal(th2, th):
        raise SurfaceError("cp and ct files have different grids")
    return CoefficientSurface(lam, th, cp, ct)
