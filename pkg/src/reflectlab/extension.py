"""Odd reflection of a graph across the axis ``x2 = 0`` and checks of the glued surface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GlueError, NotAGeodesicBoundaryError
from .grid import GraphFunction, GridSpec
from .minimal import residual_field


@dataclass(frozen=True)
class ExtensionTolerances:
    c0: float = 1e-12
    c1: float = 1e-8
    u22: float = 1e-4
    residual: float = 1e-9


@dataclass(frozen=True)
class ExtensionReport:
    c0_defect: float
    c1_defect: float
    u22_axis: float
    residual_minus: float
    odd_defect: float
    embedded_near_axis: bool
    max_gradient: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def _axis_index(spec):
    """Index of the node row at ``x2 = 0``."""
    j = int(round(-spec.y_lo / spec.hy))
    if not (0 <= j < spec.ny) or abs(spec.y_lo + j * spec.hy) > 1e-12 * max(1.0, abs(spec.y_lo)):
        raise GlueError("the grid has no node row on the axis x2 = 0")
    return j


def odd_reflect(u, tol=1e-12):
    """``v(x1, x2) = -u(x1, -x2)`` on the mirror image of the half grid of ``u``."""
    s = u.spec
    if s.y_lo != 0.0:
        raise GlueError("the half grid must start at x2 = 0")
    axis = np.max(np.abs(u.values[:, 0]))
    if axis > tol:
        raise NotAGeodesicBoundaryError(f"u does not vanish on the axis (max |u| = {axis:.3e})")
    spec = GridSpec(s.nx, s.ny, s.x_lo, s.x_hi, -s.y_hi, 0.0)
    return GraphFunction.from_values(spec, -u.values[:, ::-1])


def glue(u, v):
    """Join ``u`` on x2 >= 0 and ``v`` on x2 <= 0 into one grid; the axis row is stored once."""
    a, b = u.spec, v.spec
    same = (
        a.nx == b.nx and a.ny == b.ny and a.x_lo == b.x_lo and a.x_hi == b.x_hi
        and np.isclose(a.hy, b.hy, rtol=1e-14, atol=0.0)
    )
    if not same:
        raise GlueError("halves must share the x1 nodes and the x2 spacing")
    if a.y_lo != 0.0 or b.y_hi != 0.0:
        raise GlueError("expected u on x2 >= 0 and v on x2 <= 0")
    mismatch = np.max(np.abs(u.values[:, 0] - v.values[:, -1]))
    if mismatch > 1e-12:
        raise GlueError(f"axis rows disagree by {mismatch:.3e}")
    values = np.concatenate([v.values[:, :-1], u.values], axis=1)
    spec = GridSpec(a.nx, 2 * a.ny - 1, a.x_lo, a.x_hi, b.y_lo, a.y_hi)
    return GraphFunction.from_values(spec, values)


def one_sided_u22(values, j, h, direction):
    """Second-order one-sided second derivative in x2 at row ``j`` (4-point stencil)."""
    d = direction
    w0, w1, w2, w3 = (values[:, j + d * k] for k in range(4))
    return (2.0 * w0 - 5.0 * w1 + 4.0 * w2 - w3) / h**2


def one_sided_u2(values, j, h, direction):
    d = direction
    w0, w1, w2 = (values[:, j + d * k] for k in range(3))
    return d * (-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * h)


def verify_extension(chart, w, tolerances=None):
    """C0/C1 matching, the axis value of u22, and the residual on the reflected half."""
    tol = tolerances or ExtensionTolerances()
    s = w.spec
    j = _axis_index(s)
    if j < 3 or s.ny - 1 - j < 3:
        raise GlueError("need at least three rows on each side of the axis")
    vals = w.values
    h = s.hy
    inner = slice(1, -1)
    c0 = float(np.max(np.abs(vals[:, j])))
    c1 = float(np.max(np.abs(one_sided_u2(vals, j, h, 1) - one_sided_u2(vals, j, h, -1))[inner]))
    u22 = float(
        max(
            np.max(np.abs(one_sided_u22(vals, j, h, 1)[inner])),
            np.max(np.abs(one_sided_u22(vals, j, h, -1)[inner])),
        )
    )
    res = residual_field(chart, w)  # interior rows 1..ny-2 map to columns 0..ny-3
    minus = res[:, : j - 1]
    residual_minus = float(np.max(np.abs(minus))) if minus.size else 0.0
    k = np.arange(min(j, s.ny - 1 - j) + 1)
    odd = float(np.max(np.abs(vals[:, j - k] + vals[:, j + k])))
    gx, gy = w.gradient()
    max_grad = float(np.max(np.hypot(gx, gy)))
    embedded = bool(np.isfinite(max_grad))
    passed = (
        c0 <= tol.c0 and c1 <= tol.c1 and u22 <= tol.u22 and residual_minus <= tol.residual and embedded
    )
    return ExtensionReport(c0, c1, u22, residual_minus, odd, embedded, max_grad, bool(passed))
