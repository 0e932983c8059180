"""Catalog of smooth Riemannian metrics on coordinate boxes of R^3.

Every catalog entry is a bundle-type metric

    g = f(x, y)^2 (dx^2 + dy^2) + (a dx + b dy + dt)^2

evaluated in closed form together with its first derivatives.  All
evaluation routines are vectorized over a leading batch shape: points have
shape ``(..., 3)``, metrics ``(..., 3, 3)`` and metric derivatives
``(..., 3, 3, 3)`` with ``dg[..., k, i, j] = d_k g_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import CatalogError, ConditioningError, DomainError

CATALOG = ("euclidean", "h2xr", "e-kappa-tau", "nil3", "smooth-nonanalytic-product")

_DEFAULTS = {
    "euclidean": {},
    "h2xr": {"kappa": -1.0},
    "e-kappa-tau": {"kappa": -1.0, "tau": 0.5},
    "nil3": {"tau": 1.0},
    "smooth-nonanalytic-product": {"amplitude": 0.1, "radius": 0.5},
}

FD_STEP = 1e-4


# ---------------------------------------------------------------------------
# linear algebra helpers (3x3, batched)
# ---------------------------------------------------------------------------

def inverse_sym3(g):
    """Inverse of a batch of symmetric 3x3 matrices by the adjugate formula.

    The result is exactly symmetric, which keeps Christoffel symbols exactly
    symmetric in their lower indices.
    """
    g = np.asarray(g)
    a, b, c = g[..., 0, 0], g[..., 0, 1], g[..., 0, 2]
    d, e = g[..., 1, 1], g[..., 1, 2]
    f = g[..., 2, 2]
    A = d * f - e * e
    B = c * e - b * f
    C = b * e - c * d
    D = a * f - c * c
    E = b * c - a * e
    F = a * d - b * b
    det = a * A + b * B + c * C
    inv = np.empty_like(g, dtype=np.result_type(g, float))
    inv[..., 0, 0] = A
    inv[..., 0, 1] = inv[..., 1, 0] = B
    inv[..., 0, 2] = inv[..., 2, 0] = C
    inv[..., 1, 1] = D
    inv[..., 1, 2] = inv[..., 2, 1] = E
    inv[..., 2, 2] = F
    return inv / det[..., None, None]


def christoffel_from(g, dg, ginv=None):
    """Christoffel symbols ``gamma[..., m, i, j]`` from a metric and its derivatives."""
    if ginv is None:
        ginv = inverse_sym3(g)
    # lowered[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    t1 = np.moveaxis(dg, -1, -3)
    lowered = t1 + np.swapaxes(t1, -1, -2) - dg
    shape = lowered.shape
    out = np.matmul(ginv, lowered.reshape(shape[:-2] + (9,)))
    return 0.5 * out.reshape(shape)


# ---------------------------------------------------------------------------
# closed-form catalog metrics
# ---------------------------------------------------------------------------

def _bundle_metric(p, kappa, tau):
    """lambda^2 (dx^2 + dy^2) + (lambda tau (y dx - x dy) + dt)^2 and derivatives."""
    x, y = p[..., 0], p[..., 1]
    lam = 1.0 / (1.0 + kappa * (x * x + y * y) / 4.0)
    lam_x = -0.5 * kappa * lam * lam * x
    lam_y = -0.5 * kappa * lam * lam * y
    a = tau * lam * y
    b = -tau * lam * x
    a_x, a_y = tau * lam_x * y, tau * (lam_y * y + lam)
    b_x, b_y = -tau * (lam_x * x + lam), -tau * lam_y * x
    lam2 = lam * lam

    g = np.zeros(p.shape[:-1] + (3, 3))
    g[..., 0, 0] = lam2 + a * a
    g[..., 0, 1] = g[..., 1, 0] = a * b
    g[..., 0, 2] = g[..., 2, 0] = a
    g[..., 1, 1] = lam2 + b * b
    g[..., 1, 2] = g[..., 2, 1] = b
    g[..., 2, 2] = 1.0

    dg = np.zeros(p.shape[:-1] + (3, 3, 3))
    for k, (lk, ak, bk) in enumerate(((lam_x, a_x, b_x), (lam_y, a_y, b_y))):
        dg[..., k, 0, 0] = 2.0 * lam * lk + 2.0 * a * ak
        dg[..., k, 0, 1] = dg[..., k, 1, 0] = ak * b + a * bk
        dg[..., k, 0, 2] = dg[..., k, 2, 0] = ak
        dg[..., k, 1, 1] = 2.0 * lam * lk + 2.0 * b * bk
        dg[..., k, 1, 2] = dg[..., k, 2, 1] = bk
    return g, dg


def _bump(r2, amplitude, radius):
    """amplitude * exp(-1/(radius^2 - r^2)) inside the disk, 0 outside, and d/d(r^2)."""
    s = radius * radius - r2
    inside = s > 0
    s_safe = np.where(inside, s, 1.0)
    val = np.where(inside, amplitude * np.exp(-1.0 / s_safe), 0.0)
    # d/d(r^2) exp(-1/s) = -exp(-1/s) / s^2
    dval = np.where(inside, -val / (s_safe * s_safe), 0.0)
    return val, dval


def _product_metric(p, amplitude, radius):
    """(1 + bump(r)) (dx^2 + dy^2) + dt^2 with a C-infinity, non-analytic bump."""
    x, y = p[..., 0], p[..., 1]
    val, dval = _bump(x * x + y * y, amplitude, radius)
    f = 1.0 + val
    g = np.zeros(p.shape[:-1] + (3, 3))
    g[..., 0, 0] = f
    g[..., 1, 1] = f
    g[..., 2, 2] = 1.0
    dg = np.zeros(p.shape[:-1] + (3, 3, 3))
    for k, coord in enumerate((x, y)):
        df = 2.0 * coord * dval
        dg[..., k, 0, 0] = df
        dg[..., k, 1, 1] = df
    return g, dg


def _euclidean_metric(p):
    shape = p.shape[:-1]
    g = np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
    return g, np.zeros(shape + (3, 3, 3))


# ---------------------------------------------------------------------------
# chart object
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifoldChart:
    """A coordinate box carrying a smooth metric.

    ``evaluator`` maps a point batch to ``(g, dg)``.  With
    ``derivative_mode="finite-difference"`` the closed-form derivative is
    ignored and replaced by Richardson-extrapolated central differences.
    """

    name: str
    params: Mapping[str, float]
    box: tuple
    evaluator: Callable = field(repr=False, compare=False)
    derivative_mode: str = "closed-form"
    fd_step: float = FD_STEP

    # -- batch API (no domain checks) -------------------------------------
    def metric(self, points):
        points = np.asarray(points, dtype=float)
        return self.evaluator(points)[0]

    def metric_derivatives(self, points):
        """Return ``(g, dg)`` for a batch of points."""
        points = np.asarray(points, dtype=float)
        if self.derivative_mode == "closed-form":
            return self.evaluator(points)
        return self.metric(points), fd_metric_derivatives(self.metric, points, self.fd_step)

    def christoffel(self, points):
        g, dg = self.metric_derivatives(points)
        return christoffel_from(g, dg)

    def columns(self, x1, x2):
        """Evaluator of ``(g, dg)`` along vertical columns over fixed ``(x1, x2)`` nodes."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)

        def at(x3):
            pts = np.stack(np.broadcast_arrays(x1, x2, np.asarray(x3, dtype=float)), axis=-1)
            return self.metric_derivatives(pts)

        return at

    # -- geometry helpers ---------------------------------------------------
    @property
    def lower(self):
        return np.array([lo for lo, _ in self.box])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.box])

    def contains(self, points, margin=0.0):
        points = np.asarray(points, dtype=float)
        return np.all((points > self.lower + margin) & (points < self.upper - margin), axis=-1)

    def with_derivative_mode(self, mode):
        if mode not in ("closed-form", "finite-difference"):
            raise CatalogError(f"unknown derivative mode {mode!r}")
        return ManifoldChart(self.name, dict(self.params), self.box, self.evaluator, mode, self.fd_step)


def fd_metric_derivatives(metric, points, h=FD_STEP):
    """Central differences of ``metric`` with one Richardson level (steps h, h/2)."""
    points = np.asarray(points, dtype=float)
    dg = np.empty(points.shape[:-1] + (3, 3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0

        def central(step):
            return (metric(points + step * e) - metric(points - step * e)) / (2.0 * step)

        dg[..., k, :, :] = (4.0 * central(0.5 * h) - central(h)) / 3.0
    # symmetrize the (i, j) pair exactly; the two halves agree up to rounding
    return 0.5 * (dg + np.swapaxes(dg, -1, -2))


def _check_params(name, params):
    allowed = _DEFAULTS[name]
    unknown = set(params) - set(allowed)
    if unknown:
        raise CatalogError(f"{name}: unknown parameter(s) {sorted(unknown)}")
    merged = dict(allowed)
    merged.update({k: float(v) for k, v in params.items()})
    return merged


def make_manifold(name, params=None, *, box=None, derivative_mode="closed-form"):
    """Build a catalog chart by string id and a flat parameter map."""
    params = dict(params or {})
    if name not in _DEFAULTS:
        raise CatalogError(f"unknown manifold {name!r}; expected one of {', '.join(CATALOG)}")
    p = _check_params(name, params)

    if name == "euclidean":
        evaluator = _euclidean_metric
        default_box = ((-2.0, 2.0),) * 3
    elif name == "h2xr":
        kappa = p["kappa"]
        if not kappa < 0:
            raise CatalogError(f"h2xr requires kappa < 0, got {kappa}")
        evaluator = lambda q: _bundle_metric(q, kappa, 0.0)  # noqa: E731
        s = 0.8 / np.sqrt(-kappa)
        default_box = ((-s, s), (-s, s), (-0.8, 0.8))
    elif name == "e-kappa-tau":
        kappa, tau = p["kappa"], p["tau"]
        if not kappa < 0:
            raise CatalogError(f"e-kappa-tau requires kappa < 0, got {kappa}")
        if not tau > 0:
            raise CatalogError(f"e-kappa-tau requires tau > 0, got {tau}")
        evaluator = lambda q: _bundle_metric(q, kappa, tau)  # noqa: E731
        s = 0.8 / np.sqrt(-kappa)
        default_box = ((-s, s), (-s, s), (-0.8, 0.8))
    elif name == "nil3":
        tau = p["tau"]
        if not tau > 0:
            raise CatalogError(f"nil3 requires tau > 0, got {tau}")
        evaluator = lambda q: _bundle_metric(q, 0.0, tau)  # noqa: E731
        default_box = ((-2.0, 2.0),) * 3
    else:
        amplitude, radius = p["amplitude"], p["radius"]
        if not amplitude > -np.exp(1.0 / radius**2) or not radius > 0:
            raise CatalogError("smooth-nonanalytic-product: amplitude/radius out of range")
        evaluator = lambda q: _product_metric(q, amplitude, radius)  # noqa: E731
        default_box = ((-2.0, 2.0),) * 3

    box = tuple((float(lo), float(hi)) for lo, hi in (box or default_box))
    if name in ("h2xr", "e-kappa-tau"):
        disk_radius = 2.0 / np.sqrt(-p["kappa"])
        corner = np.hypot(max(abs(box[0][0]), abs(box[0][1])), max(abs(box[1][0]), abs(box[1][1])))
        if not corner < disk_radius:
            raise CatalogError(
                f"{name}: spatial box reaches radius {corner:.4g} >= disk radius {disk_radius:.4g}"
            )
    chart = ManifoldChart(name, p, box, evaluator)
    return chart.with_derivative_mode(derivative_mode)


# ---------------------------------------------------------------------------
# single-point API with validation
# ---------------------------------------------------------------------------

def _point(chart, p, margin=0.0):
    p = np.asarray(p, dtype=float)
    if p.shape != (3,):
        raise ValueError(f"expected a point of shape (3,), got {p.shape}")
    if not chart.contains(p, margin):
        raise DomainError(f"point {p.tolist()} outside box of {chart.name} (margin {margin:g})")
    return p


def metric_at(chart, p):
    """Metric tensor g_ij at a single point of the chart box."""
    return chart.metric(_point(chart, p))


def inverse_metric_at(chart, p):
    g = metric_at(chart, p)
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConditioningError(f"metric condition number {cond:.3e} at {np.asarray(p).tolist()}")
    return inverse_sym3(g)


def christoffel_at(chart, p):
    """Christoffel symbols ``values[m, i, j]`` at a point strictly inside the box."""
    margin = 2.0 * chart.fd_step if chart.derivative_mode == "finite-difference" else 0.0
    p = _point(chart, p, margin)
    return ChristoffelTensor(chart.christoffel(p))


@dataclass(frozen=True)
class ChristoffelTensor:
    values: np.ndarray

    def __getitem__(self, idx):
        return self.values[idx]

    def symmetry_defect(self):
        return float(np.max(np.abs(self.values - np.swapaxes(self.values, -1, -2))))
