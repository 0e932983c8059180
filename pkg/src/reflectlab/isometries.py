"""Closed-form isometries of the catalog metrics and reflections about geodesics.

Complex notation: a point is ``(z, t)`` with ``z = x + i y``.  Disk isometries
of the bundle metrics with ``kappa < 0`` are Moebius maps of the disk of
radius ``R = 2 / sqrt(-kappa)``

    f(z) = e^{i alpha} (z - a) / (1 - conj(a) z / R^2),    |a| < R,

and the vertical shift uses the continuous lift of ``arg f'(z)`` normalized
to vanish at ``z = 0`` (the constant goes into ``c``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CatalogError, UnsupportedGeodesicError
from .geodesics import flow

JACOBIAN_STEP = 1e-5


@dataclass(frozen=True)
class IsometryMap:
    """A point map with metadata; ``apply`` is batched over leading axes."""

    kind: str
    params: dict
    apply: Callable = field(repr=False, compare=False)
    reflection: bool = False
    fixed_points: Callable | None = field(default=None, repr=False, compare=False)

    def __call__(self, p):
        return self.apply(np.asarray(p, dtype=float))

    def then(self, other):
        """Composition ``other o self``."""
        return IsometryMap(
            f"{other.kind}*{self.kind}",
            {"first": self.params, "second": other.params},
            lambda p: other.apply(self.apply(p)),
        )


def _split(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0] + 1j * p[..., 1], p[..., 2]


def _join(z, t):
    return np.stack([z.real, z.imag, np.broadcast_to(t, z.shape)], axis=-1)


# ---------------------------------------------------------------------------
# E(kappa, tau) families
# ---------------------------------------------------------------------------

def _disk_radius(kappa):
    if not kappa < 0:
        raise CatalogError(f"kappa must be negative, got {kappa}")
    return 2.0 / np.sqrt(-kappa)


def isometry_e_kappa_tau(kind, kappa, tau, alpha=0.0, a=0.0, c=0.0):
    """F-type ``(f(z), t + (2 tau / kappa) arg f'(z) + c)`` or
    G-type ``(g(z), -t - (2 tau / kappa) arg d(conj g)/dz + c)`` with ``g(z) = f(conj z)``.

    ``tau = 0`` gives the isometries of the product H^2 x R.
    """
    R = _disk_radius(kappa)
    a = complex(a)
    if not abs(a) < R:
        raise CatalogError(f"Moebius centre {a} does not lie in the disk of radius {R:g}")
    if tau < 0:
        raise CatalogError(f"tau must be nonnegative, got {tau}")
    k = 2.0 * tau / kappa
    rot = np.exp(1j * alpha)
    R2 = R * R

    def mob(z, a_, rot_):
        return rot_ * (z - a_) / (1.0 - np.conj(a_) * z / R2)

    if kind == "F":
        def apply(p):
            z, t = _split(p)
            shift = -2.0 * np.angle(1.0 - np.conj(a) * z / R2)
            return _join(mob(z, a, rot), t + k * shift + c)
    elif kind == "G":
        def apply(p):
            z, t = _split(p)
            # conj(g)(z) = e^{-i alpha} (z - conj a) / (1 - a z / R^2)
            shift = -2.0 * np.angle(1.0 - a * z / R2)
            return _join(mob(np.conj(z), a, rot), -t - k * shift + c)
    else:
        raise CatalogError(f"kind must be 'F' or 'G', got {kind!r}")
    params = {"kappa": kappa, "tau": tau, "alpha": alpha, "a": [a.real, a.imag], "c": c}
    return IsometryMap(f"ekt-{kind}", params, apply)


def isometry_nil3(kind, tau, theta=0.0, a=0.0, b=0.0, c=0.0):
    """F-type ``(e^{i theta} z + w, t + tau Im(conj(w) e^{i theta} z) + c)`` or
    G-type ``(e^{i theta} conj(z) + w, -t - tau Im(w e^{-i theta} z) + c)`` with ``w = a + i b``.
    """
    if not tau > 0:
        raise CatalogError(f"tau must be positive, got {tau}")
    w = complex(a, b)
    rot = np.exp(1j * theta)
    if kind == "F":
        def apply(p):
            z, t = _split(p)
            return _join(rot * z + w, t + tau * np.imag(np.conj(w) * rot * z) + c)
    elif kind == "G":
        def apply(p):
            z, t = _split(p)
            return _join(rot * np.conj(z) + w, -t - tau * np.imag(w * np.conj(rot) * z) + c)
    else:
        raise CatalogError(f"kind must be 'F' or 'G', got {kind!r}")
    return IsometryMap(f"nil3-{kind}", {"tau": tau, "theta": theta, "a": a, "b": b, "c": c}, apply)


# ---------------------------------------------------------------------------
# geodesic specifications and reflections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicSpec:
    """A geodesic named by a point and type.

    ``vertical``: the fibre line over ``(x0, y0)``.  ``horizontal``: the
    geodesic through ``(x0, y0, t0)`` whose horizontal direction has angle
    ``theta``.  ``fermi``: the axis of the given Fermi chart.
    """

    kind: str
    point: tuple = (0.0, 0.0, 0.0)
    theta: float = 0.0
    fermi: object = field(default=None, repr=False, compare=False)


def initial_data(chart, spec):
    """Base point and g-unit tangent of the geodesic named by ``spec``."""
    p = np.asarray(spec.point, dtype=float)
    g = chart.metric(p)
    if spec.kind == "vertical":
        v = np.array([0.0, 0.0, 1.0])
        if chart.name == "euclidean" or chart.name == "smooth-nonanalytic-product":
            return p, v
        # the fibre direction d/dt has unit length for every bundle metric
        return p, v
    if spec.kind == "horizontal":
        c, s = np.cos(spec.theta), np.sin(spec.theta)
        # horizontal: the connection form a dx + b dy + dt vanishes
        v = np.array([c, s, -(g[0, 2] * c + g[1, 2] * s)])
        return p, v / np.sqrt(v @ g @ v)
    if spec.kind == "fermi":
        f = spec.fermi
        return f.origin, f.tangent
    raise UnsupportedGeodesicError(f"unknown geodesic kind {spec.kind!r}")


def geodesic_points(chart, spec, n=25, length=None, steps=64):
    """Points on the geodesic named by ``spec`` (within ``length`` of the base point)."""
    p, v = initial_data(chart, spec)
    if length is None:
        span = np.min(chart.upper - chart.lower)
        length = 0.25 * span
    s = np.linspace(-length, length, n)
    if spec.kind == "vertical":
        return p + s[:, None] * v
    if chart.name in ("euclidean", "smooth-nonanalytic-product") and spec.kind == "horizontal":
        return p + s[:, None] * v
    return flow(chart, p, v, s, steps)[0]


def _line_rotation(p, d):
    """Euclidean rotation by pi about the line p + s d."""
    p = np.asarray(p, float)
    d = np.asarray(d, float) / np.linalg.norm(d)

    def apply(x):
        r = x - p
        return 2.0 * (p + np.einsum("...i,i->...", r, d)[..., None] * d) - x

    return apply


def _heisenberg_translation(tau, z0, t0):
    """Left translation of Nil3 taking the origin to (z0, t0), and its inverse."""
    fwd = isometry_nil3("F", tau, 0.0, z0.real, z0.imag, t0)
    inv = isometry_nil3("F", tau, 0.0, -z0.real, -z0.imag, -t0)
    return fwd, inv


def _disk_recentre(kappa, tau, z0):
    """F-type isometry moving z0 to 0 with positive derivative there, and its inverse."""
    H = isometry_e_kappa_tau("F", kappa, tau, 0.0, z0, 0.0)
    Hinv = isometry_e_kappa_tau("F", kappa, tau, 0.0, -z0, 0.0)
    return H, Hinv


def _conjugate(inner, outer, outer_inv):
    return lambda p: outer_inv.apply(inner.apply(outer.apply(p)))


def reflection_for(chart, spec):
    """Reflection isometry about the geodesic named by ``spec``."""
    name = chart.name
    x0, y0, t0 = (float(v) for v in spec.point)
    z0 = complex(x0, y0)
    params = {"geodesic": spec.kind, "point": [x0, y0, t0], "theta": spec.theta}

    def done(apply, kind):
        return IsometryMap(
            kind, params, apply, reflection=True,
            fixed_points=lambda n=25: geodesic_points(chart, spec, n),
        )

    if spec.kind == "fermi":
        return fermi_reflection(spec.fermi)
    if spec.kind not in ("vertical", "horizontal"):
        raise UnsupportedGeodesicError(f"unknown geodesic kind {spec.kind!r}")

    if name == "euclidean":
        _, v = initial_data(chart, spec)
        return done(_line_rotation(spec.point, v), "line-rotation")

    if name == "smooth-nonanalytic-product":
        if spec.kind == "vertical":
            if z0 != 0:
                raise UnsupportedGeodesicError(
                    "the product entry is only rotationally symmetric about the axis over the origin"
                )
            return done(lambda p: p * np.array([-1.0, -1.0, 1.0]), "product-rotation")
        if z0 != 0:
            raise UnsupportedGeodesicError(
                "horizontal reflections of the product entry must pass over the origin"
            )
        c2, s2 = np.cos(2 * spec.theta), np.sin(2 * spec.theta)

        def apply(p):
            x, y, t = p[..., 0], p[..., 1], p[..., 2]
            return np.stack([c2 * x + s2 * y, s2 * x - c2 * y, 2.0 * t0 - t], axis=-1)

        return done(apply, "product-line-reflection")

    if name == "nil3":
        tau = chart.params["tau"]
        L, Linv = _heisenberg_translation(tau, z0, t0)
        if spec.kind == "vertical":
            inner = isometry_nil3("F", tau, np.pi, 0.0, 0.0, 0.0)
        else:
            inner = isometry_nil3("G", tau, 2.0 * spec.theta, 0.0, 0.0, 0.0)
        return done(_conjugate(inner, Linv, L), f"nil3-{spec.kind}-reflection")

    if name in ("h2xr", "e-kappa-tau"):
        kappa = chart.params["kappa"]
        tau = chart.params.get("tau", 0.0)
        H, Hinv = _disk_recentre(kappa, tau, z0)
        if spec.kind == "vertical":
            inner = isometry_e_kappa_tau("F", kappa, tau, np.pi, 0.0, 0.0)
        else:
            inner = isometry_e_kappa_tau("G", kappa, tau, 2.0 * spec.theta, 0.0, 2.0 * t0)
        return done(_conjugate(inner, H, Hinv), f"{name}-{spec.kind}-reflection")

    raise UnsupportedGeodesicError(f"no closed-form reflection for {name}")


def fermi_reflection(fermi):
    """Ambient reflection ``G o (x1, -x2, -x3) o G^{-1}`` realized through a Fermi chart."""

    def apply(p):
        x = fermi.invert(p)
        return fermi.embed_exact(fermi.reflect(x))

    def axis(n=25):
        s = np.linspace(-0.8 * fermi.eps, 0.8 * fermi.eps, n)
        return fermi.embed_exact(np.stack([s, 0 * s, 0 * s], axis=-1))

    return IsometryMap("fermi-reflection", {"eps": fermi.eps}, apply, reflection=True, fixed_points=axis)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IsometryReport:
    kind: str
    samples: int
    tol: float
    pullback_defect: float
    involution_defect: float | None
    fixed_point_defect: float | None
    min_jacobian_det: float
    orientation_preserving: bool
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def jacobian(apply, p, h=JACOBIAN_STEP):
    """Central-difference Jacobian ``J[..., i, k] = d apply_i / d p_k``."""
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        cols.append((apply(p + e) - apply(p - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def sample_domain(chart, iso, samples, seed=0, shrink=0.9, margin=1e-3):
    """Uniform box points whose image also lies in the box (the domain U of the map)."""
    rng = np.random.default_rng(seed)
    lo, hi = chart.lower, chart.upper
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) * shrink
    out = []
    count = 0
    for _ in range(200):
        cand = rng.uniform(centre - half, centre + half, (4 * samples, 3))
        img = iso(cand)
        ok = chart.contains(cand, margin) & chart.contains(img, margin)
        out.append(cand[ok])
        count += int(ok.sum())
        if count >= samples:
            break
    pts = np.concatenate(out)[:samples]
    if len(pts) < samples:
        raise UnsupportedGeodesicError("map image leaves the chart box almost everywhere")
    return pts


def verify_isometry(chart, iso, samples=100, tol=1e-8, seed=0):
    """Pullback, involution, fixed-point and orientation checks of ``iso`` on ``chart``."""
    if samples < 10:
        raise ValueError("at least 10 samples are required")
    pts = sample_domain(chart, iso, samples, seed)
    J = jacobian(iso, pts)
    pulled = np.einsum("...ki,...kl,...lj->...ij", J, chart.metric(iso(pts)), J)
    pullback = float(np.max(np.abs(pulled - chart.metric(pts))))
    det = np.linalg.det(J)
    inv = fix = None
    ok = pullback <= tol and bool(np.all(det > 0))
    if iso.reflection:
        inv = float(np.max(np.abs(iso(iso(pts)) - pts)))
        ok = ok and inv <= tol
        if iso.fixed_points is not None:
            q = iso.fixed_points()
            q = q[chart.contains(q)]
            fix = float(np.max(np.abs(iso(q) - q))) if len(q) else 0.0
            ok = ok and fix <= tol
    return IsometryReport(
        kind=iso.kind,
        samples=int(samples),
        tol=float(tol),
        pullback_defect=pullback,
        involution_defect=inv,
        fixed_point_defect=fix,
        min_jacobian_det=float(det.min()),
        orientation_preserving=bool(np.all(det > 0)),
        passed=bool(ok),
    )


def catalog_reflections(chart):
    """The standard vertical and horizontal reflection specs exercised for a catalog chart."""
    name = chart.name
    if name in ("euclidean", "nil3"):
        return [GeodesicSpec("vertical", (0.3, -0.2, 0.0)), GeodesicSpec("horizontal", (0.2, 0.1, 0.1), 0.7)]
    if name in ("h2xr", "e-kappa-tau"):
        s = 0.5 / np.sqrt(-chart.params["kappa"])
        return [GeodesicSpec("vertical", (0.6 * s, -0.2 * s, 0.0)), GeodesicSpec("horizontal", (0.2 * s, 0.3 * s, 0.1), 0.7)]
    if name == "smooth-nonanalytic-product":
        return [GeodesicSpec("vertical", (0.0, 0.0, 0.0)), GeodesicSpec("horizontal", (0.0, 0.0, 0.2), 0.7)]
    raise UnsupportedGeodesicError(f"no catalog reflections for {name}")
