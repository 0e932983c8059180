"""Fermi coordinates along a geodesic and their pulled-back metric.

For a unit-speed geodesic gamma through ``p`` with a parallel unit normal
``nu`` the chart is

    F(x1, x2) = exp_{gamma(x1)}(x2 nu(x1)),
    G(x1, x2, x3) = exp_{F(x1, x2)}(x3 eta(x1, x2)),

with ``eta`` the unit normal of the surface ``F``.  The pulled-back metric
``DG^T g(G) DG`` is sampled at tensor Chebyshev nodes on ``[-eps, eps]^3``
and represented by its interpolating polynomial, which supplies smooth
derivatives for Christoffel symbols.  Nodes are mirrored exactly about 0, so
any reflection symmetry ``(x1, x2, x3) -> (x1, -x2, -x3)`` of the sampled
data is inherited by the interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FermiChartError, GeodesicExitError
from .geodesics import GeodesicArc, flow, geodesic_arc, norm_g
from .metrics import christoffel_from, inverse_sym3

DEFAULT_EPS = {"euclidean": 0.3, "nil3": 0.3, "h2xr": 0.2, "e-kappa-tau": 0.2}
SURFACE_FD = 1e-3
EMBED_FD = 2e-3

# component order for symmetric 3x3 storage
_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def chebyshev_nodes(n, eps):
    """First-kind Chebyshev nodes on [-eps, eps], ascending and exactly mirrored."""
    half = np.cos(np.pi * (np.arange(n // 2) + 0.5) / n)
    nodes = np.zeros(n)
    nodes[: n // 2] = -half
    nodes[n - n // 2 :] = half[::-1]
    return eps * nodes


def chebyshev_basis(t, n):
    """T_j(t) and T_j'(t) for j < n by recurrence; returns arrays of shape ``t.shape + (n,)``."""
    t = np.asarray(t, dtype=float)
    T = np.empty(t.shape + (n,))
    dT = np.empty(t.shape + (n,))
    T[..., 0] = 1.0
    dT[..., 0] = 0.0
    if n > 1:
        T[..., 1] = t
        dT[..., 1] = 1.0
    for j in range(1, n - 1):
        T[..., j + 1] = 2.0 * t * T[..., j] - T[..., j - 1]
        dT[..., j + 1] = 2.0 * T[..., j] + 2.0 * t * dT[..., j] - dT[..., j - 1]
    return T, dT


def _sym_pack(g):
    return np.stack([g[..., i, j] for i, j in _PAIRS], axis=-1)


def _sym_unpack(c):
    g = np.empty(c.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(_PAIRS):
        g[..., i, j] = c[..., k]
        g[..., j, i] = c[..., k]
    return g


def _richardson(f, h):
    """Central difference of ``f(step)`` (returning f(+step) - f(-step)) with one Richardson level."""
    d1 = f(h) / (2.0 * h)
    d2 = f(0.5 * h) / h
    return (4.0 * d2 - d1) / 3.0


@dataclass(frozen=True)
class FermiChart:
    """Fermi coordinates ``(x1, x2, x3) in (-eps, eps)^3`` about a geodesic of ``ambient``."""

    ambient: object
    base: GeodesicArc
    origin: np.ndarray
    tangent: np.ndarray
    seed: np.ndarray
    eps: float
    res: int
    steps: int
    nodes: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    embed_coeffs: np.ndarray = field(repr=False)

    # -- chart-like interface used by the solver ---------------------------
    @property
    def name(self):
        return f"fermi[{self.ambient.name}]"

    @property
    def box(self):
        return ((-self.eps, self.eps),) * 3

    @property
    def lower(self):
        return np.full(3, -self.eps)

    @property
    def upper(self):
        return np.full(3, self.eps)

    def contains(self, points, margin=0.0):
        points = np.asarray(points, dtype=float)
        return np.all(np.abs(points) < self.eps - margin, axis=-1)

    # -- exact construction --------------------------------------------------
    def base_frame(self, x1):
        """gamma(x1), gamma'(x1), nu(x1) by integration from the origin point."""
        x1 = np.asarray(x1, dtype=float)
        p, v, (nu,) = flow(self.ambient, self.origin, self.tangent, x1, self.steps, (self.seed,))
        return p, v, nu

    def _surface_point(self, x1, x2):
        uniq, inv = np.unique(x1, return_inverse=True)
        b, _, nu = self.base_frame(uniq)
        b = b[inv].reshape(np.shape(x1) + (3,))
        nu = nu[inv].reshape(np.shape(x1) + (3,))
        q, dq, _ = flow(self.ambient, b, nu, x2, self.steps)
        return q, dq

    def surface(self, x1, x2):
        """F, dF/dx1, dF/dx2 at (x1, x2); dF/dx1 by Richardson central differences."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        q, d2 = self._surface_point(x1, x2)
        d1 = _richardson(
            lambda s: self._surface_point(x1 + s, x2)[0] - self._surface_point(x1 - s, x2)[0], SURFACE_FD
        )
        return q, d1, d2

    def surface_frame(self, x1, x2):
        """F and the unit normal eta, oriented so that det(F_1, F_2, eta) > 0."""
        q, d1, d2 = self.surface(x1, x2)
        c = np.cross(d1, d2)
        ginv = inverse_sym3(self.ambient.metric(q))
        eta = np.einsum("...ij,...j->...i", ginv, c)
        eta = eta / np.sqrt(np.einsum("...i,...i->...", c, eta))[..., None]
        return q, eta

    def embed_exact(self, x):
        """G(x) by geodesic integration (batched over leading axes)."""
        x = np.asarray(x, dtype=float)
        q, eta = self.surface_frame(x[..., 0], x[..., 1])
        return flow(self.ambient, q, eta, x[..., 2], self.steps)[0]

    def embed_jacobian(self, x):
        """G(x) and DG(x) with ``DG[..., :, k] = dG/dx_k``."""
        x = np.asarray(x, dtype=float)
        q, eta = self.surface_frame(x[..., 0], x[..., 1])
        G, d3, _ = flow(self.ambient, q, eta, x[..., 2], self.steps)
        cols = []
        for k in (0, 1):
            e = np.zeros(3)
            e[k] = 1.0
            cols.append(_richardson(lambda s: self.embed_exact(x + s * e) - self.embed_exact(x - s * e), EMBED_FD))
        cols.append(d3)
        return G, np.stack(cols, axis=-1)

    def pulled_metric_exact(self, x):
        G, DG = self.embed_jacobian(x)
        g = self.ambient.metric(G)
        pm = np.einsum("...ki,...kl,...lj->...ij", DG, g, DG)
        return 0.5 * (pm + np.swapaxes(pm, -1, -2))

    # -- interpolated representation ----------------------------------------
    def _basis(self, x):
        return chebyshev_basis(np.asarray(x, float) / self.eps, self.res)

    def pulled_metric(self, x):
        """Interpolated pulled-back metric at points ``x`` of shape (..., 3)."""
        return self.metric(x)

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        T = [self._basis(x[..., k])[0] for k in range(3)]
        c = np.einsum("...j,jklc->...klc", T[0], self.coeffs)
        c = np.einsum("...k,...klc->...lc", T[1], c)
        return _sym_unpack(np.einsum("...l,...lc->...c", T[2], c))

    def metric_derivatives(self, x):
        x = np.asarray(x, dtype=float)
        B = [self._basis(x[..., k]) for k in range(3)]
        scale = 1.0 / self.eps
        out = []
        for mask in ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)):
            b = [B[k][mask[k]] for k in range(3)]
            c = np.einsum("...j,jklc->...klc", b[0], self.coeffs)
            c = np.einsum("...k,...klc->...lc", b[1], c)
            out.append(np.einsum("...l,...lc->...c", b[2], c))
        g = _sym_unpack(out[0])
        dg = np.stack([_sym_unpack(o) * scale for o in out[1:]], axis=-3)
        return g, dg

    def christoffel(self, x):
        g, dg = self.metric_derivatives(x)
        return christoffel_from(g, dg)

    def columns(self, x1, x2):
        """Fast ``x3 -> (g, dg)`` evaluator over fixed (x1, x2) nodes (arrays of equal shape)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        T1, dT1 = self._basis(x1)
        T2, dT2 = self._basis(x2)
        scale = 1.0 / self.eps

        def contract(a, b):
            c = np.einsum("...j,jklc->...klc", a, self.coeffs)
            return np.einsum("...k,...klc->...lc", b, c)

        c0 = contract(T1, T2)
        c1 = contract(dT1, T2) * scale
        c2 = contract(T1, dT2) * scale

        def at(x3):
            T3, dT3 = self._basis(np.broadcast_to(np.asarray(x3, float), x1.shape))
            g = _sym_unpack(np.einsum("...l,...lc->...c", T3, c0))
            dg = np.stack(
                [
                    _sym_unpack(np.einsum("...l,...lc->...c", T3, c1)),
                    _sym_unpack(np.einsum("...l,...lc->...c", T3, c2)),
                    _sym_unpack(np.einsum("...l,...lc->...c", dT3, c0) * scale),
                ],
                axis=-3,
            )
            return g, dg

        return at

    def embed(self, x, exact=False):
        """G(x), from the interpolant by default, by integration with ``exact=True``."""
        if exact:
            return self.embed_exact(x)
        x = np.asarray(x, dtype=float)
        T = [self._basis(x[..., k])[0] for k in range(3)]
        c = np.einsum("...j,jklc->...klc", T[0], self.embed_coeffs)
        c = np.einsum("...k,...klc->...lc", T[1], c)
        return np.einsum("...l,...lc->...c", T[2], c)

    # -- reflection and checks -----------------------------------------------
    @staticmethod
    def reflect(x):
        x = np.array(x, dtype=float)
        x[..., 1:] *= -1.0
        return x

    def invert(self, q, x0=None, iters=12, tol=1e-13):
        """Fermi coordinates of ambient points ``q`` by Newton iteration on the exact embedding."""
        q = np.asarray(q, dtype=float)
        x = np.zeros_like(q) if x0 is None else np.array(x0, dtype=float)
        for _ in range(iters):
            G, DG = self.embed_jacobian(x)
            step = np.linalg.solve(DG, (q - G)[..., None])[..., 0]
            x = x + step
            if np.max(np.abs(step)) < tol:
                break
        return x

    def invariant_defects(self, samples=33):
        """Axis, identity-on-axis, symmetry and first-fundamental-form defects."""
        s = np.linspace(-0.9 * self.eps, 0.9 * self.eps, samples)
        axis = np.stack([s, 0 * s, 0 * s], axis=-1)
        on_curve = self.embed_exact(axis) - self.base_frame(s)[0]
        ident = self.metric(axis) - np.eye(3)
        rng = np.random.default_rng(1)
        pts = rng.uniform(-0.9 * self.eps, 0.9 * self.eps, (200, 3))
        R = np.diag([1.0, -1.0, -1.0])
        sym = self.metric(self.reflect(pts)) - R @ self.metric(pts) @ R
        fff = self.metric(np.zeros(3))[:2, :2] - np.eye(2)
        return {
            "axis_on_geodesic": float(np.max(np.abs(on_curve))),
            "axis_identity": float(np.max(np.abs(ident))),
            "reflection_symmetry": float(np.max(np.abs(sym))),
            "first_fundamental_form": float(np.max(np.abs(fff))),
        }

    def interpolation_error(self, samples=20, seed=0):
        """Max difference between interpolated and directly computed pulled metric at random points."""
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-0.95 * self.eps, 0.95 * self.eps, (samples, 3))
        return float(np.max(np.abs(self.metric(pts) - self.pulled_metric_exact(pts))))

    def axis_christoffel_defect(self, samples=33):
        """max |Gamma^2_kk(x1, 0, 0)| over k and sampled x1."""
        s = np.linspace(-0.9 * self.eps, 0.9 * self.eps, samples)
        axis = np.stack([s, 0 * s, 0 * s], axis=-1)
        gam = self.christoffel(axis)
        return float(max(np.max(np.abs(gam[:, 1, k, k])) for k in range(3)))


def _tensor_coeffs(values, n):
    """Chebyshev coefficients along the first three axes of ``values``."""
    t = chebyshev_nodes(n, 1.0)
    T, _ = chebyshev_basis(t, n)  # T[k, j] = T_j(t_k)
    V = (2.0 / n) * T.T
    V[0] *= 0.5
    c = np.einsum("ja,abc...->jbc...", V, values)
    c = np.einsum("kb,jbc...->jkc...", V, c)
    return np.einsum("lc,jkc...->jkl...", V, c)


def _flow_to_nodes(chart, q, eta, nodes, steps):
    """Geodesics from ``q`` along ``eta`` sampled at every node, marching outwards from 0.

    Each side takes ``steps`` RK4 steps in total, split evenly over the
    gaps between consecutive nodes; the negative side uses exactly the
    negated step sequence.
    """
    n = len(nodes)
    G = np.empty(q.shape[:-1] + (n, 3))
    vel = np.empty(q.shape[:-1] + (n, 3))
    pos = [k for k in range(n) if nodes[k] > 0]
    zero = [k for k in range(n) if nodes[k] == 0]
    for k in zero:
        G[..., k, :] = q
        vel[..., k, :] = eta
    sub = max(1, -(-steps // max(1, len(pos))))
    for sign in (1.0, -1.0):
        p, v, prev = q, eta, 0.0
        for k in pos:
            p, v, _ = flow(chart, p, v, sign * (nodes[k] - prev), sub)
            prev = nodes[k]
            j = k if sign > 0 else n - 1 - k
            G[..., j, :] = p
            vel[..., j, :] = v
    return G, vel


def _check_injective(G, x, eps):
    """Pairwise ambient separation of sampled chart points must not collapse."""
    stride = max(1, G.shape[0] // 7)
    Gs = G[::stride, ::stride, ::stride].reshape(-1, 3)
    xs = x[::stride, ::stride, ::stride].reshape(-1, 3)
    dG = np.linalg.norm(Gs[:, None] - Gs[None], axis=-1)
    dx = np.linalg.norm(xs[:, None] - xs[None], axis=-1)
    off = ~np.eye(len(Gs), dtype=bool)
    ratio = np.min(dG[off] / dx[off])
    if not ratio > 1e-3:
        raise FermiChartError(
            f"Fermi chart not injective on sampled box (min separation ratio {ratio:.3e}); "
            f"try eps={eps / 2:g}",
            suggested_eps=eps / 2,
        )


def build_fermi_chart(chart, arc_or_point, nu_p, eps=None, res=17, *, tangent=None, steps=24):
    """Fermi chart about the geodesic through a point with unit tangent and unit normal seed.

    ``arc_or_point`` is either a :class:`GeodesicArc` (its centre and initial
    velocity are used) or a base point, in which case ``tangent`` is required.
    """
    if isinstance(arc_or_point, GeodesicArc):
        i0 = int(np.argmin(np.abs(arc_or_point.s)))
        p = np.asarray(arc_or_point.points[i0], float)
        T = np.asarray(arc_or_point.velocities[i0], float)
    else:
        p = np.asarray(arc_or_point, float)
        if tangent is None:
            raise ValueError("a tangent is required when building from a point")
        T = np.asarray(tangent, float)
    nu = np.asarray(nu_p, dtype=float)
    if eps is None:
        eps = DEFAULT_EPS.get(chart.name, 0.2)
    eps = float(eps)
    res = int(res)
    if res < 4:
        raise ValueError("res must be at least 4")
    if not chart.contains(p):
        raise DomainError(f"base point {p.tolist()} outside box of {chart.name}")
    g = chart.metric(p)
    if abs(T @ g @ T - 1.0) > 1e-10 or abs(nu @ g @ nu - 1.0) > 1e-10 or abs(T @ g @ nu) > 1e-10:
        raise ValueError("tangent and seed must be g-orthonormal at the base point")

    try:
        arc = geodesic_arc(chart, p, T, eps, max(16, steps), nu=nu)
        nodes = chebyshev_nodes(res, eps)
        stub = FermiChart(chart, arc, p, T, nu, eps, res, steps, nodes, np.zeros((1, 1, 1, 6)), np.zeros((1, 1, 1, 3)))

        # exact embedding and its Jacobian on the tensor grid, with the
        # (x1, x2) surface frame computed once per stencil column
        X1, X2 = np.meshgrid(nodes, nodes, indexing="ij")
        offsets = [(0.0, 0.0)]
        for k in (0, 1):
            for s in (EMBED_FD, -EMBED_FD, 0.5 * EMBED_FD, -0.5 * EMBED_FD):
                offsets.append((s, 0.0) if k == 0 else (0.0, s))
        a1 = np.stack([X1 + o[0] for o in offsets])
        a2 = np.stack([X2 + o[1] for o in offsets])
        q, eta = stub.surface_frame(a1, a2)  # (9, n, n, 3)
        G, vel = _flow_to_nodes(chart, q, eta, nodes, steps)  # (9, n, n, n, 3)

        def rich(ip, im, ihp, ihm):
            d1 = (G[ip] - G[im]) / (2.0 * EMBED_FD)
            d2 = (G[ihp] - G[ihm]) / EMBED_FD
            return (4.0 * d2 - d1) / 3.0

        DG = np.stack([rich(1, 2, 3, 4), rich(5, 6, 7, 8), vel[0]], axis=-1)
        Gc = G[0]
        gm = chart.metric(Gc)
        pm = np.einsum("...ki,...kl,...lj->...ij", DG, gm, DG)
        pm = 0.5 * (pm + np.swapaxes(pm, -1, -2))
    except GeodesicExitError as exc:
        raise FermiChartError(
            f"Fermi box of half-width {eps:g} leaves the chart of {chart.name} ({exc}); try eps={eps / 2:g}",
            suggested_eps=eps / 2,
        ) from None

    det = np.linalg.det(DG)
    if not np.all(det > 0):
        raise FermiChartError(
            f"Fermi map degenerates on the box (min det {det.min():.3e}); try eps={eps / 2:g}",
            suggested_eps=eps / 2,
        )
    X = np.stack(np.meshgrid(nodes, nodes, nodes, indexing="ij"), axis=-1)
    _check_injective(Gc, X, eps)

    coeffs = _tensor_coeffs(_sym_pack(pm), res)
    embed_coeffs = _tensor_coeffs(Gc, res)
    return FermiChart(chart, arc, p, T, nu, eps, res, steps, nodes, coeffs, embed_coeffs)
