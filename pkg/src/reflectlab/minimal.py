"""The minimal-graph operator in a 3-dimensional chart and a Newton Dirichlet solver.

For a graph ``x3 = u(x1, x2)`` with tangent frame ``X_i = d_i + u_i d_3``
the operator is

    F = h^{ij} (u_ij + A^3_ij) - u_m h^{ij} A^m_ij,
    A^m_ij = Gamma^m(X_i, X_j),

summed over ``i, j, m in {1, 2}``, where ``h_ij = g(X_i, X_j)``.  The graph
is minimal iff ``F = 0``; in fact ``F = 2 H W`` with ``H`` the mean
curvature for the upward normal ``N`` and ``W`` the tilt factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DegeneracyError, DomainError, SolverDivergedError
from .grid import GraphFunction, GridSpec, stencil_derivatives
from .metrics import christoffel_from, inverse_sym3


@dataclass
class OperatorFields:
    """Pointwise operator data; every field is an array over the evaluation nodes."""

    X1: np.ndarray
    X2: np.ndarray
    h: np.ndarray
    hinv: np.ndarray
    W: np.ndarray
    N: np.ndarray
    residual: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class MinimalOperatorEval:
    node: tuple
    X1: np.ndarray
    X2: np.ndarray
    h: np.ndarray
    hinv: np.ndarray
    W: float
    N: np.ndarray
    residual: float
    H: float


def operator_fields(g, dg, p1, p2, r11, r12, r22, gamma=None, nodes=None):
    """Evaluate frame, induced metric, tilt, normal, residual and mean curvature."""
    ginv = inverse_sym3(g)
    if gamma is None:
        gamma = christoffel_from(g, dg, ginv)
    one = np.ones_like(p1)
    zero = np.zeros_like(p1)
    X1 = np.stack([one, zero, p1], axis=-1)
    X2 = np.stack([zero, one, p2], axis=-1)

    def gdot(a, b):
        return np.einsum("...i,...ij,...j->...", a, g, b)

    h11, h12, h22 = gdot(X1, X1), gdot(X1, X2), gdot(X2, X2)
    det = h11 * h22 - h12 * h12
    bad = ~((det > 0) & (h11 > 0))
    if np.any(bad):
        idx = None if nodes is None else nodes[int(np.argmax(bad))]
        raise DegeneracyError(f"induced metric not positive definite at node {idx}", node=idx)
    hi11, hi12, hi22 = h22 / det, -h12 / det, h11 / det
    h = np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)
    hinv = np.stack([np.stack([hi11, hi12], -1), np.stack([hi12, hi22], -1)], -2)

    lowered_normal = np.stack([-p1, -p2, one], axis=-1)
    up = np.einsum("...ij,...j->...i", ginv, lowered_normal)
    W2 = np.einsum("...i,...i->...", lowered_normal, up)
    if np.any(W2 <= 0):
        raise DegeneracyError("nonpositive tilt factor", node=None)
    W = np.sqrt(W2)
    N = up / W[..., None]

    def A(Xa, Xb):
        return np.einsum("...mab,...a,...b->...m", gamma, Xa, Xb)

    A11, A12, A22 = A(X1, X1), A(X1, X2), A(X2, X2)
    trace = hi11[..., None] * A11 + 2.0 * hi12[..., None] * A12 + hi22[..., None] * A22
    second = hi11 * r11 + 2.0 * hi12 * r12 + hi22 * r22
    F = second + trace[..., 2] - p1 * trace[..., 0] - p2 * trace[..., 1]

    # 2H = h^{ij} g(N, nabla_{X_i} X_j) with nabla_{X_i} X_j = u_ij d_3 + A_ij
    e3 = np.zeros_like(X1)
    e3[..., 2] = 1.0
    gN = np.einsum("...ij,...j->...i", g, N)
    twoH = np.einsum("...i,...i->...", gN, trace + second[..., None] * e3)
    return OperatorFields(X1, X2, h, hinv, W, N, F, 0.5 * twoH)


def _node_points(spec, z):
    X, Y = spec.mesh()
    return np.stack([X, Y, z], axis=-1)


def assemble_residual(chart, u, node):
    """Operator data at one interior node ``(i, j)`` of ``u``."""
    i, j = node
    s = u.spec
    if not (0 < i < s.nx - 1 and 0 < j < s.ny - 1):
        raise DomainError(f"node {node} is not interior")
    d = [a[i - 1, j - 1] for a in u.interior_derivatives()]
    x = np.array([s.x[i], s.y[j], u.values[i, j]])
    if not chart.contains(x):
        raise DomainError(f"graph point {x.tolist()} outside the chart box")
    g, dg = chart.metric_derivatives(x)
    f = operator_fields(g, dg, *(np.asarray(v) for v in d), nodes=[tuple(node)])
    return MinimalOperatorEval(
        tuple(node), f.X1, f.X2, f.h, f.hinv, float(f.W), f.N, float(f.residual), float(f.H)
    )


def ellipticity_bounds(chart, u):
    """Min and max eigenvalue of ``h^{ij}`` over interior nodes."""
    d = u.interior_derivatives()
    z = u.values[1:-1, 1:-1]
    X, Y = u.spec.mesh()
    g, dg = chart.columns(X[1:-1, 1:-1], Y[1:-1, 1:-1])(z)
    f = operator_fields(g, dg, *d)
    ev = np.linalg.eigvalsh(f.hinv)
    lam, Lam = float(ev[..., 0].min()), float(ev[..., 1].max())
    if not lam > 0:
        raise DegeneracyError(f"nonpositive ellipticity constant {lam}")
    return lam, Lam


# ---------------------------------------------------------------------------
# Dirichlet solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 40
    fd_delta: float = 1e-6
    damping_floor: float = 2.0**-10


@dataclass
class SolverReport:
    converged: bool
    iterations: int
    picard_sweeps: int
    residual_history: list
    final_residual: float
    K: float
    lambda_min: float
    Lambda_max: float
    curvature_mismatch: float
    grid: tuple = field(default=())

    def to_dict(self):
        return dict(self.__dict__)


class _Problem:
    """Residual and Jacobian of the discrete operator at the interior nodes of a grid."""

    def __init__(self, chart, spec):
        self.chart = chart
        self.spec = spec
        X, Y = spec.mesh()
        self.X, self.Y = X, Y
        self.cols = chart.columns(X[1:-1, 1:-1], Y[1:-1, 1:-1])
        mi, mj = spec.nx - 2, spec.ny - 2
        self.shape = (mi, mj)
        self.nodes = [(i + 1, j + 1) for i in range(mi) for j in range(mj)]

    def check_domain(self, u):
        pts = np.stack([self.X, self.Y, u], axis=-1)
        inside = self.chart.contains(pts)
        if not np.all(inside):
            i, j = np.argwhere(~inside)[0]
            raise DomainError(
                f"graph leaves the chart box at node ({i}, {j}): x3 = {u[i, j]:.6g}"
            )

    def fields(self, u, dz=0.0, dp=(0.0, 0.0)):
        u1, u2, u11, u12, u22 = stencil_derivatives(u, self.spec.hx, self.spec.hy)
        g, dg = self.cols(u[1:-1, 1:-1] + dz)
        return operator_fields(g, dg, u1 + dp[0], u2 + dp[1], u11, u12, u22)

    def residual(self, u):
        return self.fields(u).residual

    def jacobian(self, u, first_order=True):
        """Sparse Jacobian over interior unknowns (row-major interior ordering)."""
        s = self.spec
        f0 = self.fields(u)
        hi = f0.hinv
        a11, a12, a22 = hi[..., 0, 0], 2.0 * hi[..., 0, 1], hi[..., 1, 1]
        mi, mj = self.shape
        b1 = b2 = c = np.zeros(self.shape)
        if first_order:
            d = 1e-6
            b1 = (self.fields(u, dp=(d, 0.0)).residual - self.fields(u, dp=(-d, 0.0)).residual) / (2 * d)
            b2 = (self.fields(u, dp=(0.0, d)).residual - self.fields(u, dp=(0.0, -d)).residual) / (2 * d)
            c = (self.fields(u, dz=d).residual - self.fields(u, dz=-d).residual) / (2 * d)
        hx, hy = s.hx, s.hy
        stencil = [
            (0, 0, -2.0 * a11 / hx**2 - 2.0 * a22 / hy**2 + c),
            (1, 0, a11 / hx**2 + b1 / (2 * hx)),
            (-1, 0, a11 / hx**2 - b1 / (2 * hx)),
            (0, 1, a22 / hy**2 + b2 / (2 * hy)),
            (0, -1, a22 / hy**2 - b2 / (2 * hy)),
            (1, 1, a12 / (4 * hx * hy)),
            (-1, -1, a12 / (4 * hx * hy)),
            (1, -1, -a12 / (4 * hx * hy)),
            (-1, 1, -a12 / (4 * hx * hy)),
        ]
        I, J = np.meshgrid(np.arange(mi), np.arange(mj), indexing="ij")
        rows, cols, vals = [], [], []
        for di, dj, w in stencil:
            ii, jj = I + di, J + dj
            ok = (ii >= 0) & (ii < mi) & (jj >= 0) & (jj < mj)
            rows.append((I * mj + J)[ok])
            cols.append((ii * mj + jj)[ok])
            vals.append(np.broadcast_to(w, self.shape)[ok])
        n = mi * mj
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ), f0


def harmonic_extension(spec, boundary_values):
    """Discrete harmonic function (5-point Laplacian) with the given boundary values."""
    u = np.array(boundary_values, dtype=float)
    mi, mj = spec.nx - 2, spec.ny - 2
    hx2, hy2 = spec.hx**2, spec.hy**2
    ex = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(mi, mi)) / hx2
    ey = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(mj, mj)) / hy2
    L = sp.kron(ex, sp.identity(mj)) + sp.kron(sp.identity(mi), ey)
    rhs = np.zeros((mi, mj))
    rhs[0, :] -= u[0, 1:-1] / hx2
    rhs[-1, :] -= u[-1, 1:-1] / hx2
    rhs[:, 0] -= u[1:-1, 0] / hy2
    rhs[:, -1] -= u[1:-1, -1] / hy2
    u[1:-1, 1:-1] = spsolve(sp.csc_matrix(L), rhs.ravel()).reshape(mi, mj)
    return u


def boundary_array(spec, boundary):
    """Node array carrying the boundary data (interior entries zero)."""
    X, Y = spec.mesh()
    if callable(boundary):
        vals = np.broadcast_to(np.asarray(boundary(X, Y), dtype=float), X.shape).copy()
    else:
        vals = np.array(boundary, dtype=float)
        if vals.shape != X.shape:
            raise ValueError(f"boundary array shape {vals.shape} does not match grid {X.shape}")
    if not np.all(np.isfinite(vals[spec.boundary_mask()])):
        raise ValueError("boundary data must be finite")
    out = np.zeros_like(vals)
    m = spec.boundary_mask()
    out[m] = vals[m]
    return out


def solve_dirichlet(chart, spec, boundary, config=None, initial=None):
    """Damped Newton solve of ``F = 0`` with Dirichlet data on the grid boundary.

    ``boundary`` is a callable ``phi(x1, x2)`` or a node array whose edge
    entries are used.  Returns ``(GraphFunction, SolverReport)``.
    """
    config = config or SolverConfig()
    if spec.nx < 17 or spec.ny < 17:
        raise ValueError("grid resolution must be at least 17 per axis")
    phi = boundary_array(spec, boundary)
    prob = _Problem(chart, spec)
    if initial is None:
        u = harmonic_extension(spec, phi)
    else:
        u = np.array(initial, dtype=float)
        u[spec.boundary_mask()] = phi[spec.boundary_mask()]
    prob.check_domain(u)

    shape = prob.shape
    res = prob.residual(u)
    history = [float(np.max(np.abs(res)))]
    picard = 0
    iterations = 0
    while history[-1] > config.tol:
        if iterations >= config.max_iter:
            raise SolverDivergedError(
                f"no convergence after {iterations} iterations (residual {history[-1]:.3e})", history
            )
        iterations += 1
        J, _ = prob.jacobian(u)
        step = spsolve(J, -res.ravel()).reshape(shape)
        accepted = False
        alpha = 1.0
        while alpha >= config.damping_floor:
            trial = u.copy()
            trial[1:-1, 1:-1] += alpha * step
            try:
                prob.check_domain(trial)
                r_trial = prob.residual(trial)
            except (DomainError, DegeneracyError):
                r_trial = None
            if r_trial is not None and np.all(np.isfinite(r_trial)) and np.max(np.abs(r_trial)) < history[-1]:
                u, res, accepted = trial, r_trial, True
                break
            alpha *= 0.5
        if not accepted:
            # frozen-coefficient sweep before giving up
            picard += 1
            Jp, _ = prob.jacobian(u, first_order=False)
            trial = u.copy()
            trial[1:-1, 1:-1] += spsolve(Jp, -res.ravel()).reshape(shape)
            try:
                prob.check_domain(trial)
                r_trial = prob.residual(trial)
            except (DomainError, DegeneracyError):
                r_trial = None
            if r_trial is None or not np.max(np.abs(r_trial)) < history[-1]:
                raise SolverDivergedError(
                    f"Newton stalled and the frozen-coefficient sweep did not reduce the residual "
                    f"({history[-1]:.3e})",
                    history,
                )
            u, res = trial, r_trial
        history.append(float(np.max(np.abs(res))))

    w = GraphFunction.from_values(spec, u)
    f = prob.fields(u)
    ev = np.linalg.eigvalsh(f.hinv)
    report = SolverReport(
        converged=True,
        iterations=iterations,
        picard_sweeps=picard,
        residual_history=history,
        final_residual=history[-1],
        K=w.K,
        lambda_min=float(ev[..., 0].min()),
        Lambda_max=float(ev[..., 1].max()),
        curvature_mismatch=float(np.max(np.abs(f.residual - 2.0 * f.H * f.W))),
        grid=(spec.nx, spec.ny),
    )
    return w, report


def residual_field(chart, w):
    """Operator residual at the interior nodes of ``w``."""
    return _Problem(chart, w.spec).residual(w.values)
