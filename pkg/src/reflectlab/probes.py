"""Numerical probes of gradient Hoelder regularity and boundary quotients.

Hoelder quotients ``|Du(x) - Du(y)| / |x - y|^tau`` are sampled over all
axis-aligned neighbour pairs plus random pairs whose index separation lies
in three dyadic bands ``[2, 4), [4, 8), [8, 16)``, half of them anchored
on boundary nodes.  Separations are measured
in grid cells, so every refinement probes proportionally closer pairs; a
quotient that keeps growing under refinement signals a gradient that is not
``C^tau`` up to the sampled boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GraphFunction, GridSpec

DEFAULT_TAUS = (0.1, 0.25, 0.5, 0.75, 0.9)
BANDS = ((2, 4), (4, 8), (8, 16))
STABLE_RATIO = 1.2
DIVERGED_GROWTH = 2.0


# ---------------------------------------------------------------------------
# pair sampling
# ---------------------------------------------------------------------------

def index_pairs(shape, pair_budget, seed=0, periodic_axis=None):
    """Neighbour pairs plus ``pair_budget`` random pairs in the dyadic index bands.

    Returns two ``(m, 2)`` integer arrays of node indices.  With
    ``periodic_axis`` set, that index wraps around.
    """
    nx, ny = shape
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    a, b = [], []
    for di, dj in ((1, 0), (0, 1)):
        ii, jj = I + di, J + dj
        if periodic_axis == 0:
            ii = ii % nx
        if periodic_axis == 1:
            jj = jj % ny
        ok = (ii < nx) & (jj < ny)
        a.append(np.stack([I[ok], J[ok]], -1))
        b.append(np.stack([ii[ok], jj[ok]], -1))
    rng = np.random.default_rng(seed)
    edge = (I == 0) | (I == nx - 1)
    if periodic_axis != 1:
        edge |= (J == 0) | (J == ny - 1)
    edge_nodes = np.stack([I[edge], J[edge]], -1)
    per_band = pair_budget // len(BANDS)
    for lo, hi in BANDS:
        got = 0
        for _ in range(50):
            m = 4 * per_band
            length = rng.uniform(lo, hi, m)
            ang = rng.uniform(0, 2 * np.pi, m)
            di = np.rint(length * np.cos(ang)).astype(int)
            dj = np.rint(length * np.sin(ang)).astype(int)
            si = rng.integers(0, nx, m)
            sj = rng.integers(0, ny, m)
            # half of the pairs start on the boundary
            on_edge = rng.random(m) < 0.5
            pick = edge_nodes[rng.integers(0, len(edge_nodes), m)]
            si = np.where(on_edge, pick[:, 0], si)
            sj = np.where(on_edge, pick[:, 1], sj)
            ei, ej = si + di, sj + dj
            if periodic_axis == 0:
                ei = ei % nx
            if periodic_axis == 1:
                ej = ej % ny
            ok = (ei >= 0) & (ei < nx) & (ej >= 0) & (ej < ny) & ((di != 0) | (dj != 0))
            take = np.flatnonzero(ok)[: per_band - got]
            a.append(np.stack([si[take], sj[take]], -1))
            b.append(np.stack([ei[take], ej[take]], -1))
            got += len(take)
            if got >= per_band:
                break
    return np.concatenate(a), np.concatenate(b)


def quotient_sups(points, grads, pairs, taus, floor=0.0):
    """``sup |grad(x) - grad(y)| / |x - y|^tau`` over the given index pairs, for each tau.

    Gradient differences at or below ``floor`` (rounding level) count as zero.
    """
    ia, ib = pairs
    pa = points[ia[:, 0], ia[:, 1]]
    pb = points[ib[:, 0], ib[:, 1]]
    dist = np.linalg.norm(pa - pb, axis=-1)
    dgrad = np.linalg.norm(grads[ia[:, 0], ia[:, 1]] - grads[ib[:, 0], ib[:, 1]], axis=-1)
    dgrad = np.where(dgrad > floor, dgrad, 0.0)
    ok = dist > 0
    return [float(np.max(dgrad[ok] / dist[ok] ** tau)) for tau in taus]


# ---------------------------------------------------------------------------
# Hoelder report
# ---------------------------------------------------------------------------

@dataclass
class HolderReport:
    exponent_grid: list
    levels: list
    quotient_sup: dict
    growth: dict
    stable: dict
    diverged_by_tau: dict
    estimated_tau: float | None
    estimated_C: float | None
    diverged: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "exponent_grid": list(self.exponent_grid),
            "levels": list(self.levels),
            "quotient_sup": {f"{t:g}": v for t, v in self.quotient_sup.items()},
            "growth": {f"{t:g}": v for t, v in self.growth.items()},
            "stable": {f"{t:g}": v for t, v in self.stable.items()},
            "diverged_by_tau": {f"{t:g}": v for t, v in self.diverged_by_tau.items()},
            "estimated_tau": self.estimated_tau,
            "estimated_C": self.estimated_C,
            "diverged": self.diverged,
            **self.extra,
        }


def _verdict(taus, level_names, sups):
    """Assemble a report from per-level quotient sups (coarse to fine)."""
    sups = np.asarray(sups)  # (levels, taus)
    quot, growth, stable, div = {}, {}, {}, {}
    for k, tau in enumerate(taus):
        col = sups[:, k]
        ratios = [float(col[i + 1] / col[i]) if col[i] > 0 else (0.0 if col[i + 1] == 0 else np.inf)
                  for i in range(len(col) - 1)]
        quot[tau] = [float(v) for v in col]
        growth[tau] = ratios
        stable[tau] = bool(all(r <= STABLE_RATIO for r in ratios))
        total = float(np.prod(ratios)) if ratios else 1.0
        div[tau] = bool(len(ratios) >= 2 and total >= DIVERGED_GROWTH)
    stable_taus = [t for t in taus if stable[t]]
    est = max(stable_taus) if stable_taus else None
    return HolderReport(
        exponent_grid=list(taus),
        levels=list(level_names),
        quotient_sup=quot,
        growth=growth,
        stable=stable,
        diverged_by_tau=div,
        estimated_tau=est,
        estimated_C=None if est is None else quot[est][-1],
        diverged=bool(any(div.values())),
    )


def _coarsen(u, factor):
    s = u.spec
    if (s.nx - 1) % factor or (s.ny - 1) % factor:
        raise ValueError(f"grid {s.nx}x{s.ny} cannot be coarsened by {factor}")
    spec = GridSpec((s.nx - 1) // factor + 1, (s.ny - 1) // factor + 1, s.x_lo, s.x_hi, s.y_lo, s.y_hi)
    return GraphFunction.from_values(spec, u.values[::factor, ::factor])


def holder_gradient_quotient(u, taus=DEFAULT_TAUS, pair_budget=3000, seed=0):
    """Hoelder quotients of the gradient across three resolutions.

    ``u`` is a single grid function (coarsened by 2 and 4 to form the
    levels) or a coarse-to-fine sequence of grid functions.
    """
    levels = list(u) if isinstance(u, (list, tuple)) else [_coarsen(u, 4), _coarsen(u, 2), u]
    taus = [float(t) for t in taus]
    sups = []
    for lev in levels:
        X, Y = lev.spec.mesh()
        gx, gy = lev.gradient()
        pts = np.stack([X, Y], -1)
        pairs = index_pairs(X.shape, pair_budget, seed)
        # rounding error of a difference quotient of the node values
        floor = 64.0 * np.finfo(float).eps * np.max(np.abs(lev.values)) / min(lev.spec.hx, lev.spec.hy)
        sups.append(quotient_sups(pts, np.stack([gx, gy], -1), pairs, taus, floor))
    names = [f"{lev.spec.nx}x{lev.spec.ny}" for lev in levels]
    return _verdict(taus, names, sups)


# ---------------------------------------------------------------------------
# catenoid
# ---------------------------------------------------------------------------

def catenoid_gradient_norm(r):
    """|Du| for the catenoid graph u = arccosh(r)."""
    r = np.asarray(r, dtype=float)
    return 1.0 / np.sqrt(r * r - 1.0)


def _catenoid_level(n, taus, pair_budget, seed):
    r_out = np.cosh(1.0)
    h = (r_out - 1.0) / n
    r = 1.0 + h * np.arange(1, n + 1)
    th = 2.0 * np.pi * np.arange(n) / n
    Rr, Th = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([Rr * np.cos(Th), Rr * np.sin(Th)], -1)
    du = catenoid_gradient_norm(Rr)
    grads = np.stack([du * np.cos(Th), du * np.sin(Th)], -1)
    pairs = index_pairs(Rr.shape, pair_budget, seed, periodic_axis=1)
    return quotient_sups(pts, grads, pairs, taus)


def catenoid_blowup_probe(n=128, taus=DEFAULT_TAUS, pair_budget=3000, seed=0):
    """Explicit catenoid graph over the annulus ``1 < r <= cosh(1)``.

    Samples the closed-form gradient on polar node sets with ``n``, ``2n``
    and ``4n`` radial nodes and returns the Hoelder report together with a
    radial trace of ``|Du|`` approaching the inner circle.
    """
    if n < 8:
        raise ValueError("need at least 8 radial nodes")
    taus = [float(t) for t in taus]
    sizes = [n, 2 * n, 4 * n]
    sups = [_catenoid_level(m, taus, pair_budget, seed) for m in sizes]
    report = _verdict(taus, [f"{m}x{m}" for m in sizes], sups)
    gaps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    norms = catenoid_gradient_norm(1.0 + gaps)
    trace = {
        "r_minus_1": gaps.tolist(),
        "grad_norm": norms.tolist(),
        "monotone": bool(np.all(np.diff(norms) > 0)),
        "grad_at_outer": float(catenoid_gradient_norm(np.cosh(1.0))),
    }
    report.extra["trace"] = trace
    return report, trace


# ---------------------------------------------------------------------------
# boundary quotient v = w / y_n
# ---------------------------------------------------------------------------

@dataclass
class BoundaryQuotient:
    R: float
    h: float
    v: np.ndarray
    boundary_values: np.ndarray
    sequence_mismatch: float
    sequence_mismatch_full: float
    normal_derivative_mismatch: float
    hypothesis_violated: bool
    delta: float
    probe_radius: float
    C: float
    alpha: float

    def to_dict(self):
        return {
            "R": self.R,
            "h": self.h,
            "sequence_mismatch": self.sequence_mismatch,
            "sequence_mismatch_full": self.sequence_mismatch_full,
            "normal_derivative_mismatch": self.normal_derivative_mismatch,
            "hypothesis_violated": self.hypothesis_violated,
            "delta": self.delta,
            "probe_radius": self.probe_radius,
            "C": self.C,
            "alpha": self.alpha,
        }


def _extrapolate_to_zero(t, f):
    """Value at 0 of the cubic through four samples (Lagrange form)."""
    out = 0.0
    for k in range(4):
        wk = 1.0
        for m in range(4):
            if m != k:
                wk *= (0.0 - t[m]) / (t[k] - t[m])
        out = out + wk * f[k]
    return out


def boundary_quotient_v(w, R, delta_fraction=None, ellipticity=(1.0, 1.0), n=2):
    """Quotient ``v = w / y_n`` on a half-ball grid and its boundary extension.

    ``w`` lives on a grid over ``[-R, R] x [0, R]`` with ``w = 0`` on the
    bottom row.  Boundary values of ``v`` are limits of ``w(y1, t) / t``
    along two node sequences ``t = h..4h`` and ``t = 2h..8h`` (cubic
    extrapolation to ``t = 0``); their disagreement is the sequence
    mismatch, measured over the central boundary portion ``|y1| <= R/2``
    that carries the probed sub-balls.  The Hoelder fit
    ``|v(x) - v(y)| ~ C r^alpha`` uses those boundary points ``x`` and nodes
    ``y`` within the probe radius ``max(delta R / 256, 8 h)``, where
    ``delta = lambda / (48 n Lambda)``.
    """
    s = w.spec
    if s.y_lo != 0.0:
        raise ValueError("the half-ball grid must start at y_n = 0")
    vals = w.values
    if np.max(np.abs(vals[:, 0])) > 1e-10:
        raise ValueError("w must vanish on the flat boundary")
    h = s.hy
    if s.ny < 9:
        raise ValueError("need at least 9 rows to extrapolate")
    t1 = h * np.arange(1, 5)
    t2 = h * np.arange(2, 9, 2)
    seq1 = _extrapolate_to_zero(t1, [vals[:, k] / t1[k - 1] for k in range(1, 5)])
    seq2 = _extrapolate_to_zero(t2, [vals[:, 2 * k] / t2[k - 1] for k in range(1, 5)])
    central = np.abs(s.x) <= 0.5 * R
    mismatch = float(np.max(np.abs(seq1 - seq2)[central]))
    mismatch_full = float(np.max(np.abs(seq1 - seq2)))
    # five-point one-sided normal derivative
    dn = (-25 * vals[:, 0] + 48 * vals[:, 1] - 36 * vals[:, 2] + 16 * vals[:, 3] - 3 * vals[:, 4]) / (12 * h)
    nd_mismatch = float(np.max(np.abs(seq1 - dn)[central]))

    X, Y = s.mesh()
    v = np.empty_like(vals)
    v[:, 1:] = vals[:, 1:] / Y[:, 1:]
    v[:, 0] = seq1

    lam, Lam = ellipticity
    delta = lam / (48.0 * n * Lam) if delta_fraction is None else float(delta_fraction)
    radius = max(delta * R / 256.0, 8.0 * max(s.hx, s.hy))

    # boundary Hoelder data
    inside = np.hypot(X, Y) < R
    bx = np.flatnonzero(central)
    r_all, dv_all = [], []
    for i in bx:
        d = np.hypot(X - s.x[i], Y)
        m = inside & (d > 0) & (d <= radius)
        r_all.append(d[m])
        dv_all.append(np.abs(v[m] - v[i, 0]))
    r_all = np.concatenate(r_all)
    dv_all = np.concatenate(dv_all)
    C, alpha = _fit_holder(r_all, dv_all)
    return BoundaryQuotient(
        R=float(R),
        h=float(h),
        v=v,
        boundary_values=seq1,
        sequence_mismatch=mismatch,
        sequence_mismatch_full=mismatch_full,
        normal_derivative_mismatch=nd_mismatch,
        hypothesis_violated=bool(mismatch > 1e-4),
        delta=float(delta),
        probe_radius=float(radius),
        C=C,
        alpha=alpha,
    )


def _fit_holder(r, dv):
    """Least-squares fit of log dv = log C + alpha log r over the top decile per distance class."""
    ok = (r > 0) & (dv > 0)
    r, dv = r[ok], dv[ok]
    if len(r) < 2:
        return 0.0, 1.0
    classes = np.unique(np.round(r / r.min(), 6))
    xs, ys = [], []
    key = np.round(r / r.min(), 6)
    for c in classes:
        sel = dv[key == c]
        cut = np.quantile(sel, 0.9)
        top = sel[sel >= cut]
        xs.append(np.full(len(top), np.log(c * r.min())))
        ys.append(np.log(top))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if np.ptp(x) == 0:
        return float(np.exp(np.mean(y))), 1.0
    alpha, logC = np.polyfit(x, y, 1)
    alpha = float(min(max(alpha, 1e-6), 1.0))
    return float(np.exp(logC)), alpha


# ---------------------------------------------------------------------------
# second differences of an odd extension
# ---------------------------------------------------------------------------

def odd_extension(w):
    """``w_bar(y', y_n) = w`` for ``y_n >= 0`` and ``-w(y', -y_n)`` below, on the doubled grid."""
    s = w.spec
    if s.y_lo != 0.0:
        raise ValueError("w must live on a grid starting at y_n = 0")
    values = np.concatenate([-w.values[:, :0:-1], w.values], axis=1)
    spec = GridSpec(s.nx, 2 * s.ny - 1, s.x_lo, s.x_hi, -s.y_hi, s.y_hi)
    return GraphFunction.from_values(spec, values)


def _second_difference_sup(wb, gammas, max_offset=16):
    s = wb.spec
    vals = wb.values
    offs = [(di, dj) for di in range(0, max_offset + 1) for dj in range(-max_offset, max_offset + 1)
            if (di > 0 or dj > 0) and max(abs(di), abs(dj)) <= max_offset]
    best = np.zeros(len(gammas))
    for di, dj in offs:
        if 2 * di >= s.nx or 2 * abs(dj) >= s.ny:
            continue
        lo_i, hi_i = di, s.nx - di
        lo_j, hi_j = abs(dj), s.ny - abs(dj)
        c = vals[lo_i:hi_i, lo_j:hi_j]
        p = vals[lo_i + di:hi_i + di, lo_j + dj:hi_j + dj]
        m = vals[lo_i - di:hi_i - di, lo_j - dj:hi_j - dj]
        d2 = np.max(np.abs(p + m - 2.0 * c))
        ylen = np.hypot(di * s.hx, dj * s.hy)
        best = np.maximum(best, [d2 / ylen ** (1.0 + g) for g in gammas])
    return [float(b) for b in best]


def second_difference_probe(w_bar, gammas=(0.25, 0.5, 0.75, 1.0), max_offset=8):
    """``sup |w(x+y) + w(x-y) - 2 w(x)| / |y|^{1+gamma}`` at the grid and its 2x coarsening.

    Offsets ``y`` range over index vectors with entries up to ``max_offset``.
    Returns a dict with the per-gamma sups and a boundedness verdict
    (fine / coarse ratio at most 1.2).
    """
    gammas = [float(g) for g in gammas]
    coarse = _coarsen(w_bar, 2)
    sc = _second_difference_sup(coarse, gammas, max_offset)
    sf = _second_difference_sup(w_bar, gammas, max_offset)
    bounded = {}
    for g, a, b in zip(gammas, sc, sf):
        bounded[f"{g:g}"] = bool(b <= STABLE_RATIO * a + 1e-9)
    return {
        "gammas": gammas,
        "coarse": sc,
        "fine": sf,
        "bounded": bounded,
    }
