"""Geodesics, parallel transport and the exponential map.

The integrator is classical fourth-order Runge-Kutta with a fixed number of
steps.  Step sizes are signed, so integrating backwards along ``v`` is
bit-for-bit the same as integrating forwards along ``-v``; this keeps
reflection symmetries of a metric exact in the numerical flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeodesicExitError

MIN_STEPS = 16


def _accel(gamma, v, w):
    gw = np.matmul(gamma, w[..., None, :, None])[..., 0]
    return -np.matmul(gw, v[..., :, None])[..., 0]


def flow(chart, p, v, t, steps, transport=()):
    """Integrate ``p'' = -Gamma(p', p')`` from ``(p, v)`` up to parameter ``t``.

    Batched over the leading axes of ``p``, ``v`` and ``t``; ``t`` may be
    negative.  Vectors in ``transport`` are parallel transported along the
    same curves.  Returns ``(p, v, transported)`` at parameter ``t``.
    """
    p = np.array(p, dtype=float)
    v = np.array(v, dtype=float)
    t = np.asarray(t, dtype=float)
    ws = [np.array(w, dtype=float) for w in transport]
    shape = np.broadcast_shapes(p.shape[:-1], v.shape[:-1], t.shape, *(w.shape[:-1] for w in ws))
    p = np.broadcast_to(p, shape + (3,)).copy()
    v = np.broadcast_to(v, shape + (3,)).copy()
    ws = [np.broadcast_to(w, shape + (3,)).copy() for w in ws]
    dt = (np.broadcast_to(t, shape) / steps)[..., None]

    def rhs(p_, v_, ws_):
        gam = chart.christoffel(p_)
        return v_, _accel(gam, v_, v_), [_accel(gam, v_, w_) for w_ in ws_]

    for k in range(steps):
        k1 = rhs(p, v, ws)
        k2 = rhs(p + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1], [w + 0.5 * dt * a for w, a in zip(ws, k1[2])])
        k3 = rhs(p + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1], [w + 0.5 * dt * a for w, a in zip(ws, k2[2])])
        k4 = rhs(p + dt * k3[0], v + dt * k3[1], [w + dt * a for w, a in zip(ws, k3[2])])
        p = p + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        v = v + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        ws = [
            w + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            for w, a1, a2, a3, a4 in zip(ws, k1[2], k2[2], k3[2], k4[2])
        ]
        inside = chart.contains(p)
        if not np.all(inside):
            frac = (k + 1) / steps
            exit_param = float(np.max(np.abs(np.broadcast_to(t, shape)[~inside]))) * frac
            raise GeodesicExitError(
                f"geodesic left the box of {chart.name} at parameter {exit_param:.6g}", exit_param
            )
    return p, v, ws


def norm_g(chart, p, v):
    g = chart.metric(p)
    return np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))


@dataclass(frozen=True)
class GeodesicArc:
    """Arclength-parametrized geodesic samples with a parallel unit normal.

    ``s`` runs from ``-half_length`` (or 0 for one-sided arcs) to
    ``+half_length``; ``frame`` is ``None`` when no normal was transported.
    """

    chart: object
    s: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    frame: np.ndarray | None
    half_length: float

    @property
    def start(self):
        return self.points[np.argmin(np.abs(self.s))]

    def speed_defect(self):
        return float(np.max(np.abs(norm_g(self.chart, self.points, self.velocities) - 1.0)))

    def frame_defect(self):
        if self.frame is None:
            return 0.0
        g = self.chart.metric(self.points)
        dot = np.einsum("...i,...ij,...j->...", self.frame, g, self.velocities)
        nn = np.einsum("...i,...ij,...j->...", self.frame, g, self.frame)
        return float(max(np.max(np.abs(dot)), np.max(np.abs(nn - 1.0))))

    def geodesic_residual(self):
        """Max of |p'' + Gamma(p', p')| by fourth-order differences of the samples (interior)."""
        ds = self.s[1] - self.s[0]
        x = self.points
        acc = (-x[4:] + 16.0 * x[3:-1] - 30.0 * x[2:-2] + 16.0 * x[1:-3] - x[:-4]) / (12.0 * ds**2)
        gam = self.chart.christoffel(x[2:-2])
        res = acc - _accel(gam, self.velocities[2:-2], self.velocities[2:-2])
        return float(np.max(np.abs(res)))


def _check_steps(steps):
    if int(steps) < MIN_STEPS:
        raise ValueError(f"at least {MIN_STEPS} steps are required, got {steps}")
    return int(steps)


def _trajectory(chart, p, v, length, steps, transport):
    """Samples of a single curve at ``steps + 1`` equally spaced parameters in [0, length]."""
    pts, vel, fr = [np.asarray(p, float)], [np.asarray(v, float)], [np.asarray(w, float) for w in transport]
    frames = [fr]
    cur_p, cur_v, cur_w = pts[0], vel[0], fr
    dt = length / steps
    for k in range(steps):
        try:
            cur_p, cur_v, cur_w = flow(chart, cur_p, cur_v, dt, 1, cur_w)
        except GeodesicExitError:
            raise GeodesicExitError(
                f"geodesic left the box of {chart.name} at parameter {abs(dt) * (k + 1):.6g}",
                abs(dt) * (k + 1),
            ) from None
        pts.append(cur_p)
        vel.append(cur_v)
        frames.append(cur_w)
    return np.array(pts), np.array(vel), frames


def integrate_geodesic(chart, p, v, length, steps):
    """Unit-speed geodesic from ``p`` with initial velocity ``v`` over ``[0, length]``."""
    steps = _check_steps(steps)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if not chart.contains(p):
        raise DomainError(f"start point {p.tolist()} outside box of {chart.name}")
    speed = float(norm_g(chart, p, v))
    if abs(speed - 1.0) > 1e-10:
        raise ValueError(f"initial velocity must be g-unit, |v|_g = {speed:.15g}")
    pts, vel, _ = _trajectory(chart, p, v, float(length), steps, ())
    s = np.linspace(0.0, float(length), steps + 1)
    return GeodesicArc(chart, s, pts, vel, None, abs(float(length)))


def geodesic_arc(chart, p, v, half_length, steps, nu=None):
    """Two-sided arc ``s in [-half_length, half_length]`` through ``p``, optionally with a parallel ``nu``."""
    steps = _check_steps(steps)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    speed = float(norm_g(chart, p, v))
    if abs(speed - 1.0) > 1e-10:
        raise ValueError(f"initial velocity must be g-unit, |v|_g = {speed:.15g}")
    transport = () if nu is None else (np.asarray(nu, dtype=float),)
    fp, fv, ff = _trajectory(chart, p, v, half_length, steps, transport)
    bp, bv, bf = _trajectory(chart, p, v, -half_length, steps, transport)
    pts = np.concatenate([bp[::-1], fp[1:]])
    vel = np.concatenate([bv[::-1], fv[1:]])
    s = np.linspace(-half_length, half_length, 2 * steps + 1)
    frame = None
    if nu is not None:
        fr_f = np.array([f[0] for f in ff])
        fr_b = np.array([f[0] for f in bf])
        frame = np.concatenate([fr_b[::-1], fr_f[1:]])
    return GeodesicArc(chart, s, pts, vel, frame, float(half_length))


def exp_map(chart, p, v, steps=64):
    """Endpoint of the geodesic from ``p`` with initial velocity ``v`` at time 1.

    Integrated at unit speed over arclength ``|v|_g``; ``exp_map(p, 0) = p``.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    steps = _check_steps(steps)
    length = float(norm_g(chart, p, v))
    if length == 0.0:
        return p.copy()
    q, _, _ = flow(chart, p, v / length, length, steps)
    return q


def parallel_transport(chart, arc, w0):
    """Parallel field along ``arc`` (one value per sample) starting from ``w0`` at ``arc.s[0]``."""
    w0 = np.asarray(w0, dtype=float)
    out = [w0]
    w = w0
    for k in range(len(arc.s) - 1):
        ds = arc.s[k + 1] - arc.s[k]
        _, _, (w,) = flow(chart, arc.points[k], arc.velocities[k], ds, 1, (w,))
        out.append(w)
    return np.array(out)
