"""Rectangular node grids and grid functions with finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``nx x ny`` node grid on ``[x_lo, x_hi] x [y_lo, y_hi]`` (index order ``[i, j]``)."""

    nx: int
    ny: int
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grids need at least 3 nodes per axis")
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise ValueError("empty grid extent")

    @classmethod
    def square(cls, n, lo, hi):
        return cls(n, n, lo, hi, lo, hi)

    @property
    def hx(self):
        return (self.x_hi - self.x_lo) / (self.nx - 1)

    @property
    def hy(self):
        return (self.y_hi - self.y_lo) / (self.ny - 1)

    @property
    def x(self):
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    @property
    def y(self):
        return np.linspace(self.y_lo, self.y_hi, self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def boundary_mask(self):
        m = np.zeros((self.nx, self.ny), dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m


@dataclass(frozen=True)
class GraphFunction:
    """Node values of ``u`` with Dirichlet nodes marked by ``boundary_mask``."""

    spec: GridSpec
    values: np.ndarray
    boundary_mask: np.ndarray

    @classmethod
    def from_values(cls, spec, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (spec.nx, spec.ny):
            raise ValueError(f"values shape {values.shape} does not match grid {(spec.nx, spec.ny)}")
        return cls(spec, values, spec.boundary_mask())

    @classmethod
    def from_function(cls, spec, fn):
        X, Y = spec.mesh()
        return cls.from_values(spec, np.broadcast_to(fn(X, Y), X.shape).astype(float))

    # interior stencils; arrays have shape (nx - 2, ny - 2)
    def interior_derivatives(self):
        return stencil_derivatives(self.values, self.spec.hx, self.spec.hy)

    def gradient(self):
        """Second-order gradient everywhere (one-sided at the edges)."""
        gx, gy = np.gradient(self.values, self.spec.hx, self.spec.hy, edge_order=2)
        return gx, gy

    @property
    def K(self):
        """max(|u| + |Du|) over all nodes."""
        gx, gy = self.gradient()
        return float(np.max(np.abs(self.values) + np.hypot(gx, gy)))

    def boundary_defect(self, phi_values):
        m = self.boundary_mask
        return float(np.max(np.abs(self.values[m] - np.asarray(phi_values)[m])))


def stencil_derivatives(u, hx, hy):
    """Central first and second differences at interior nodes: (u1, u2, u11, u12, u22)."""
    c = u[1:-1, 1:-1]
    u1 = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * hx)
    u2 = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * hy)
    u11 = (u[2:, 1:-1] - 2.0 * c + u[:-2, 1:-1]) / hx**2
    u22 = (u[1:-1, 2:] - 2.0 * c + u[1:-1, :-2]) / hy**2
    u12 = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4.0 * hx * hy)
    return u1, u2, u11, u12, u22


def write_grid(path, w):
    """Plain-text grid: header ``nx ny hx hy ox oy`` then ``nx`` rows of ``ny`` values."""
    s = w.spec
    lines = [f"{s.nx} {s.ny} {s.hx:.17g} {s.hy:.17g} {s.x_lo:.17g} {s.y_lo:.17g}"]
    for row in w.values:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid(path):
    with open(path, encoding="utf-8") as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    try:
        nx, ny = int(rows[0][0]), int(rows[0][1])
        hx, hy, ox, oy = (float(v) for v in rows[0][2:6])
        values = np.array([[float(v) for v in r] for r in rows[1:]])
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed grid file {path}: {exc}", field="in") from None
    if values.shape != (nx, ny):
        raise ConfigError(f"grid file {path}: expected {nx}x{ny} values, got {values.shape}", field="in")
    spec = GridSpec(nx, ny, ox, ox + hx * (nx - 1), oy, oy + hy * (ny - 1))
    return GraphFunction.from_values(spec, values)
