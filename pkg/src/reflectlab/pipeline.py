"""End-to-end run: chart, Fermi coordinates, half solve, reflection, checks, probes, outputs."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from .errors import (
    CatalogError,
    ConfigError,
    FermiChartError,
    GeodesicExitError,
    NotAGeodesicBoundaryError,
    SolverDivergedError,
    UnsupportedGeodesicError,
)
from .expr import compile_expression
from .extension import ExtensionTolerances, glue, odd_reflect, one_sided_u22, verify_extension
from .fermi import build_fermi_chart
from .grid import GridSpec, write_grid
from .isometries import GeodesicSpec, initial_data, reflection_for, verify_isometry
from .metrics import make_manifold
from .minimal import SolverConfig, solve_dirichlet
from .probes import (
    boundary_quotient_v,
    catenoid_blowup_probe,
    holder_gradient_quotient,
    odd_extension,
    second_difference_probe,
)

SCHEMA = "reflectlab-report/1"
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 2, 3, 4


def thread_cap():
    """Worker count from REFLECTLAB_THREADS (default 1)."""
    raw = os.environ.get("REFLECTLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over ``items`` using at most ``thread_cap()`` threads."""
    items = list(items)
    workers = min(thread_cap(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def module_versions():
    return {"reflectlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_report(report):
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def default_normal(chart, p, T):
    """A g-unit vector orthogonal to T, from Gram-Schmidt on the coordinate axes."""
    g = chart.metric(p)
    best = None
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        n = e - (e @ g @ T) * T
        size = math.sqrt(n @ g @ n)
        if best is None or size > best[0] + 1e-12:
            best = (size, n)
    return best[1] / best[0]


# ---------------------------------------------------------------------------
# mesh export
# ---------------------------------------------------------------------------

def mesh_vertices(w, chart):
    """Ambient points of the graph of ``w`` (Fermi charts embed, plain charts are identity)."""
    X, Y = w.spec.mesh()
    pts = np.stack([X, Y, w.values], axis=-1).reshape(-1, 3)
    if hasattr(chart, "embed_exact"):
        return chart.embed_exact(pts)
    return pts


def mesh_faces(nx, ny):
    """Two counter-clockwise triangles per grid cell (1-based OBJ indices)."""
    I, J = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    a = I * ny + J
    b = (I + 1) * ny + J
    c = (I + 1) * ny + J + 1
    d = I * ny + J + 1
    tris = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])
    return tris + 1


def export_mesh(w, chart, path):
    """Write the graph of ``w`` through ``chart`` as a triangulated OBJ file."""
    if not np.all(np.isfinite(w.values)):
        raise ValueError("grid values must be finite")
    verts = mesh_vertices(w, chart)
    faces = mesh_faces(w.spec.nx, w.spec.ny)
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in verts]
    lines += [f"f {a} {b} {c}" for a, b, c in faces]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return verts, faces


def chart_recipe(config, p, T, nu, eps):
    return {
        "manifold": config.manifold.name,
        "params": dict(config.manifold.params),
        "point": [float(x) for x in p],
        "tangent": [float(x) for x in T],
        "normal": [float(x) for x in nu],
        "eps": float(eps),
        "resolution": config.fermi.resolution,
        "steps": config.fermi.steps,
    }


def chart_from_recipe(recipe):
    """Rebuild a chart from a chart.json recipe (Fermi if it names a geodesic, else the catalog chart)."""
    try:
        chart = make_manifold(recipe["manifold"], recipe.get("params", {}))
    except KeyError as exc:
        raise ConfigError(f"chart recipe misses {exc}", field="chart") from None
    except CatalogError as exc:
        raise ConfigError(str(exc), field="chart") from None
    if "point" not in recipe:
        return chart
    return build_fermi_chart(
        chart, recipe["point"], recipe["normal"], recipe["eps"], recipe.get("resolution", 17),
        tangent=recipe["tangent"], steps=recipe.get("steps", 24),
    )


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def _u22_axis(w_half):
    u22 = one_sided_u22(w_half.values, 0, w_half.spec.hy, 1)
    return float(np.max(np.abs(u22[1:-1])))


def run_pipeline(config, write=True):
    """Execute the configured run; returns ``(exit_code, report)`` and writes outputs."""
    report = {
        "schema": SCHEMA,
        "config_sha256": config.sha256,
        "versions": module_versions(),
        "seed": config.seed,
    }
    out = config.output
    if write:
        os.makedirs(out, exist_ok=True)

    def finish(code, status):
        report["status"] = status
        report["exit_code"] = code
        if write:
            with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
                fh.write(dump_report(report))
        return code, report

    # chart and geodesic
    try:
        chart = make_manifold(config.manifold.name, config.manifold.params)
    except CatalogError as exc:
        raise ConfigError(str(exc), field="manifold.params") from None
    gspec = GeodesicSpec(config.geodesic.kind, config.geodesic.point, config.geodesic.theta)
    p, T = initial_data(chart, gspec)
    if not chart.contains(p):
        raise ConfigError("geodesic point lies outside the chart box", field="geodesic.point")
    nu = default_normal(chart, p, T)
    eps = config.fermi.eps
    if eps is None:
        from .fermi import DEFAULT_EPS

        eps = DEFAULT_EPS.get(chart.name, 0.2)
    room = np.minimum(p - chart.lower, chart.upper - p)
    if not np.all(room > 2.0 * eps):
        raise ConfigError(
            f"fermi.eps = {eps:g} does not fit in the chart box around the base point", field="fermi.eps"
        )
    report["manifold"] = {"name": chart.name, "params": dict(chart.params), "box": [list(b) for b in chart.box]}
    report["geodesic"] = {"kind": gspec.kind, "point": list(gspec.point), "theta": gspec.theta,
                          "tangent": T, "normal": nu}
    checks = {}

    # ambient reflection
    try:
        iso = reflection_for(chart, gspec)
        irep = verify_isometry(chart, iso, config.verify.isometry_samples, config.verify.isometry_tol, config.seed)
        report["isometry"] = irep.to_dict()
        checks["isometry"] = irep.passed
    except UnsupportedGeodesicError as exc:
        report["isometry"] = {"unsupported": str(exc)}

    # Fermi chart
    try:
        fermi = build_fermi_chart(chart, p, nu, eps, config.fermi.resolution, tangent=T, steps=config.fermi.steps)
    except (FermiChartError, GeodesicExitError) as exc:
        raise ConfigError(str(exc), field="fermi.eps") from None
    defects = fermi.invariant_defects()
    axis = np.stack([np.linspace(-0.9 * eps, 0.9 * eps, 33), np.zeros(33), np.zeros(33)], -1)
    h22_min = float(np.min(fermi.metric(axis)[:, 1, 1]))
    gamma_axis = fermi.axis_christoffel_defect()
    report["fermi"] = {
        "eps": eps,
        "resolution": fermi.res,
        "steps": fermi.steps,
        "defects": defects,
        "h22_axis_min": h22_min,
        "christoffel_axis_defect": gamma_axis,
    }
    checks["fermi_axis_identity"] = defects["axis_identity"] <= 1e-6
    checks["fermi_h22"] = h22_min >= 0.5
    checks["fermi_christoffel_axis"] = gamma_axis <= 1e-6
    if "isometry" in checks:
        checks["fermi_symmetry"] = defects["reflection_symmetry"] <= 1e-6
    if write:
        with open(os.path.join(out, "chart.json"), "w", encoding="utf-8") as fh:
            fh.write(dump_report(chart_recipe(config, p, T, nu, eps)))

    # boundary data and grids
    L = config.solve.extent * eps
    expr = compile_expression(config.solve.boundary, ("x1", "x2", "eps", "L"))

    def phi(x1, x2):
        return np.broadcast_to(expr(x1=x1, x2=x2, eps=eps, L=L), np.shape(x1))

    xs = np.linspace(-L, L, 101)
    if np.max(np.abs(phi(xs, 0.0 * xs))) > 1e-12:
        raise ConfigError("boundary data must vanish on the axis x2 = 0", field="solve.boundary")
    n = config.solve.grid
    m = (n + 1) // 2
    scfg = SolverConfig(tol=config.solve.tol, max_iter=config.solve.max_iter)
    half = GridSpec(n, m, -L, L, 0.0, L)
    half_coarse = GridSpec(m, (m + 1) // 2, -L, L, 0.0, L)
    full = GridSpec.square(n, -L, L)
    jobs = [("half", half)]
    if half_coarse.ny >= 17:
        jobs.append(("half_coarse", half_coarse))
    if config.verify.full_square:
        jobs.append(("full", full))

    def solve(job):
        return job[0], solve_dirichlet(fermi, job[1], phi, scfg)

    try:
        solved = dict(parallel_map(solve, jobs))
    except SolverDivergedError as exc:
        report["solver"] = {"diverged": str(exc), "residual_history": list(exc.residual_history)}
        return finish(EXIT_DIVERGED, "diverged")
    w_half, rep_half = solved["half"]
    report["solver"] = {k: v[1].to_dict() for k, v in solved.items()}
    checks["solver_residual"] = rep_half.final_residual <= config.solve.tol
    checks["ellipticity"] = rep_half.lambda_min >= 1e-3

    # reflection and gluing
    try:
        v = odd_reflect(w_half)
    except NotAGeodesicBoundaryError as exc:
        raise ConfigError(str(exc), field="solve.boundary") from None
    w = glue(w_half, v)
    tols = ExtensionTolerances(c1=config.verify.c1, u22=config.verify.u22,
                               residual=config.verify.residual_factor * config.solve.tol)
    erep = verify_extension(fermi, w, tols)
    ext = erep.to_dict()
    checks["extension"] = erep.passed
    if "half_coarse" in solved:
        # refinement study against the half solve at twice the spacing
        w_coarse = solved["half_coarse"][0]
        u22_fine = _u22_axis(w_half)
        u22_coarse = _u22_axis(w_coarse)
        order = math.log2(u22_coarse / u22_fine) if u22_fine > 0 and u22_coarse > 0 else math.inf
        disc = float(np.max(np.abs(w_coarse.values - w_half.values[::2, ::2]))) / 3.0
        ext.update({"u22_axis_coarse": u22_coarse, "u22_order": order, "discretization_error": disc})
        checks["u22_order"] = order >= config.verify.min_order or u22_fine <= 1e-12
        if "full" in solved:
            diff = float(np.max(np.abs(solved["full"][0].values - w.values)))
            ext["full_square_difference"] = diff
            checks["full_square"] = diff <= config.verify.glue_factor * max(disc, 1e-13)
    elif "full" in solved:
        ext["full_square_difference"] = float(np.max(np.abs(solved["full"][0].values - w.values)))
    report["extension"] = ext

    # probes
    probes = {}
    enabled = config.probes.enabled
    if "holder" in enabled:
        probes["holder"] = holder_gradient_quotient(
            w, config.probes.taus, config.probes.pair_budget, config.seed
        ).to_dict()
    if "catenoid" in enabled:
        rep, _ = catenoid_blowup_probe(
            config.probes.catenoid_grid, config.probes.taus, config.probes.pair_budget, config.seed
        )
        probes["catenoid"] = rep.to_dict()
        checks["catenoid_diverged"] = all(rep.diverged_by_tau.values())
    if "boundary-quotient" in enabled:
        bq = boundary_quotient_v(w_half, L, ellipticity=(rep_half.lambda_min, rep_half.Lambda_max))
        probes["boundary_quotient"] = bq.to_dict()
        checks["boundary_quotient"] = not bq.hypothesis_violated
    if "second-difference" in enabled:
        probes["second_difference"] = second_difference_probe(odd_extension(w_half))
    report["probes"] = probes

    if write:
        write_grid(os.path.join(out, "half.txt"), w_half)
        write_grid(os.path.join(out, "glued.txt"), w)
        if "full" in solved:
            write_grid(os.path.join(out, "full.txt"), solved["full"][0])
        export_mesh(w, fermi, os.path.join(out, "surface.obj"))

    report["checks"] = checks
    ok = all(checks.values())
    return finish(EXIT_OK if ok else EXIT_VERIFY, "pass" if ok else "verification-failed")
