import numpy as np
import pytest
import sympy as sp

from reflectlab.errors import DegeneracyError, DomainError, SolverDivergedError
from reflectlab.grid import GraphFunction, GridSpec, read_grid, write_grid
from reflectlab.metrics import make_manifold
from reflectlab.minimal import (
    SolverConfig,
    assemble_residual,
    ellipticity_bounds,
    operator_fields,
    residual_field,
    solve_dirichlet,
)

X1, X2, X3 = sp.symbols("x1 x2 x3", real=True)


def scherk(x, y):
    return np.log(np.cos(y) / np.cos(x))


def nil3_symbolic(tau=1.0):
    form = sp.Matrix([tau * X2, -tau * X1, 1])
    return sp.diag(1, 1, 0) + form * form.T


def level_set_mean_curvature(g, u):
    """2H = -div_g N for the unit normal of the level sets of x3 - u."""
    coords = (X1, X2, X3)
    dF = sp.Matrix([-sp.diff(u, X1), -sp.diff(u, X2), 1])
    ginv = g.inv()
    up = ginv * dF
    W = sp.sqrt((dF.T * up)[0])
    N = up / W
    vol = sp.sqrt(g.det())
    div = sum(sp.diff(vol * N[i], coords[i]) for i in range(3)) / vol
    return -div / 2, W


def fields_from_chart(chart, u, p):
    d = [sp.diff(u, X1), sp.diff(u, X2), sp.diff(u, X1, 2), sp.diff(u, X1, X2), sp.diff(u, X2, 2)]
    subs = {X1: p[0], X2: p[1]}
    vals = [np.array(float(e.subs(subs))) for e in d]
    z = float(u.subs(subs))
    g, dg = chart.metric_derivatives(np.array([p[0], p[1], z]))
    return operator_fields(g, dg, *vals), z


@pytest.mark.parametrize("name,g_sym", [("euclidean", sp.eye(3)), ("nil3", nil3_symbolic())])
def test_operator_matches_divergence_oracle(name, g_sym):
    chart = make_manifold(name)
    u = sp.Rational(3, 10) * X1**2 - X1 * X2 / 5 + sp.sin(X2) / 4
    H_sym, W_sym = level_set_mean_curvature(g_sym, u)
    for p in [(0.1, 0.2), (-0.4, 0.3), (0.7, -0.5)]:
        f, z = fields_from_chart(chart, u, p)
        subs = {X1: p[0], X2: p[1], X3: z}
        H = float(H_sym.subs(subs))
        W = float(W_sym.subs(subs))
        assert abs(float(f.H) - H) < 1e-12
        assert abs(float(f.W) - W) < 1e-12
        assert abs(float(f.residual) - 2.0 * H * W) < 1e-12


def test_flat_operator_is_classical_minimal_surface_operator(rng):
    p1, p2, r11, r12, r22 = rng.normal(size=(5, 50))
    g = np.broadcast_to(np.eye(3), (50, 3, 3))
    dg = np.zeros((50, 3, 3, 3))
    f = operator_fields(g, dg, p1, p2, r11, r12, r22)
    classical = ((1 + p2**2) * r11 - 2 * p1 * p2 * r12 + (1 + p1**2) * r22) / (1 + p1**2 + p2**2)
    np.testing.assert_allclose(f.residual, classical, atol=1e-13)


def test_scherk_coarse_grid():
    spec = GridSpec.square(33, -1.0, 1.0)
    w, rep = solve_dirichlet(make_manifold("euclidean"), spec, scherk)
    exact = GraphFunction.from_function(spec, scherk).values
    assert np.max(np.abs(w.values - exact)) < 2e-2
    assert rep.converged and rep.final_residual <= 1e-10
    assert rep.curvature_mismatch < 1e-10
    assert rep.lambda_min > 0 and rep.Lambda_max <= 1.0 + 1e-12


def test_affine_data_is_reproduced_exactly():
    spec = GridSpec.square(17, -1.0, 1.0)
    w, rep = solve_dirichlet(make_manifold("euclidean"), spec, lambda x, y: 0.3 * x - 0.2 * y + 0.1)
    X, Y = spec.mesh()
    np.testing.assert_allclose(w.values, 0.3 * X - 0.2 * Y + 0.1, atol=1e-13)
    assert rep.iterations <= 1


def test_horizontal_slices_of_h2xr():
    spec = GridSpec.square(17, -0.5, 0.5)
    w, _ = solve_dirichlet(make_manifold("h2xr"), spec, lambda x, y: 0.2 + 0 * x)
    np.testing.assert_allclose(w.values, 0.2, atol=1e-13)


def test_nil3_zero_section_is_minimal():
    spec = GridSpec.square(17, -0.5, 0.5)
    w = GraphFunction.from_values(spec, np.zeros((17, 17)))
    assert np.max(np.abs(residual_field(make_manifold("nil3"), w))) < 1e-15


def test_maximum_principle():
    spec = GridSpec.square(33, -0.6, 0.6)
    w, _ = solve_dirichlet(make_manifold("nil3"), spec, lambda x, y: 0.2 * np.sin(3 * x) * np.cos(2 * y))
    m = spec.boundary_mask()
    inner = w.values[~m]
    assert inner.max() <= w.values[m].max() + 1e-12
    assert inner.min() >= w.values[m].min() - 1e-12


def test_pointwise_assembly_agrees_with_residual_field():
    spec = GridSpec.square(17, -0.5, 0.5)
    w = GraphFunction.from_function(spec, lambda x, y: 0.1 * x * y + 0.05 * x**2)
    chart = make_manifold("e-kappa-tau")
    res = residual_field(chart, w)
    ev = assemble_residual(chart, w, (5, 9))
    assert abs(ev.residual - res[4, 8]) < 1e-13
    lam, Lam = ellipticity_bounds(chart, w)
    assert 0 < lam <= Lam
    with pytest.raises(DomainError):
        assemble_residual(chart, w, (0, 3))


def test_solver_failures():
    chart = make_manifold("euclidean")
    with pytest.raises(SolverDivergedError) as info:
        solve_dirichlet(chart, GridSpec.square(17, -1, 1), scherk, SolverConfig(max_iter=1))
    assert len(info.value.residual_history) == 2
    with pytest.raises(ValueError):
        solve_dirichlet(chart, GridSpec.square(9, -1, 1), scherk)
    with pytest.raises(DomainError):
        solve_dirichlet(make_manifold("h2xr"), GridSpec.square(17, -0.5, 0.5), lambda x, y: 5.0 + 0 * x)


def test_degenerate_metric_is_reported():
    g = np.broadcast_to(np.diag([1.0, -1.0, 1.0]), (2, 3, 3))
    with pytest.raises(DegeneracyError):
        operator_fields(g, np.zeros((2, 3, 3, 3)), *np.zeros((5, 2)), nodes=[(1, 1), (1, 2)])


def test_grid_text_round_trip(tmp_path):
    spec = GridSpec(17, 9, -0.3, 0.3, 0.0, 0.3)
    w = GraphFunction.from_function(spec, lambda x, y: np.sin(x) * y / 3)
    write_grid(tmp_path / "w.txt", w)
    back = read_grid(tmp_path / "w.txt")
    np.testing.assert_array_equal(back.values, w.values)
    assert back.spec.nx == 17 and back.spec.ny == 9
    np.testing.assert_allclose([back.spec.x_hi, back.spec.y_hi], [0.3, 0.3], atol=1e-15)
