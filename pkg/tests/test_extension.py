import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reflectlab.errors import GlueError, NotAGeodesicBoundaryError
from reflectlab.extension import glue, odd_reflect, one_sided_u2, one_sided_u22, verify_extension
from reflectlab.grid import GraphFunction, GridSpec
from reflectlab.metrics import make_manifold
from reflectlab.minimal import solve_dirichlet


def helicoid(x, y):
    return 0.2 * np.arctan2(y, x + 2.0)


def test_helicoid_half_solve_reflects_to_full_solution():
    chart = make_manifold("euclidean")
    L = 0.5
    half = GridSpec(33, 17, -L, L, 0.0, L)
    w_half, _ = solve_dirichlet(chart, half, helicoid)
    w = glue(w_half, odd_reflect(w_half))
    exact = GraphFunction.from_function(w.spec, helicoid).values
    assert np.max(np.abs(w.values - exact)) < 1e-5
    full, _ = solve_dirichlet(chart, GridSpec.square(33, -L, L), helicoid)
    assert np.max(np.abs(full.values - w.values)) < 1e-12
    rep = verify_extension(chart, w)
    assert rep.passed
    assert rep.c0_defect == 0.0 and rep.c1_defect == 0.0 and rep.odd_defect == 0.0
    assert rep.u22_axis < 1e-4
    assert rep.residual_minus < 1e-9


def test_one_sided_stencils_are_exact_on_cubics():
    h = 0.1
    y = h * np.arange(4)
    x = np.linspace(-1, 1, 5)[:, None]
    vals = (1 + x) * (0.3 + 2 * y - 1.5 * y**2) + 0.7 * y**3
    np.testing.assert_allclose(one_sided_u22(vals, 0, h, 1), -3.0 * (1 + x[:, 0]), atol=1e-10)
    np.testing.assert_allclose(one_sided_u2(vals[:, :3] - 0.7 * y[:3] ** 3, 0, h, 1), 2.0 * (1 + x[:, 0]), atol=1e-12)
    back = vals[:, ::-1]
    np.testing.assert_allclose(one_sided_u22(back, 3, h, -1), -3.0 * (1 + x[:, 0]), atol=1e-10)


@given(arrays(float, (9, 6), elements=st.floats(-1, 1)))
def test_glued_function_is_odd(values):
    values[:, 0] = 0.0
    u = GraphFunction.from_values(GridSpec(9, 6, -1.0, 1.0, 0.0, 0.5), values)
    w = glue(u, odd_reflect(u))
    assert w.spec.ny == 11 and w.spec.y_lo == -0.5
    np.testing.assert_array_equal(w.values, -w.values[:, ::-1])
    np.testing.assert_array_equal(w.values[:, 5:], values)


def test_nonzero_axis_data_is_rejected():
    u = GraphFunction.from_values(GridSpec(5, 5, -1, 1, 0, 1), np.full((5, 5), 0.1))
    with pytest.raises(NotAGeodesicBoundaryError):
        odd_reflect(u)


def test_glue_errors():
    u = GraphFunction.from_values(GridSpec(5, 5, -1, 1, 0, 1), np.zeros((5, 5)))
    other = GraphFunction.from_values(GridSpec(7, 5, -1, 1, -1, 0), np.zeros((7, 5)))
    with pytest.raises(GlueError):
        glue(u, other)
    with pytest.raises(GlueError):
        odd_reflect(GraphFunction.from_values(GridSpec(5, 5, -1, 1, 0.5, 1), np.zeros((5, 5))))
    with pytest.raises(GlueError):
        verify_extension(make_manifold("euclidean"), GraphFunction.from_values(GridSpec(5, 4, -1, 1, 0.1, 1), np.zeros((5, 4))))


def test_kinked_surface_fails_the_checks():
    spec = GridSpec.square(17, -0.5, 0.5)
    w = GraphFunction.from_function(spec, lambda x, y: 0.1 * np.abs(y))
    rep = verify_extension(make_manifold("euclidean"), w)
    assert not rep.passed and rep.c1_defect > 0.1
