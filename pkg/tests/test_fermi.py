import numpy as np
import pytest
from numpy.polynomial import chebyshev as C

from reflectlab.errors import FermiChartError
from reflectlab.fermi import build_fermi_chart, chebyshev_basis, chebyshev_nodes
from reflectlab.isometries import GeodesicSpec, fermi_reflection, reflection_for
from reflectlab.metrics import make_manifold


def test_chebyshev_basis_matches_numpy():
    t = np.linspace(-1, 1, 11)
    T, dT = chebyshev_basis(t, 6)
    for k in range(6):
        c = np.zeros(k + 1)
        c[k] = 1.0
        np.testing.assert_allclose(T[..., k], C.chebval(t, c), atol=1e-14)
        np.testing.assert_allclose(dT[..., k], C.chebval(t, C.chebder(c)), atol=1e-12)


def test_chebyshev_nodes_are_mirrored():
    x = chebyshev_nodes(17, 0.3)
    np.testing.assert_array_equal(x, -x[::-1])
    assert np.all(np.abs(x) < 0.3)


def test_euclidean_fermi_map_is_affine():
    chart = make_manifold("euclidean")
    p = np.array([0.1, 0.2, -0.3])
    T = np.array([0.6, 0.8, 0.0])
    nu = np.array([0.0, 0.0, 1.0])
    f = build_fermi_chart(chart, p, nu, 0.5, tangent=T)
    x = np.array([[0.1, -0.2, 0.3], [-0.4, 0.2, 0.0]])
    want = p + x[:, :1] * T + x[:, 1:2] * nu + x[:, 2:] * np.cross(T, nu)
    np.testing.assert_allclose(f.embed_exact(x), want, atol=1e-14)
    np.testing.assert_allclose(f.metric(x), np.broadcast_to(np.eye(3), (2, 3, 3)), atol=1e-9)


@pytest.mark.parametrize("which", ["fermi_nil3", "fermi_h2xr"])
def test_fermi_invariants(which, request):
    f = request.getfixturevalue(which)
    d = f.invariant_defects()
    assert d["axis_on_geodesic"] < 1e-12
    assert d["axis_identity"] < 1e-10
    assert d["reflection_symmetry"] < 1e-12
    assert d["first_fundamental_form"] < 1e-10
    assert f.axis_christoffel_defect() < 1e-6
    assert f.interpolation_error() < 1e-7
    s = np.linspace(-0.9 * f.eps, 0.9 * f.eps, 21)
    axis = np.stack([s, 0 * s, 0 * s], -1)
    assert f.metric(axis)[:, 1, 1].min() >= 0.5


def test_fermi_christoffel_matches_finite_differences(fermi_nil3):
    f = fermi_nil3
    x = np.array([0.05, -0.1, 0.12])
    _, dg = f.metric_derivatives(x)
    h = 1e-5
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        np.testing.assert_allclose(dg[k], (f.metric(x + e) - f.metric(x - e)) / (2 * h), atol=1e-8)


def test_fermi_reflection_equals_closed_form(fermi_h2xr, rng):
    f = fermi_h2xr
    closed = reflection_for(f.ambient, GeodesicSpec("vertical", (0.0, 0.0, 0.0)))
    via_chart = fermi_reflection(f)
    x = rng.uniform(-0.15, 0.15, (5, 3))
    q = f.embed_exact(x)
    np.testing.assert_allclose(via_chart(q), closed(q), atol=1e-10)
    np.testing.assert_allclose(f.invert(q), x, atol=1e-12)


def test_embedding_interpolant_tracks_exact_map(fermi_nil3, rng):
    x = rng.uniform(-0.25, 0.25, (10, 3))
    np.testing.assert_allclose(fermi_nil3.embed(x), fermi_nil3.embed_exact(x), atol=1e-9)


def test_fermi_errors():
    chart = make_manifold("h2xr")
    p = np.zeros(3)
    T = np.array([0.0, 0.0, 1.0])
    nu = np.array([1.0, 0.0, 0.0])
    with pytest.raises(FermiChartError) as info:
        build_fermi_chart(chart, p, nu, 1.0, tangent=T)
    assert info.value.suggested_eps == 0.5
    with pytest.raises(ValueError):
        build_fermi_chart(chart, p, 2 * nu, 0.1, tangent=T)
    with pytest.raises(ValueError):
        build_fermi_chart(chart, p, nu, 0.1)
