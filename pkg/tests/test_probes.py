import numpy as np
import pytest

from reflectlab.grid import GraphFunction, GridSpec
from reflectlab.probes import (
    boundary_quotient_v,
    catenoid_blowup_probe,
    catenoid_gradient_norm,
    holder_gradient_quotient,
    index_pairs,
    odd_extension,
    second_difference_probe,
)


def scherk(x, y):
    return np.log(np.cos(y) / np.cos(x))


def poisson_kernel_oracle(R, rows):
    s = 2.0 * R
    spec = GridSpec(2 * rows - 1, rows, -R, R, 0.0, R)
    w = GraphFunction.from_function(spec, lambda x, y: y / ((x - s) ** 2 + y**2))
    return w, lambda x: 1.0 / (x - s) ** 2


def test_scherk_patch_is_holder():
    w = GraphFunction.from_function(GridSpec.square(129, -1.0, 1.0), scherk)
    rep = holder_gradient_quotient(w)
    assert not rep.diverged
    assert rep.estimated_tau >= 0.5
    assert rep.levels == ["33x33", "65x65", "129x129"]


def test_catenoid_gradient_blows_up():
    assert catenoid_gradient_norm(1.0 + 1e-4) >= 70.0
    assert abs(catenoid_gradient_norm(np.cosh(1.0)) - 1.0 / np.sinh(1.0)) < 1e-15
    rep, trace = catenoid_blowup_probe(32, taus=(0.75, 0.9), pair_budget=1000)
    assert trace["monotone"]
    assert rep.diverged_by_tau[0.9]


def test_index_pairs_are_deterministic_and_in_range():
    a, b = index_pairs((20, 30), 500, seed=4)
    a2, b2 = index_pairs((20, 30), 500, seed=4)
    np.testing.assert_array_equal(a, a2)
    np.testing.assert_array_equal(b, b2)
    for idx in (a, b):
        assert idx.min() >= 0 and idx[:, 0].max() < 20 and idx[:, 1].max() < 30
    assert np.all(np.any(a != b, axis=1))
    assert len(a) == 19 * 30 + 20 * 29 + 3 * (500 // 3)


def test_boundary_quotient_on_harmonic_oracle():
    R = 1.0
    w, exact = poisson_kernel_oracle(R, 129)
    bq = boundary_quotient_v(w, R)
    assert bq.sequence_mismatch <= 1e-6
    assert not bq.hypothesis_violated
    central = np.abs(w.spec.x) <= R / 2
    np.testing.assert_allclose(bq.boundary_values[central], exact(w.spec.x[central]), rtol=1e-5)
    assert bq.probe_radius >= 8 * bq.h
    assert 0 < bq.alpha <= 1


def test_boundary_quotient_rejects_nonzero_boundary():
    spec = GridSpec(17, 9, -1, 1, 0, 1)
    with pytest.raises(ValueError):
        boundary_quotient_v(GraphFunction.from_values(spec, np.ones((17, 9))), 1.0)


def test_second_difference_probe_on_odd_extensions():
    spec = GridSpec(65, 33, -1, 1, 0, 1)
    out = second_difference_probe(odd_extension(GraphFunction.from_function(spec, lambda x, y: y * (1 + x))))
    assert all(out["bounded"].values())
    # y|y| is C^{1,1}: the gamma = 1 quotient equals 2 at every resolution
    out = second_difference_probe(odd_extension(GraphFunction.from_function(spec, lambda x, y: y**2)))
    assert all(out["bounded"].values())
    np.testing.assert_allclose([out["coarse"][-1], out["fine"][-1]], 2.0, rtol=1e-12)
    # y|y|^{1/2} is only C^{1,1/2}
    out = second_difference_probe(odd_extension(GraphFunction.from_function(spec, lambda x, y: y**1.5)))
    assert out["bounded"]["0.5"] and not out["bounded"]["1"]


def test_affine_gradient_has_zero_quotients():
    w = GraphFunction.from_function(GridSpec.square(65, -1.0, 1.0), lambda x, y: 0.3 * x - 0.7 * y + 1.0)
    rep = holder_gradient_quotient(w)
    assert all(v == [0.0, 0.0, 0.0] for v in rep.quotient_sup.values())
    assert not rep.diverged


def test_scherk_constant_is_stable():
    w = GraphFunction.from_function(GridSpec.square(129, -1.0, 1.0), scherk)
    rep = holder_gradient_quotient(w)
    q = rep.quotient_sup[rep.estimated_tau]
    assert abs(q[-1] / q[-2] - 1.0) <= 0.2


@pytest.mark.parametrize("w_fn,v_fn", [(lambda x, y: y, lambda x: 1.0 + 0 * x), (lambda x, y: y * (1 + x), lambda x: 1 + x)])
def test_boundary_quotient_product_forms(w_fn, v_fn):
    spec = GridSpec(33, 17, -1.0, 1.0, 0.0, 1.0)
    bq = boundary_quotient_v(GraphFunction.from_function(spec, w_fn), 1.0)
    np.testing.assert_allclose(bq.boundary_values, v_fn(spec.x), atol=1e-12)
    np.testing.assert_allclose(bq.v[:, 1:], np.broadcast_to(v_fn(spec.x)[:, None], (33, 16)), atol=1e-12)
    assert bq.sequence_mismatch < 1e-12


def test_boundary_quotient_equals_normal_derivative():
    w, _ = poisson_kernel_oracle(1.0, 129)
    assert boundary_quotient_v(w, 1.0).normal_derivative_mismatch <= 1e-5


def test_linear_odd_extension_has_zero_second_differences():
    spec = GridSpec(33, 17, -1, 1, 0, 1)
    out = second_difference_probe(odd_extension(GraphFunction.from_function(spec, lambda x, y: 2 * y)))
    assert max(out["fine"]) < 1e-12
