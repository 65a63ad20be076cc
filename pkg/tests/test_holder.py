import numpy as np
import pytest

from kinschauder.fields import SeparableField, bump_field, constant_factor, cos_factor, poly_factor
from kinschauder.geometry import KineticCylinder, PhasePoint
from kinschauder.holder import (GridSpec, SampledField, SeminormSpec, check_interpolation,
                                quantity_seminorm, seminorm, sup_norm)

Q1 = KineticCylinder.unit(1)


def _linear_v():
    return SeparableField.product(constant_factor(), [constant_factor()], [poly_factor([0, 1])])


def test_grid_refinement_nests():
    g = GridSpec.uniform(1, 5)
    assert g.refined().shape == (9, 9, 9)
    assert GridSpec(1, (1,), (3,)).refined().shape == (1, 1, 5)


def test_holder_of_linear_function_in_v():
    # |v - v'| / rho^a is largest for the widest v separation with t, x equal
    fld = SampledField.from_function(Q1, GridSpec.uniform(1, 5), _linear_v())
    val, n = quantity_seminorm(fld, "u", 0.5)
    assert n > 0
    assert val == pytest.approx(2.0 ** 0.5, rel=1e-12)


@pytest.mark.parametrize("kind", ["alpha", "one_plus", "two_plus", "primed_two_plus",
                                  "double_primed_three_plus", "alpha_x", "alpha_t"])
def test_constant_field_vanishes(kind):
    c = SeparableField.product(constant_factor(3.0), [constant_factor()], [constant_factor()])
    fld = SampledField.from_function(Q1, GridSpec.uniform(1, 5), c)
    assert seminorm(fld, SeminormSpec(kind, 0.5)).value == 0.0


def test_quadratic_has_constant_hessian():
    u = SeparableField.product(constant_factor(), [constant_factor()], [poly_factor([0, 0, 1])])
    est = seminorm(SampledField.from_function(Q1, GridSpec.uniform(1, 5), u),
                   SeminormSpec("two_plus", 0.5))
    assert est.components["hess_v"] == 0.0


@pytest.mark.parametrize("kind, degree", [("alpha", 0), ("one_plus", 1), ("two_plus", 2)])
@pytest.mark.parametrize("r", [0.5, 0.25])
def test_homogeneity_under_dilation(kind, degree, r):
    # [u o delta_r]_{Q_1} = r^{k + a} [u]_{Q_r} when both grids are images of each other
    a = 0.5
    u = bump_field(1, v_tilt=0.3, t_half=2.0, x_half=2.0, v_half=2.0)
    grid = GridSpec.uniform(1, 5)
    small = SampledField.from_function(KineticCylinder(PhasePoint.origin(1), r), grid, u)
    scaled = SampledField.from_function(Q1, grid, u.rescaled(r * r, [r ** 3], [r]))
    s_small = seminorm(small, SeminormSpec(kind, a)).value
    s_scaled = seminorm(scaled, SeminormSpec(kind, a)).value
    assert s_small > 0
    assert s_scaled == pytest.approx(r ** (degree + a) * s_small, rel=1e-9)


def test_refinement_is_monotone_when_parent_fits_half_budget():
    # 9^3 nodes give 265356 pairs <= budget / 2, so the 17^3 grid keeps all of them
    u = bump_field(1, v_tilt=0.3)
    vals = []
    for n in (5, 9, 17):
        fld = SampledField.from_function(Q1, GridSpec.uniform(1, n), u)
        vals.append(seminorm(fld, SeminormSpec("two_plus", 0.5), pair_budget=600_000).value)
    assert vals[0] <= vals[1] <= vals[2]


def test_seed_controls_sampling_only_when_budget_binds():
    u = bump_field(1, v_tilt=0.3)
    fld = SampledField.from_function(Q1, GridSpec.uniform(1, 9), u)
    a = quantity_seminorm(fld, "u", 0.5, pair_budget=10 ** 7, seed=1)
    b = quantity_seminorm(fld, "u", 0.5, pair_budget=10 ** 7, seed=2)
    assert a == b
    c = quantity_seminorm(fld, "u", 0.5, pair_budget=5_000, seed=1)
    assert c == quantity_seminorm(fld, "u", 0.5, pair_budget=5_000, seed=1)
    assert c[0] <= a[0] + 1e-15


def test_finite_differences_agree_with_analytic():
    u = bump_field(1, v_tilt=0.3)
    grid = GridSpec.uniform(1, 33)
    analytic = SampledField.from_function(Q1, grid, u)
    fd = SampledField(Q1, grid, analytic.values)
    assert not fd.has_analytic()
    # second-order differences at spacing 1/16
    for name, rel in (("dt", 0.05), ("grad_x", 0.05), ("grad_v", 0.05), ("hess_v", 0.1)):
        assert sup_norm(fd, name) == pytest.approx(sup_norm(analytic, name), rel=rel)


def test_tensor_values():
    grid = GridSpec.uniform(1, 5)
    probe = SampledField(Q1, grid, np.zeros(grid.shape))
    vals = np.stack([probe.V[..., 0], 2 * probe.V[..., 0]], axis=-1)
    fld = SampledField(Q1, grid, vals)
    assert fld.component_shape == (2,)
    val, _ = quantity_seminorm(fld, "u", 0.5)
    assert val == pytest.approx(5 ** 0.5 * 2 ** 0.5, rel=1e-12)


def test_moving_cylinder_time_seminorm_uses_evaluator():
    u = SeparableField.product(poly_factor([0, 1]), [constant_factor()], [constant_factor()])
    Q = KineticCylinder(PhasePoint(0.0, [0.0], [2.0]), 1.0)
    fld = SampledField.from_function(Q, GridSpec.uniform(1, 5), u)
    val, n = quantity_seminorm(fld, "u", 0.5, "alpha_t")
    assert n > 0 and val > 0


FIELDS = {
    "bump": bump_field(1),
    "tilted": bump_field(1, v_tilt=0.3),
    "linear-v": _linear_v(),
    "polynomial": SeparableField.product(poly_factor([1, 0.5]), [poly_factor([0.2, 1, 0.3])],
                                         [poly_factor([0, 0.3, 1, -0.4])]),
    "oscillating": SeparableField.product(cos_factor(2.0, 0.3), [cos_factor(1.5)],
                                          [cos_factor(3.0, -0.2)]),
}


@pytest.mark.parametrize("name", sorted(FIELDS))
def test_interpolation_constant_is_moderate(name):
    fld = SampledField.from_function(Q1, GridSpec.uniform(1, 9), FIELDS[name])
    rep = check_interpolation(fld, 0.5, (0.25, 0.5, 1.0))
    assert rep.passed, rep.summary()
    assert np.isfinite(rep.measured["C"])


def test_interpolation_linear_field_needs_holder_constant():
    fld = SampledField.from_function(Q1, GridSpec.uniform(1, 5), _linear_v())
    rep = check_interpolation(fld, 0.5, (1.0,))
    ua = quantity_seminorm(fld, "u", 0.5)[0]
    assert rep.measured["lhs [u]_a"] == pytest.approx(ua)
    assert rep.measured["C [u]_a"] >= ua - 1e-12


@pytest.mark.parametrize("bad", [dict(kind="nope"), dict(kind="alpha", alpha=1.0),
                                 dict(kind="alpha", alpha=0.5, beta=0.0)])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        SeminormSpec(**bad)
