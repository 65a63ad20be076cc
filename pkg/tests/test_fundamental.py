import math

import numpy as np
import pytest
from scipy import integrate

from kinschauder.fields import ShiftedSource, SeparableField, bump_field, constant_factor, poly_factor
from kinschauder.fundamental import (ConstantOperator, ConvolutionRule, GammaDerivativeSpec,
                                     QuadratureError, SingularPointError, derivative_specs, gamma,
                                     gamma_arrays, gamma_derivative, gamma_derivative_arrays,
                                     gamma_moment_integral, moment_scaling_report,
                                     normalization_report, residual, residual_report,
                                     solve_const_anisotropic, solve_const_isotropic,
                                     solve_on_points)
from kinschauder.geometry import galilean_shift
from conftest import point

RULE = ConvolutionRule(6, 8, 8)


def test_vanishes_for_nonpositive_time():
    assert gamma(point(-0.5, [0.0], [0.0])) == 0.0
    assert gamma(point(0.0, [0.1], [0.0])) == 0.0


def test_derivative_at_zero_time_is_singular():
    with pytest.raises(SingularPointError):
        gamma_derivative(GammaDerivativeSpec(0, (0,), (1,)), point(0.0, [0.0], [0.0]))


def test_zeroth_derivative_is_gamma(rng):
    t = rng.uniform(0.1, 2, 30)
    x, v = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
    np.testing.assert_allclose(gamma_derivative_arrays(GammaDerivativeSpec(0, (0, 0), (0, 0)),
                                                       t, x, v), gamma_arrays(t, x, v), rtol=1e-14)


def test_v_derivative_at_x_zero():
    z = point(0.6, np.zeros(3), [0.3, -0.2, 0.5])
    lhs = gamma_derivative(GammaDerivativeSpec(0, (0, 0, 0), (1, 0, 0)), z)
    assert lhs == pytest.approx(-2 * 0.3 / 0.6 * gamma(z), rel=1e-13)


@pytest.mark.parametrize("spec", [GammaDerivativeSpec(1, (0,), (0,)),
                                  GammaDerivativeSpec(0, (1,), (0,)),
                                  GammaDerivativeSpec(0, (0,), (2,)),
                                  GammaDerivativeSpec(1, (1,), (1,))])
def test_derivatives_against_finite_differences(spec):
    t, x, v = np.array([0.7]), np.array([[0.2]]), np.array([[-0.3]])
    h = 1e-4
    # reduce the highest order by one and difference numerically
    if spec.eta[0]:
        low, dz = GammaDerivativeSpec(spec.j, spec.beta, (spec.eta[0] - 1,)), (0, 0, h)
    elif spec.beta[0]:
        low, dz = GammaDerivativeSpec(spec.j, (spec.beta[0] - 1,), spec.eta), (0, h, 0)
    else:
        low, dz = GammaDerivativeSpec(spec.j - 1, spec.beta, spec.eta), (h, 0, 0)
    f = lambda s: gamma_derivative_arrays(low, t + s * dz[0], x + s * dz[1], v + s * dz[2])
    # Richardson-extrapolated central difference
    fd = (8 * (f(0.5) - f(-0.5)) - (f(1) - f(-1))) / (6 * h)
    np.testing.assert_allclose(gamma_derivative_arrays(spec, t, x, v), fd, rtol=1e-6)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_residual_vanishes(d):
    rep = residual_report(d=d, n=300, seed=d)
    assert rep.passed, rep.summary()


def test_unit_mass():
    assert normalization_report((0.1, 0.5, 1.0)).passed


@pytest.mark.parametrize("d", [1, 2])
def test_unit_mass_by_scipy(d):
    if d == 1:
        val, _ = integrate.dblquad(lambda w, y: gamma_arrays(0.5, [y], [w]), -6, 6, -6, 6,
                                   epsabs=1e-11)
    else:
        # Gamma factorizes over coordinates
        one, _ = integrate.dblquad(lambda w, y: gamma_arrays(0.5, [y], [w]), -6, 6, -6, 6,
                                   epsabs=1e-11)
        val = one ** 2
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("j, beta, eta, p, q", [(0, (0,), (1,), 0, 0), (0, (0,), (2,), 1, 0),
                                                (1, (0,), (0,), 0, 1), (0, (1,), (0,), 1, 1),
                                                (0, (0,), (3,), 0, 0)])
def test_moment_integral_matches_scipy(j, beta, eta, p, q):
    """Independent route: adaptive 2-D quadrature of the same weighted L^1 norm."""
    spec = GammaDerivativeSpec(j, beta, eta)
    t = 0.4
    m = gamma_moment_integral(spec, p, q, t)
    f = lambda w, y: abs(float(gamma_derivative_arrays(spec, t, [y], [w]))) * abs(y) ** p * abs(w) ** q
    ly, lw = 12 * t ** 1.5, 12 * t ** 0.5
    ref, ref_err = integrate.dblquad(f, -ly, ly, -lw, lw, epsabs=1e-10, epsrel=1e-8)
    assert m.error_estimate <= 1e-8 * ref
    # dblquad's own estimate is optimistic across the kinks of |d Gamma|
    assert abs(m.value - ref) <= m.error_estimate + ref_err + 1e-7 * ref


@pytest.mark.parametrize("j, beta, eta, p, q", [(0, (0,), (1,), 0, 0), (1, (0,), (0,), 0, 1),
                                                (0, (1,), (0,), 1, 1), (1, (1,), (1,), 0.5, 1.5)])
def test_hermite_route_agrees_with_polar(j, beta, eta, p, q):
    spec = GammaDerivativeSpec(j, beta, eta)
    polar = gamma_moment_integral(spec, p, q, 0.3, method="polar")
    herm = gamma_moment_integral(spec, p, q, 0.3, method="hermite")
    assert abs(herm.value - polar.value) <= herm.error_estimate + polar.error_estimate


def test_first_v_moment_closed_form():
    # int |d_v Gamma| = 2 int max_w Gamma dy = (2 / sqrt(pi)) t^(-1/2)
    for t in (0.1, 0.8):
        m = gamma_moment_integral(GammaDerivativeSpec(0, (0,), (1,)), 0, 0, t)
        exact = 2 / math.sqrt(math.pi * t)
        assert abs(m.value - exact) <= m.error_estimate


def test_derivative_spec_enumeration():
    specs = derivative_specs(1, 3)
    assert all(s.weighted_order <= 3 for s in specs)
    assert GammaDerivativeSpec(0, (1,), (0,)) in specs
    assert GammaDerivativeSpec(1, (0,), (1,)) in specs
    assert len(specs) == len(set(specs))


def test_moment_scaling_small():
    rep = moment_scaling_report(d=1, max_weight=2, pq=((0, 0), (1, 1)))
    assert rep.passed, rep.summary()


def test_moment_rtol_raises():
    with pytest.raises(QuadratureError):
        gamma_moment_integral(GammaDerivativeSpec(0, (0,), (3,)), 0.5, 0.5, 0.3, order=4,
                              rtol=1e-14, method="hermite")


def test_polar_route_is_one_dimensional_only():
    with pytest.raises(ValueError):
        gamma_moment_integral(GammaDerivativeSpec(0, (0, 0), (1, 0)), 0, 0, 0.3, d=2,
                              method="polar")


def test_constant_operator_validation():
    with pytest.raises(ValueError):
        ConstantOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        ConstantOperator(np.array([[-1.0]]))
    op = ConstantOperator(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(op.sqrt(), np.diag([1.0, 2.0]))
    assert (op.lam, op.Lam) == (1.0, 4.0)


def test_zero_source_solves_to_zero():
    assert solve_const_isotropic(SeparableField.zero(1), point(-0.3, [0.1], [0.2]), RULE) == 0.0


def test_identity_operator_matches_isotropic():
    g = bump_field(1)
    z = point(-0.3, [0.1], [0.2])
    iso = solve_const_isotropic(g, z, RULE)
    assert solve_const_anisotropic(ConstantOperator.identity(1), g, z, RULE) == pytest.approx(
        iso, rel=1e-14)


def test_translation_covariance():
    g = bump_field(1)
    z, z0 = point(-0.3, [0.1], [0.2]), point(0.2, [0.1], [0.3])
    shifted = solve_const_isotropic(ShiftedSource(g, z0), galilean_shift(z0, z), RULE)
    assert shifted == pytest.approx(solve_const_isotropic(g, z, RULE), rel=1e-9)


def test_four_identity_is_rescaled_isotropic():
    g = bump_field(1)
    z = point(-0.3, [0.1], [0.2])
    aniso = solve_const_anisotropic(ConstantOperator(4 * np.eye(1)), g, z, RULE)
    ref = solve_const_isotropic(g.rescaled(1.0, 2.0, 2.0), point(z.t, z.x / 2, z.v / 2), RULE)
    assert aniso == pytest.approx(ref, rel=1e-14)


def test_manufactured_solution_recovered_at_points(rng):
    u = bump_field(1, v_tilt=0.3)
    g = u.kinetic_operator()
    T = rng.uniform(-0.9, -0.1, 6)
    X, V = rng.uniform(-0.7, 0.7, (6, 1)), rng.uniform(-0.7, 0.7, (6, 1))
    got, err = solve_on_points(g, T, X, V, return_error=True)
    np.testing.assert_allclose(got[0], u(T, X, V), atol=5e-4)
    assert np.all(err < 1e-2)


def test_solution_derivatives(rng):
    u = bump_field(1, v_tilt=0.3)
    g = u.kinetic_operator()
    T = rng.uniform(-0.8, -0.2, 4)
    X, V = rng.uniform(-0.5, 0.5, (4, 1)), rng.uniform(-0.5, 0.5, (4, 1))
    ders = ((0, (0,), (2,)), (1, (0,), (0,)), (0, (1,), (0,)))
    got = solve_on_points(g, T, X, V, ders)
    for k, (j, b, e) in enumerate(ders):
        exact = u.partial(j, b, e)(T, X, V)
        np.testing.assert_allclose(got[k], exact, atol=5e-3 * max(1, np.abs(exact).max()))


def test_quadrature_tolerance_error():
    with pytest.raises(QuadratureError):
        solve_const_isotropic(bump_field(1), point(-0.3, [0.1], [0.2]),
                              ConvolutionRule(2, 3, 3), tol=1e-12)


@pytest.mark.parametrize("field, expected", [
    (SeparableField.product(poly_factor([0, 1]), [constant_factor()], [constant_factor()]), 1.0),
    (SeparableField.product(constant_factor(), [poly_factor([0, 1])], [constant_factor()]), 0.2),
    (SeparableField.product(constant_factor(), [constant_factor()], [poly_factor([0, 0, 1])]),
     -2.0),
])
def test_operator_residual(field, expected):
    assert residual(field, ConstantOperator.identity(1), point(-0.3, [0.1], [0.2])) == \
        pytest.approx(expected, abs=1e-14)
