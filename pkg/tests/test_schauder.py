import math

import numpy as np
import pytest

from kinschauder.densities import maxwellian, zero_density
from kinschauder.fields import SeparableField, bump_field, constant_factor, poly_factor
from kinschauder.fundamental import ConstantOperator, ConvolutionRule
from kinschauder.geometry import KineticCylinder, PhasePoint
from kinschauder.holder import GridSpec, SeminormSpec
from kinschauder.landau import build_change_of_variables
from kinschauder.schauder import (EllipticityError, ManufacturedCase, SchauderReport,
                                  VariableCoefficient, bootstrap_stage, bootstrap_sweep,
                                  coefficient_growth_by_order, coefficient_regularity_check,
                                  constant_operators, measure_seminorm, run_constant_case,
                                  run_higher_constant_case, run_higher_variable_case, run_jobs,
                                  run_variable_case, standard_cases, standard_sources,
                                  zero_order_exponents)

FAST = ConvolutionRule(6, 8, 8)


def _covs(speeds=(2.0, 4.0, 6.0, 8.0, 10.0), d=3, gamma=-1.0):
    return [build_change_of_variables(PhasePoint(2.0, np.zeros(d), s * np.eye(d)[0]), gamma)
            for s in speeds]


def test_zero_order_exponents():
    p, q = zero_order_exponents(0.5)
    assert (p, q) == (7.5, 17.5)
    with pytest.raises(ValueError):
        zero_order_exponents(1.0)


def test_report_rejects_negative_entries():
    with pytest.raises(ValueError):
        SchauderReport("x", -1.0, 0.0, 0.0, 0.0)


def test_refinement_change():
    rep = SchauderReport("x", 1.0, 1.0, 0.0, 1.2, [1.0, 1.2])
    assert rep.refinement_change == pytest.approx(0.2)
    assert rep.to_verification().passed
    assert not SchauderReport("x", 1.0, 1.0, 0.0, 2.0, [1.0, 2.0]).to_verification().passed


def test_zero_source_gives_zero_ratio():
    rep = run_constant_case(ConstantOperator(np.eye(1)), SeparableField.zero(1), n_coarse=3,
                            rule=FAST)
    assert rep.lhs == 0 and rep.ratio == 0 and rep.refinement_trace == [0.0, 0.0]


def test_higher_zero_source():
    rep = run_higher_constant_case(ConstantOperator(np.eye(1)), SeparableField.zero(1),
                                   n_coarse=3, rule=FAST)
    assert rep.lhs == 0 and rep.ratio == 0


def test_source_must_sit_inside_cylinder():
    wide = bump_field(1, x_half=1.5)
    with pytest.raises(ValueError):
        run_constant_case(ConstantOperator(np.eye(1)), wide, n_coarse=3, rule=FAST)


def test_alpha_range():
    with pytest.raises(ValueError):
        run_constant_case(ConstantOperator(np.eye(1)), bump_field(1), alpha=1.5)


def test_constant_bump_ratio_is_finite_and_stable():
    rep = run_constant_case(ConstantOperator(np.eye(1)), bump_field(1), n_coarse=5,
                            rule=ConvolutionRule(8, 12, 12))
    assert math.isfinite(rep.ratio) and rep.ratio > 0
    assert rep.refinement_change <= 0.3


def test_higher_constant_lhs_positive_for_tilted_bump():
    rep = run_higher_constant_case(ConstantOperator(np.eye(1)), bump_field(1, v_tilt=0.3),
                                   n_coarse=3, rule=FAST)
    assert rep.lhs > 0 and math.isfinite(rep.ratio)


def test_standard_families():
    assert set(standard_sources(1)) == {"centered", "tilted", "offset"}
    ops = constant_operators(1)
    assert set(ops) == {"I", "diag(4)"}
    assert set(constant_operators(2)) == {"I", "diag(1, 4)"}
    for case in standard_cases(1).values():
        assert case.source_discrepancy() < 1e-10


def test_manufactured_source_matches_operator():
    case = ManufacturedCase(bump_field(2, v_tilt=0.2), VariableCoefficient.oscillating(2))
    assert case.source_discrepancy(n=128) < 1e-10


def test_ellipticity_violation_raises():
    bad = VariableCoefficient.scalar(
        SeparableField.product(constant_factor(), [constant_factor()],
                               [poly_factor([0.0, 1.0])]), 0.1, 2.0)
    case = ManufacturedCase(bump_field(1), bad)
    with pytest.raises(EllipticityError):
        run_variable_case(case, n_coarse=3)


def test_quadratic_case_has_vanishing_hessian_seminorm():
    rep = run_variable_case(standard_cases(1)["identity-quadratic"])
    assert rep.components["L1 lhs[hess_v]"] == pytest.approx(0.0, abs=1e-12)
    assert rep.ratio < 1


def test_oscillating_case_refinement():
    rep = run_variable_case(standard_cases(1)["oscillating-bump"])
    assert math.isfinite(rep.ratio)
    assert rep.refinement_change <= 0.3


def test_higher_variable_zero_solution():
    case = ManufacturedCase(SeparableField.zero(1), VariableCoefficient.oscillating(1))
    rep = run_higher_variable_case(case, n_coarse=3)
    assert rep.lhs == 0


def test_variable_with_identity_shares_source_seminorm_with_constant_run():
    """Both runs measure [g]_{a,Q_1} of the same source on the same grids."""
    u = bump_field(1, t_center=-0.5, t_half=0.4, x_half=0.8, v_half=0.8, v_tilt=0.2)
    op = ConstantOperator(np.eye(1))
    case = ManufacturedCase(u, op)
    var = run_variable_case(case, n_coarse=3)
    const = run_constant_case(op, case.g, n_coarse=3, rule=FAST)
    assert var.rhs_source == pytest.approx(const.rhs_source, rel=1e-8)


@pytest.mark.parametrize("r", [0.5, 0.25])
def test_seminorm_homogeneity_on_polynomial(r):
    """[u o delta_r]_{a,Q_1} = r^a [u]_{a,Q_r} by homogeneity of rho."""
    u = SeparableField.product(poly_factor([0.0, 1.0]), [poly_factor([0.0, 1.0])],
                               [poly_factor([0.0, 0.0, 0.0, 1.0])])
    spec = SeminormSpec("alpha", 0.5)
    grid = GridSpec.uniform(1, 5)
    big = measure_seminorm(u.rescaled(r * r, r ** 3, r),
                           KineticCylinder(PhasePoint.origin(1), 1.0), grid, spec)
    small = measure_seminorm(u, KineticCylinder(PhasePoint.origin(1), r), grid, spec)
    assert big == pytest.approx(r ** 0.5 * small, rel=1e-12)


def test_regularity_zero_density():
    rep = coefficient_regularity_check(zero_density(3), _covs((2.0, 4.0)), 0, n_v=3)
    assert rep.passed
    assert all(v == 0 for k, v in rep.measured.items() if k.startswith("["))


def test_regularity_growth_within_upper_bounds():
    rep = coefficient_regularity_check(maxwellian(3), _covs(), 0, n_v=3)
    assert rep.passed, rep.summary()


@pytest.mark.xfail(strict=True, reason="the growth exponents are upper bounds; the Maxwellian "
                   "sits far below them, so equality within 0.3 does not hold")
def test_regularity_exponent_equals_upper_bound():
    rep = coefficient_regularity_check(maxwellian(3), _covs(), 0, n_v=3)
    assert rep.measured["exponent A"] == pytest.approx(0.5 / 2 + 2, abs=0.3)


@pytest.mark.xfail(strict=True, reason="measured exponent step per derivative order stays "
                   "well below 1 + gamma/2")
def test_regularity_growth_by_order():
    rep = coefficient_growth_by_order(maxwellian(3), _covs((2.0, 4.0, 6.0)), n_v=3)
    assert rep.passed, rep.summary()


def test_bootstrap_zero_density():
    rep = bootstrap_sweep(zero_density(3), (2.0, 3.0))
    assert rep.passed
    assert rep.measured["|v0|=2:[f_z0]_a"] == 0


def test_bootstrap_stage_validation():
    with pytest.raises(ValueError):
        bootstrap_stage(maxwellian(3), PhasePoint(2.0, np.zeros(3), 2 * np.eye(3)[0]), stage=2)


def test_bootstrap_stage1_ratio_finite():
    rep = bootstrap_stage(maxwellian(3), PhasePoint(2.0, np.zeros(3), 3 * np.eye(3)[0]),
                          stage=1, n_v=3, n_v_coeff=3)
    assert rep.passed, rep.summary()
    assert rep.measured["lambda"] > 0


def test_bootstrap_stage1_degenerate_in_one_dimension():
    # I - w^ w^ vanishes for d = 1, so the diffusion matrix is identically zero
    rep = bootstrap_stage(maxwellian(1, gamma=-0.5), PhasePoint(2.0, np.zeros(1), np.array([3.0])),
                          stage=1, n_v=5, n_v_coeff=3)
    assert rep.measured["Lambda"] == pytest.approx(0.0, abs=1e-12)


def test_bootstrap_decay_sweep():
    rep = bootstrap_sweep(maxwellian(3), (2.0, 3.0, 4.0, 5.0), n_v=5)
    assert rep.passed, rep.summary()
    assert rep.measured["slope"] < 0


def test_run_jobs_preserves_order():
    jobs = [lambda k=k: k * k for k in range(6)]
    assert run_jobs(jobs, threads=3) == [k * k for k in range(6)]
    assert run_jobs(jobs) == [k * k for k in range(6)]
