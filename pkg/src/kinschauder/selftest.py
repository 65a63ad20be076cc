"""Quick closed-form checks across every module, collected into one report.

Each check is cheap (grids of a few nodes, single-point convolutions), so the
whole suite runs in well under a minute.
"""
from __future__ import annotations

import math
import tempfile
import time

import numpy as np

from . import geometry as geo
from .config import ConfigError, parse_config, serialize_config
from .densities import maxwellian, zero_density
from .fields import SeparableField, ShiftedSource, bump_field, constant_factor, poly_factor
from .fundamental import (ConstantOperator, ConvolutionRule, GammaDerivativeSpec, gamma,
                          gamma_derivative, residual, solve_const_anisotropic,
                          solve_const_isotropic)
from .geometry import KineticCylinder, PhasePoint
from .holder import GridSpec, SampledField, SeminormSpec, check_interpolation, seminorm
from .landau import (barrier_check, build_change_of_variables, coefficients, estimate_mu0,
                     hydro_moments, pullback_seminorm_bound, transformed_on_points)
from .report import VerificationReport, emit_report
from .schauder import (ManufacturedCase, VariableCoefficient, bootstrap_stage,
                       coefficient_regularity_check, measure_seminorm, run_constant_case,
                       run_variable_case)

__all__ = ["selftest_report"]

_TOL = 1e-12


def _pt(t, x, v):
    return PhasePoint(t, np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(v, float)))


def _geometry(rep, rng):
    e1 = np.array([1.0, 0.0, 0.0])
    o3 = np.zeros(3)
    z = _pt(rng.uniform(-1, 1), rng.normal(size=3), rng.normal(size=3))
    z0 = _pt(1.0, o3, e1)

    def dist(a, b):
        return max(abs(a.t - b.t), float(np.max(np.abs(a.x - b.x))),
                   float(np.max(np.abs(a.v - b.v))))

    rep.compare("shift by origin", dist(geo.galilean_shift(PhasePoint.origin(3), z), z), 0, _TOL)
    rep.compare("shift of inverse", dist(geo.galilean_shift(z, geo.galilean_inverse(z, z0)), z0),
                0, _TOL)
    rep.compare("shift example", dist(geo.galilean_shift(z0, _pt(1, o3, o3)), _pt(2, e1, e1)),
                0, _TOL)
    rep.compare("inverse of self", dist(geo.galilean_inverse(z, z), PhasePoint.origin(3)), 0,
                _TOL)
    rep.compare("inverse example", dist(geo.galilean_inverse(z0, _pt(2, e1, e1)),
                                        _pt(1, o3, o3)), 0, _TOL)
    rep.compare("dilate by 1", dist(geo.dilate(1.0, z), z), 0, _TOL)
    rep.compare("dilate example", dist(geo.dilate(2.0, _pt(1, e1, e1)), _pt(4, 8 * e1, 2 * e1)),
                0, _TOL)
    rep.compare("dilate group", dist(geo.dilate(0.5, geo.dilate(2.0, z)), z), 0, _TOL)
    rep.compare("rho(z, z)", geo.quasimetric(z, z), 0, _TOL)
    rep.compare("rho time example", geo.quasimetric(PhasePoint.origin(3), _pt(0.01, o3, o3)),
                0.1, _TOL)
    rep.compare("rho drift example", geo.quasimetric(_pt(0, o3, e1), _pt(0.01, 0.01 * e1, e1)),
                0.1, _TOL)
    Q = KineticCylinder.unit(3)
    rep.compare("origin in Q1", float(geo.cylinder_contains(Q, PhasePoint.origin(3))), 1, 0)
    rep.compare("t=-2 outside Q1", float(geo.cylinder_contains(Q, _pt(-2, o3, o3))), 0, 0)


def _holder(rep):
    d = 1
    dom = KineticCylinder.unit(d)
    grid = GridSpec.uniform(d, 5)
    const = SeparableField.product(constant_factor(2.0), [constant_factor()],
                                   [constant_factor()])
    fld = SampledField.from_function(dom, grid, const)
    for kind in ("alpha", "one_plus", "two_plus", "primed_two_plus", "double_primed_three_plus"):
        rep.compare(f"constant field [{kind}]",
                    seminorm(fld, SeminormSpec(kind, 0.5)).value, 0, 0)
    quad = SeparableField.product(constant_factor(), [constant_factor()],
                                  [poly_factor([0.0, 0.0, 1.0])])
    est = seminorm(SampledField.from_function(dom, grid, quad), SeminormSpec("two_plus", 0.5))
    hess = [v for k, v in est.components.items() if "hess" in k]
    rep.compare("v^2: [D2_v u]_a", max(hess, default=math.nan), 0, _TOL)
    r = check_interpolation(fld, 0.5, (0.25, 0.5, 1.0))
    rep.compare("constant field: interpolation C", r.measured["C"], 0, 0)
    lin = SeparableField.product(constant_factor(), [constant_factor()], [poly_factor([0, 1])])
    lf = SampledField.from_function(dom, grid, lin)
    r = check_interpolation(lf, 0.5, (1.0,))
    ua = seminorm(lf, SeminormSpec("alpha", 0.5)).value
    rep.compare("v1: first inequality C >= [u]_a", r.measured["C [u]_a"], ua, 1e-12, "ge")


def _fundamental(rep):
    z = _pt(0.7, [0.2], [-0.4])
    rep.compare("zeroth derivative", gamma_derivative(GammaDerivativeSpec(0, (0,), (0,)), z),
                gamma(z), 1e-15 * gamma(z) + 1e-300)
    z3 = _pt(0.6, np.zeros(3), [0.3, -0.2, 0.5])
    lhs = gamma_derivative(GammaDerivativeSpec(0, (0, 0, 0), (1, 0, 0)), z3)
    rep.compare("d_v1 Gamma at x = 0", lhs, -2 * 0.3 / 0.6 * gamma(z3), 1e-12 * gamma(z3), "abs")
    rule = ConvolutionRule(6, 8, 8)
    zero = SeparableField.zero(1)
    zq = _pt(-0.3, [0.1], [0.2])
    rep.compare("g = 0 solves to 0", solve_const_isotropic(zero, zq, rule), 0, 0)
    g = bump_field(1)
    iso = solve_const_isotropic(g, zq, rule)
    rep.compare("A0 = I matches isotropic",
                solve_const_anisotropic(ConstantOperator(np.eye(1)), g, zq, rule), iso, 1e-14)
    z0 = _pt(0.2, [0.1], [0.3])
    shifted = solve_const_isotropic(ShiftedSource(g, z0), geo.galilean_shift(z0, zq), rule)
    rep.compare("translation covariance", shifted, iso, 1e-10)
    aniso = solve_const_anisotropic(ConstantOperator(4 * np.eye(1)), g, zq, rule)
    ref = solve_const_isotropic(g.rescaled(1.0, 2.0, 2.0), _pt(zq.t, zq.x / 2, zq.v / 2), rule)
    rep.compare("A0 = 4I via rescaling", aniso, ref, 1e-14)
    op = ConstantOperator(np.eye(1))
    t_field = SeparableField.product(poly_factor([0, 1]), [constant_factor()],
                                     [constant_factor()])
    x_field = SeparableField.product(constant_factor(), [poly_factor([0, 1])],
                                     [constant_factor()])
    rep.compare("L t = 1", residual(t_field, op, zq), 1.0, _TOL)
    rep.compare("L x1 = v1", residual(x_field, op, zq), zq.v[0], _TOL)


def _landau(rep):
    f0 = zero_density(3)
    V = np.array([[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]])
    res = coefficients(f0, V)
    rep.compare("f = 0: |a|", float(np.max(np.abs(res["a"]))), 0, 0)
    rep.compare("f = 0: |b|", float(np.max(np.abs(res["b"]))), 0, 0)
    rep.compare("f = 0: |c|", float(np.max(np.abs(res["c"]))), 0, 0)
    f = maxwellian(3)
    r0 = coefficients(f, np.zeros((1, 3)))
    A = r0["a"][0]
    rep.compare("radial a(0) off-diagonal", float(np.max(np.abs(A - np.diag(np.diag(A))))),
                0, 1e-10)
    rep.compare("radial a(0) diagonal spread", float(np.ptp(np.diag(A))), 0, 1e-10)
    rep.compare("radial b(0)", float(np.linalg.norm(r0["b"][0])), 0, 1e-10)
    m = hydro_moments(f)
    p32 = math.pi ** 1.5
    rep.compare("gaussian mass", m["mass"], p32, 1e-10 * p32)
    rep.compare("gaussian energy", m["energy"], 1.5 * p32, 1e-10 * p32)
    rep.compare("gaussian entropy", m["entropy"], -1.5 * p32, 1e-10 * p32)
    cov = build_change_of_variables(_pt(2.0, np.zeros(3), [0.5, 0, 0]), -1.0)
    tr = transformed_on_points(f0, cov, cov.r1, [0.0], np.zeros((1, 3)), np.zeros((1, 3)))
    rep.compare("f = 0: transformed |A|+|B|+|C|",
                float(np.abs(tr["A"]).sum() + np.abs(tr["B"]).sum() + np.abs(tr["C"]).sum()),
                0, 0)
    tr = transformed_on_points(f, cov, cov.r1, [0.0], np.zeros((1, 3)), np.zeros((1, 3)), "a")
    direct = coefficients(f, cov.base.v[None], "a")["a"][0]
    rep.compare("T = I: A(0) = a(z0)", float(np.max(np.abs(tr["A"][0] - direct))), 0, 1e-12)
    rep.compare("pullback factor at alpha -> 0",
                pullback_seminorm_bound(cov, 0, 1e-12, 1.0), 1.0, 1e-9)
    rep.compare("pullback of 0", pullback_seminorm_bound(cov, 1, 0.5, 0.0), 0, 0)
    b = barrier_check(f0, 0.1, 5.0, np.array([[6.0, 0, 0]]))
    rep.compare("f = 0 barrier reported as failing", float(b.passed), 0, 0)
    speeds = np.linspace(2, 10, 5)
    mu1 = estimate_mu0(f, speeds)
    mu2 = estimate_mu0(f.scaled(2.0), speeds)
    rep.compare("mu0 invariant under f -> 2f", mu2, mu1, 1e-12 * mu1)


def _schauder(rep):
    d = 1
    op = ConstantOperator(np.eye(d))
    rule = ConvolutionRule(4, 6, 6)
    r = run_constant_case(op, SeparableField.zero(d), n_coarse=3, rule=rule)
    rep.compare("g = 0: ratio", r.ratio, 0, 0)
    rep.compare("g = 0: lhs", r.lhs, 0, 0)
    quad = (SeparableField.product(constant_factor(), [constant_factor()],
                                   [poly_factor([0.0, 0.0, 1.0])])
            + SeparableField.product(poly_factor([1.0, 0.5]), [poly_factor([0.2, 1.0])],
                                     [poly_factor([0.0, 0.3])]))
    case = ManufacturedCase(quad, op, "quadratic")
    r = run_variable_case(case, n_coarse=3)
    hess = [v for k, v in r.components.items() if k.startswith("L1") and "hess" in k]
    rep.compare("A = I, quadratic u*: [D2_v u*]_a", max(hess, default=math.nan), 0, _TOL)
    rep.compare("A = I, quadratic u*: ratio finite", r.ratio, 1e300, 0, "le")
    dom = KineticCylinder.unit(d)
    grid = GridSpec.uniform(d, 5)
    direct = measure_seminorm(case.g, dom, grid, SeminormSpec("alpha", 0.5))
    rep.compare("A = I: source term matches constant case", r.rhs_source, direct,
                1e-12 * max(direct, 1.0))
    z = ManufacturedCase(SeparableField.zero(d), VariableCoefficient.oscillating(d), "zero")
    r = run_variable_case(z, n_coarse=3)
    rep.compare("u* = 0: lhs", r.lhs, 0, 0)
    f0 = zero_density(3)
    covs = [build_change_of_variables(_pt(2.0, np.zeros(3), [s, 0, 0]), -1.0) for s in (2, 4)]
    reg = coefficient_regularity_check(f0, covs, n_v=3)
    rep.compare("f = 0: coefficient seminorms", float(reg.passed), 1, 0)
    b = bootstrap_stage(f0, _pt(2.0, np.zeros(3), [3.0, 0, 0]), stage=0, n_v=3)
    rep.compare("f = 0: bootstrap seminorm", b.measured["|f_z0|_a"], 0, 0)


def _config(rep):
    cfg = parse_config("")
    rep.compare("defaults: d", cfg.d, 3, 0)
    rep.compare("defaults: gamma", cfg.gamma, -1.0, 0)
    rep.compare("defaults: density is maxwellian", float(cfg.density == "maxwellian"), 1, 0)
    try:
        parse_config("[run]\ngamma = 0.5\n")
        rejected = 0.0
    except ConfigError:
        rejected = 1.0
    rep.compare("gamma = 0.5 rejected", rejected, 1, 0)
    rep.compare("round trip", float(parse_config(serialize_config(cfg)) == cfg), 1, 0)
    with tempfile.TemporaryDirectory() as tmp:
        paths = emit_report([VerificationReport("empty")], tmp)
        lines = [p.read_text().splitlines() for p in paths if p.suffix == ".csv"][0]
        rep.compare("empty report: header only", len(lines), 1, 0)


def selftest_report(seed: int = 0) -> VerificationReport:
    """Run every quick check; the report passes iff all of them do."""
    t0 = time.perf_counter()
    rep = VerificationReport("selftest")
    rng = np.random.default_rng(seed)
    for name, fn in (("geometry", lambda r: _geometry(r, rng)), ("holder", _holder),
                     ("fundamental", _fundamental), ("landau", _landau),
                     ("schauder", _schauder), ("config", _config)):
        sub = VerificationReport(name)
        fn(sub)
        for c in sub.comparisons:
            c.quantity = f"{name}: {c.quantity}"
            c.anchor = c.anchor or "closed-form"
            rep.comparisons.append(c)
    rep.runtime = time.perf_counter() - t0
    return rep
