"""The twelve acceptance criteria at their stated tolerances.

Each test records one pass/fail line (shown in the terminal summary) and then
asserts the same outcome.
"""
import time

import numpy as np
import pytest

from kinschauder.densities import maxwellian
from kinschauder.fields import bump_field
from kinschauder.fundamental import (moment_scaling_report, normalization_report,
                                     residual_report, solver_accuracy_report)
from kinschauder.geometry import KineticCylinder, algebra_report
from kinschauder.holder import GridSpec, SampledField, check_interpolation
from kinschauder.landau import (HydroBounds, appendix_bounds_check, barrier_check,
                                barrier_samples, estimate_mu0, oracle_report,
                                window_stability_report)
from kinschauder.schauder import bootstrap_sweep, constant_operators, run_constant_case, \
    standard_sources

from test_holder import FIELDS


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _worst(rep):
    bad = rep.failures()
    return f"{len(rep.comparisons)} checks" if not bad else \
        "; ".join(f"{c.quantity}={c.measured:.4g}" for c in bad[:3])


@pytest.mark.parametrize("d", [1, 3])
def test_c01_fundamental_solution_residual(criterion, d):
    rep, dt = _timed(lambda: residual_report(d=d, n=1000, seed=0, rtol=1e-9))
    ok = criterion(1, f"Gamma residual <= 1e-9 Gamma at 1000 points, d={d}", rep.passed,
                   f"max rel {rep.measured['max |residual|/Gamma']:.2e}, "
                   f"{dt:.2f}s")
    assert ok, rep.summary()


def test_c02_normalization(criterion):
    rep, dt = _timed(lambda: normalization_report((0.1, 0.5, 1.0), d=1, tol=1e-6))
    dev = max(abs(v - 1) for v in rep.measured.values())
    ok = criterion(2, "unit mass within 1e-6 at t in {0.1, 0.5, 1}", rep.passed,
                   f"max |mass-1| {dev:.1e}, {dt:.2f}s")
    assert ok, rep.summary()


def test_c03_moment_scaling(criterion):
    rep, dt = _timed(lambda: moment_scaling_report(d=1, times=(0.1, 0.2, 0.4, 0.8),
                                                   max_weight=3,
                                                   pq=((0, 0), (0, 1), (1, 0), (1, 1)),
                                                   tol=0.05))
    dev = max(abs(c.measured - c.predicted) for c in rep.comparisons)
    ok = criterion(3, "moment log-log slopes within 0.05", rep.passed and dt < 120,
                   f"{len(rep.comparisons)} slopes, max dev {dev:.1e}, {dt:.1f}s")
    assert ok, rep.summary()


@pytest.mark.slow
def test_c04_convolution_solver(criterion):
    rep, dt = _timed(lambda: solver_accuracy_report(bump_field(1, v_tilt=0.3), n=17, tol=1e-3))
    err = rep.measured["relative Linf error"]
    ok = criterion(4, "solver relative Linf error <= 1e-3 on 17^3 points", rep.passed,
                   f"error {err:.2e}, {dt:.0f}s")
    assert ok, rep.summary()


@pytest.mark.slow
def test_c05_constant_schauder(criterion):
    t0 = time.perf_counter()
    lines, ok = [], True
    for sname, g in standard_sources(1).items():
        for oname, op in constant_operators(1, (1.0, 4.0)).items():
            r = run_constant_case(op, g, 0.5, 0.5, n_coarse=7)
            good = np.isfinite(r.ratio) and r.refinement_change <= 0.3
            ok &= bool(good)
            lines.append(f"{sname}/{oname}: {r.refinement_trace[0]:.3g}->"
                         f"{r.refinement_trace[1]:.3g}")
    dt = time.perf_counter() - t0
    criterion(5, "Schauder ratio finite and within 30% across a doubling",
              ok and dt < 600, "; ".join(lines) + f"; {dt:.0f}s")
    assert ok


def test_c06_interpolation(criterion):
    t0 = time.perf_counter()
    Q1 = KineticCylinder.unit(1)
    constants = {}
    for name, u in FIELDS.items():
        fld = SampledField.from_function(Q1, GridSpec.uniform(1, 9), u)
        rep = check_interpolation(fld, 0.5, (0.25, 0.5, 1.0))
        constants[name] = rep.measured["C"]
    C = max(constants.values())
    dt = time.perf_counter() - t0
    ok = criterion(6, "one C <= 1e3 for all seven inequalities on 5 fields",
                   bool(np.isfinite(C) and C <= 1e3 and dt < 60), f"C = {C:.3g}, {dt:.1f}s")
    assert ok, constants


def test_c07_landau_oracles(criterion):
    rep, dt = _timed(lambda: oracle_report(maxwellian(3), tol=1e-4))
    ok = criterion(7, "a(0) = (4pi/3) I and c(0) = 2pi within 1e-4", rep.passed,
                   f"{_worst(rep)}, {dt:.1f}s")
    assert ok, rep.summary()


def test_c08_growth_exponents(criterion):
    d = 3
    e = np.array([1.0, 0.3, -0.2])
    V = np.geomspace(2.0, 10.0, 8)[:, None] * (e / np.linalg.norm(e))
    rep, dt = _timed(lambda: appendix_bounds_check(maxwellian(d), HydroBounds.for_density(d, -1.0),
                                                   V, tol=0.1))
    exps = ", ".join(f"{k} {rep.measured[f'exponent {k}']:.3f}"
                     for k in ("a_perp", "a_par", "b", "c"))
    ok = criterion(8, "coefficient growth exponents within 0.1", rep.passed, f"{exps}, {dt:.1f}s")
    assert ok, rep.summary()


def test_c09_ellipticity_window(criterion):
    rep, dt = _timed(lambda: window_stability_report(maxwellian(3), (2.0, 4.0, 6.0, 8.0, 10.0),
                                                     tol=0.2))
    var = ", ".join(f"{c.quantity} {c.measured:.3f}" for c in rep.comparisons)
    ok = criterion(9, "transformed eigenvalue window varies <= 20%", rep.passed,
                   f"{var}, {dt:.1f}s")
    assert ok, rep.summary()


def test_c10_gaussian_barrier(criterion):
    f = maxwellian(3)

    def run():
        mu0 = estimate_mu0(f, np.linspace(2.0, 10.0, 9))
        return barrier_check(f, 0.5 * mu0, 5.0, barrier_samples(3, 200, 5.0, 10.0), 0.01), mu0

    (rep, mu0), dt = _timed(run)
    ok = criterion(10, "barrier ratio <= -0.01 at 200 samples", rep.passed and dt < 120,
                   f"mu0 {mu0:.4f}, max ratio {rep.measured['max_ratio']:.3f}, {dt:.1f}s")
    assert ok, rep.summary()


def test_c11_bootstrap_decay(criterion):
    rep, dt = _timed(lambda: bootstrap_sweep(maxwellian(3), (2.0, 3.0, 4.0, 5.0), stage=0,
                                             residual_tol=0.15))
    ok = criterion(11, "stage-0 seminorms decay like exp(-c |v0|^2), c <= mu", rep.passed,
                   f"slope {rep.measured['slope']:.4f}, residual "
                   f"{rep.measured['fit residual']:.3f}, {dt:.1f}s")
    assert ok, rep.summary()


def test_c12_geometry_algebra(criterion):
    rep, dt = _timed(lambda: algebra_report(n=10000, d=3, seed=0, rtol=1e-12))
    ok = criterion(12, "group law, homogeneity, left invariance to 1e-12 on 1e4 tuples",
                   rep.passed and dt < 1.0, f"{_worst(rep)}, {dt:.2f}s")
    assert ok, rep.summary()
