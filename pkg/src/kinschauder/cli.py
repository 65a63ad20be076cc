"""Command-line entry point: ``python3 -m kinschauder <subcommand> [options]``.

Exit status: 0 success, 1 a failed comparison under ``--strict``, 2 usage or
configuration error, 3 numerical failure (quadrature, singular point,
ellipticity).
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .densities import bimodal, grid_density, maxwellian, shifted_maxwellian, zero_density
from .fields import bump_field
from .fundamental import (ConvolutionRule, QuadratureError, SingularPointError, gamma_arrays,
                          moment_scaling_report, normalization_report, residual_report,
                          solver_accuracy_report)
from .geometry import PhasePoint
from .landau import (HydroBounds, LandauQuadrature, appendix_bounds_check, barrier_check,
                     barrier_samples, build_change_of_variables, coefficients, estimate_mu0,
                     hydro_check, oracle_report, window_stability_report)
from .report import VerificationReport, emit_report
from .schauder import (EllipticityError, bootstrap_sweep, coefficient_growth_by_order,
                       coefficient_regularity_check, constant_operators, run_constant_case,
                       run_higher_constant_case, run_higher_variable_case, run_variable_case,
                       standard_cases, standard_sources)
from .selftest import selftest_report

__all__ = ["main", "build_parser", "dispatch", "SUBCOMMANDS", "build_density", "output_dir"]

SUBCOMMANDS = ("gamma-eval", "gamma-moments", "solve-const", "coeffs", "hydro", "bounds-check",
               "barrier", "schauder", "bootstrap", "selftest")
FAMILIES = ("constant", "higher-constant", "variable", "higher-variable", "regularity")
DEFAULT_OUT = "kll_out"
ANISOTROPY_FACTOR = 5.0


# -- parser -----------------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    # subparsers use SUPPRESS so a flag given before the subcommand is not reset
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", metavar="PATH", default=dflt(None), help="INI configuration file")
    p.add_argument("--out", metavar="DIR", default=dflt(None), help="output directory")
    p.add_argument("--seed", type=int, default=dflt(None), help="random seed")
    p.add_argument("--threads", type=int, default=dflt(1), help="worker cap")
    p.add_argument("--strict", action="store_true", default=dflt(False),
                   help="exit 1 when any comparison fails")
    p.add_argument("--expensive", action="store_true", default=dflt(False),
                   help="allow convolution and grid runs with d > 1")
    p.add_argument("--dim", type=int, default=dflt(None), help="override run.d")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinschauder",
                                     description="Numerical checks for kinetic Schauder estimates.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True
    helps = {
        "gamma-eval": "evaluate the fundamental solution at a point",
        "gamma-moments": "residual, unit mass and moment scaling of the fundamental solution",
        "solve-const": "recover a manufactured solution by convolution",
        "coeffs": "Landau coefficients of the configured density",
        "hydro": "mass, energy, entropy and moment bounds",
        "bounds-check": "large-|v| growth exponents and the transformed ellipticity window",
        "barrier": "Gaussian supersolution check",
        "schauder": "Schauder seminorm ratios for a case family",
        "bootstrap": "decay sweep of the pulled-back density",
        "selftest": "quick closed-form checks",
    }
    cmds = {}
    for name in SUBCOMMANDS:
        cmds[name] = sub.add_parser(name, help=helps[name])
        _global_flags(cmds[name], suppress=True)
    cmds["gamma-eval"].add_argument("--point", metavar="T,X..,V..",
                                    help="comma-separated t, x (d values), v (d values)")
    cmds["schauder"].add_argument("--family", choices=FAMILIES, default=None)
    cmds["bootstrap"].add_argument("--stage", type=int, choices=(0, 1), default=None)
    return parser


# -- helpers ----------------------------------------------------------------------

def output_dir(args, cfg) -> Path:
    """--out, then the configured directory, then $KLL_OUT, then ./kll_out."""
    for cand in (args.out, cfg.out, os.environ.get("KLL_OUT")):
        if cand:
            return Path(cand)
    return Path(DEFAULT_OUT)


def build_density(cfg):
    kc = cfg.kernel_constants
    d, g = cfg.d, cfg.gamma
    if cfg.density == "maxwellian":
        return maxwellian(d, g, cfg.mu, cfg.mass, kc)
    if cfg.density == "shifted-maxwellian":
        return shifted_maxwellian(d, g, cfg.mu, cfg.v_shift, kc)
    if cfg.density == "bimodal":
        return bimodal(d, g, cfg.mu, cfg.separation, kc)
    if cfg.density == "zero":
        return zero_density(d, g)
    try:
        f = grid_density(cfg.grid_file, g, cfg.envelope, kc)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"density.grid_file: {exc}", key="density.grid_file") from exc
    if f.d != d:
        raise ConfigError(f"density.grid_file: grid has d = {f.d}, run.d = {d}",
                          key="density.grid_file")
    return f


def _quad(cfg):
    return LandauQuadrature(cfg.rho0, cfg.n_radial, cfg.n_theta, cfg.n_phi, cfg.n_hermite)


def _rule(cfg):
    return ConvolutionRule(cfg.n_s, cfg.n_a, cfg.n_b)


def _need_expensive(cfg, args, what):
    if cfg.d > 1 and not args.expensive:
        raise ConfigError(f"run.d: {what} with d = {cfg.d} needs --expensive", key="run.d")


def _direction(d):
    e = np.array([1.0, 0.3, -0.2])[:d]
    return e / np.linalg.norm(e)


def _point(args, cfg):
    d = cfg.d
    if args.point is not None:
        try:
            vals = tuple(float(s) for s in args.point.split(","))
        except ValueError as exc:
            raise ConfigError(f"--point: {exc}", key="gamma.point") from exc
        if len(vals) != 1 + 2 * d:
            raise ConfigError(f"--point: expected {1 + 2 * d} numbers", key="gamma.point")
    elif cfg.point is not None:
        vals = cfg.point
    else:
        vals = (1.0,) + (0.0,) * (2 * d)
    return PhasePoint(vals[0], np.array(vals[1:1 + d]), np.array(vals[1 + d:]))


# -- subcommands ------------------------------------------------------------------

def _gamma_eval(args, cfg):
    z = _point(args, cfg)
    val = float(gamma_arrays(np.array([z.t]), z.x[None], z.v[None])[0])
    print(repr(val))
    rep = VerificationReport(f"gamma-eval(d={cfg.d})")
    rep.measured.update({"t": z.t, "Gamma": val})
    return [rep]


def _gamma_moments(args, cfg):
    order = cfg.moment_order or None
    return [residual_report(cfg.d, seed=cfg.seed), normalization_report(d=cfg.d),
            moment_scaling_report(cfg.d, cfg.times, cfg.max_weight, tol=cfg.moment_tol,
                                  order=order)]


def _solve_const(args, cfg):
    _need_expensive(cfg, args, "the convolution solver")
    u_star = bump_field(cfg.d, v_tilt=0.3)
    return [solver_accuracy_report(u_star, cfg.n_solve, _rule(cfg), args.threads, A0=op.A0)
            for op in constant_operators(cfg.d, cfg.a0).values()]


def _coeffs(args, cfg):
    f = build_density(cfg)
    quad = _quad(cfg)
    rep = VerificationReport(f"coefficients({f.name})")
    speeds = np.r_[0.0, np.linspace(cfg.v_min, cfg.v_max, 5)]
    V = speeds[:, None] * _direction(cfg.d)
    res = coefficients(f, V, quad_rule=quad)
    for s, A, b, c in zip(speeds, res["a"], res["b"], res["c"]):
        ev = np.linalg.eigvalsh(A)
        tag = f"|v|={s:.4g}"
        rep.measured.update({f"min eig a@{tag}": ev[0], f"max eig a@{tag}": ev[-1],
                             f"|b|@{tag}": float(np.linalg.norm(b)), f"c@{tag}": float(c)})
        rep.compare(f"a psd@{tag}", ev[0], -1e-10 * max(abs(ev[-1]), 1.0), 0.0, "ge",
                    "coefficient-definitions")
    out = [rep]
    comps = f.components
    if (f.d == 3 and f.sampled is None and len(comps) == 1 and not np.any(comps[0].center)):
        out.append(oracle_report(f, quad_rule=quad))
    return out


def _hydro(args, cfg):
    f = build_density(cfg)
    return [hydro_check(f, HydroBounds.for_density(cfg.d, cfg.gamma))]


def _bounds(args, cfg):
    f = build_density(cfg)
    quad = _quad(cfg)
    V = np.geomspace(cfg.v_min, cfg.v_max, cfg.n_samples)[:, None] * _direction(cfg.d)
    bounds = HydroBounds.for_density(cfg.d, cfg.gamma)
    out = [appendix_bounds_check(f, bounds, V, cfg.bounds_tol, cfg.seed, quad)]
    if not f.is_zero:
        out.append(window_stability_report(f, cfg.window_speeds, cfg.t0, cfg.c1, cfg.window_tol,
                                           quad_rule=quad))
    return out


def _barrier(args, cfg):
    f = build_density(cfg)
    quad = _quad(cfg)
    mu_bar = cfg.mu_bar
    rep_mu = None
    if mu_bar is None:
        if f.is_zero:
            raise ConfigError("barrier.mu_bar: cannot be estimated for a zero density; set it",
                              key="barrier.mu_bar")
        try:
            mu0 = estimate_mu0(f, np.linspace(cfg.v_min, cfg.v_max, 9), quad, cfg.seed)
        except ValueError as exc:
            raise ConfigError(f"barrier.mu_bar: {exc}", key="barrier.mu_bar") from exc
        mu_bar = 0.5 * mu0
        rep_mu = mu0
    V = barrier_samples(cfg.d, cfg.barrier_samples, cfg.r0, cfg.r_max, cfg.seed)
    rep = barrier_check(f, mu_bar, cfg.r0, V, cfg.margin, quad)
    if rep_mu is not None:
        rep.measured["mu0 estimate"] = rep_mu
    rep.measured["mu_bar"] = mu_bar
    return [rep]


def _anisotropy(ratios: dict, sources) -> VerificationReport:
    rep = VerificationReport("anisotropy")
    for src in sources:
        iso = ratios.get((src, "I"))
        for (s, opname), r in ratios.items():
            if s != src or opname == "I" or not iso:
                continue
            q = r / iso
            rep.measured[f"{src}: {opname}/I"] = q
            rep.compare(f"{src}: {opname}/I <= {ANISOTROPY_FACTOR:g}", q, ANISOTROPY_FACTOR, 0.0,
                        "le", "schauder-estimate")
            rep.compare(f"{src}: {opname}/I >= 1/{ANISOTROPY_FACTOR:g}", q,
                        1 / ANISOTROPY_FACTOR, 0.0, "ge", "schauder-estimate")
    return rep


def _schauder(args, cfg):
    family = args.family or cfg.family
    tol = cfg.refinement_tol
    out = []
    if family in ("constant", "higher-constant"):
        _need_expensive(cfg, args, "the convolution solver")
        run = run_constant_case if family == "constant" else run_higher_constant_case
        extra = {"beta": cfg.beta} if family == "constant" else {}
        sources = standard_sources(cfg.d)
        ratios = {}
        for sname, g in sources.items():
            for oname, op in constant_operators(cfg.d, cfg.a0).items():
                r = run(op, g, cfg.alpha, n_coarse=cfg.n_coarse, rule=_rule(cfg),
                        threads=args.threads, pair_budget=cfg.pair_budget, seed=cfg.seed,
                        case_id=f"{family}({sname}, A0={oname})", **extra)
                ratios[(sname, oname)] = r.ratio
                out.append(r.to_verification(tol))
        out.append(_anisotropy(ratios, sources))
    elif family in ("variable", "higher-variable"):
        _need_expensive(cfg, args, "variable-coefficient grids")
        for case in standard_cases(cfg.d).values():
            if family == "variable":
                r = run_variable_case(case, cfg.alpha, cfg.beta, cfg.n_coarse, cfg.pair_budget,
                                      cfg.seed)
            else:
                r = run_higher_variable_case(case, cfg.alpha, cfg.n_coarse, cfg.pair_budget,
                                             cfg.seed)
            out.append(r.to_verification(tol))
    else:
        f = build_density(cfg)
        quad = _quad(cfg)
        covs = [build_change_of_variables(PhasePoint(cfg.t0, np.zeros(cfg.d),
                                                     s * np.eye(cfg.d)[0]), cfg.gamma, cfg.c1)
                for s in cfg.window_speeds]
        out.append(coefficient_regularity_check(f, covs, 0, cfg.alpha, tol=tol,
                                                quad_rule=quad, seed=cfg.seed))
        if not f.is_zero:
            out.append(coefficient_growth_by_order(f, covs, (0, 1), cfg.alpha, tol=tol,
                                                   quad_rule=quad))
    return out


def _bootstrap(args, cfg):
    f = build_density(cfg)
    stage = cfg.stage if args.stage is None else args.stage
    return [bootstrap_sweep(f, cfg.speeds, stage, cfg.alpha, cfg.t0, cfg.c1, cfg.residual_tol,
                            args.threads, n_v=cfg.n_v, quad_rule=_quad(cfg), seed=cfg.seed)]


def _selftest(args, cfg):
    return [selftest_report(cfg.seed)]


_HANDLERS = {
    "gamma-eval": _gamma_eval, "gamma-moments": _gamma_moments, "solve-const": _solve_const,
    "coeffs": _coeffs, "hydro": _hydro, "bounds-check": _bounds, "barrier": _barrier,
    "schauder": _schauder, "bootstrap": _bootstrap, "selftest": _selftest,
}


def _resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.dim is not None:
        changes["d"] = args.dim
    if changes:
        cfg = parse_config(serialize_config(dataclasses.replace(cfg, **changes)))
    return cfg


def dispatch(args) -> int:
    """Run one parsed command line and return its exit status."""
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1", key="threads")
    cfg = _resolve_config(args)
    reports = _HANDLERS[args.command](args, cfg)
    emit_report(reports, output_dir(args, cfg), cfg.formats, stem=args.command)
    for r in reports:
        print(r.summary())
    ok = all(r.passed for r in reports)
    return 1 if (args.strict or cfg.strict) and not ok else 0


def _join_point(argv):
    # "--point -0.5,0,0" would otherwise be read as an unknown option
    out, it = [], iter(argv)
    for a in it:
        if a == "--point":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--point={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_point(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, SingularPointError, EllipticityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
