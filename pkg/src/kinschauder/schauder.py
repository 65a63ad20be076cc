"""Empirical checks of the Schauder-type estimates.

Constant-coefficient cases solve for u by convolution with the fundamental
solution and compare weighted seminorms of u with those of the source.
Variable-coefficient cases start from a manufactured u* and derive the source
g = d_t u* + v.grad_x u* - tr(A D_v^2 u*) in closed form.

"There is a constant C" becomes: the measured ratio is finite and changes by
at most a fixed fraction when the sampling grid is refined once.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .densities import DensityField
from .fields import SeparableField, constant_factor
from .fundamental import (ConstantOperator, ConvolutionRule, solve_anisotropic_on_points,
                          solve_on_points)
from .geometry import KineticCylinder, PhasePoint
from .holder import (DEFAULT_PAIR_BUDGET, GridSpec, SampledField, SeminormSpec,
                     quantity_seminorm, seminorm, sup_norm)
from .landau import (DEFAULT_QUADRATURE, ChangeOfVariables, build_change_of_variables,
                     coefficients, pullback_seminorm_bound)
from .report import VerificationReport, fit_power_law

__all__ = [
    "EllipticityError",
    "VariableCoefficient",
    "ManufacturedCase",
    "SchauderReport",
    "zero_order_exponents",
    "run_constant_case",
    "run_higher_constant_case",
    "run_variable_case",
    "run_higher_variable_case",
    "measure_seminorm",
    "coefficient_regularity_check",
    "coefficient_growth_by_order",
    "PulledBackDensity",
    "bootstrap_stage",
    "bootstrap_sweep",
    "run_jobs",
    "standard_sources",
    "standard_cases",
    "constant_operators",
]

REFINEMENT_TOLERANCE = 0.3


class EllipticityError(ValueError):
    """A coefficient matrix left the ellipticity window at a sampled point."""


def zero_order_exponents(alpha: float) -> tuple[float, float]:
    """Powers of the coefficient norm in the zero-order terms: (3+a+2/a, 5+a+6/a)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return 3 + alpha + 2 / alpha, 5 + alpha + 6 / alpha


def _unit(d, *idx):
    e = [0] * d
    for i in idx:
        e[i] += 1
    return tuple(e)


# -- coefficients --------------------------------------------------------------

class VariableCoefficient:
    """Symmetric matrix field A(z) whose entries are separable fields.

    Entries keep closed-form derivatives, so the derived source and the
    C^{1+alpha} data of A are exact.
    """

    def __init__(self, entries, lam: float | None = None, Lam: float | None = None):
        d = len(entries)
        if any(len(row) != d for row in entries):
            raise ValueError("coefficient entries must form a square array")
        self.d = d
        self.entries = [[entries[i][k] for k in range(d)] for i in range(d)]
        self.lam = lam
        self.Lam = Lam

    @classmethod
    def constant(cls, op: ConstantOperator) -> "VariableCoefficient":
        d = op.d
        one = lambda c: SeparableField.product(constant_factor(c), [constant_factor()] * d,
                                               [constant_factor()] * d)
        entries = [[one(float(op.A0[i, k])) for k in range(d)] for i in range(d)]
        return cls(entries, op.lam, op.Lam)

    @classmethod
    def scalar(cls, a: SeparableField, lam=None, Lam=None) -> "VariableCoefficient":
        d = a.d
        zero = SeparableField.zero(d)
        return cls([[a if i == k else zero for k in range(d)] for i in range(d)], lam, Lam)

    @classmethod
    def oscillating(cls, d: int, amplitude: float = 0.25) -> "VariableCoefficient":
        """(1 + amplitude sin v_1) I."""
        from .fields import cos_factor
        fv = [cos_factor(1.0, -0.5 * math.pi, amplitude)] + [constant_factor()] * (d - 1)
        a = (SeparableField.product(constant_factor(), [constant_factor()] * d, fv)
             + SeparableField.product(constant_factor(), [constant_factor()] * d,
                                      [constant_factor()] * d))
        return cls.scalar(a, 1 - amplitude, 1 + amplitude)

    def _apply(self, fn):
        return [[fn(e) for e in row] for row in self.entries]

    def __call__(self, t, x, v):
        vals = self._apply(lambda e: np.broadcast_to(e(t, x, v), np.shape(t)))
        return np.moveaxis(np.array(vals, dtype=float), (0, 1), (-2, -1))

    def partial(self, j=0, beta=(), eta=()):
        fields = self._apply(lambda e: e.partial(j, beta, eta))

        def fn(t, x, v):
            vals = [[np.broadcast_to(f(t, x, v), np.shape(t)) for f in row] for row in fields]
            return np.moveaxis(np.array(vals, dtype=float), (0, 1), (-2, -1))

        return fn

    def rescaled(self, r: float) -> "VariableCoefficient":
        """A o delta_r."""
        return VariableCoefficient(self._apply(lambda e: e.rescaled(r * r, r ** 3, r)),
                                   self.lam, self.Lam)

    def check_ellipticity(self, t, x, v) -> tuple[float, float]:
        A = self(t, x, v)
        if not np.allclose(A, np.swapaxes(A, -1, -2), atol=1e-12):
            raise EllipticityError("coefficient matrix is not symmetric")
        ev = np.linalg.eigvalsh(A)
        lo, hi = float(ev.min()), float(ev.max())
        lam = self.lam if self.lam is not None else 0.0
        Lam = self.Lam if self.Lam is not None else np.inf
        if lo < lam * (1 - 1e-12) or hi > Lam * (1 + 1e-12) or lo <= 0:
            raise EllipticityError(f"eigenvalues [{lo:.4g}, {hi:.4g}] outside [{lam}, {Lam}]")
        return lo, hi


@dataclass
class ManufacturedCase:
    """Analytic u* with an operator; the source g is derived, never chosen."""

    u_star: SeparableField
    operator: object
    name: str = "case"
    g: SeparableField = dc_field(init=False)

    def __post_init__(self):
        u = self.u_star
        if isinstance(self.operator, ConstantOperator):
            self.g = u.kinetic_operator(self.operator.A0)
        elif isinstance(self.operator, VariableCoefficient):
            g = u.dt() + u.transport()
            for i in range(u.d):
                for k in range(u.d):
                    g = g - self.operator.entries[i][k].multiply(u.dv(i).dv(k))
            self.g = g
        else:
            raise TypeError("operator must be a ConstantOperator or VariableCoefficient")

    @property
    def d(self) -> int:
        return self.u_star.d

    def coefficient(self) -> VariableCoefficient:
        if isinstance(self.operator, ConstantOperator):
            return VariableCoefficient.constant(self.operator)
        return self.operator

    def source_discrepancy(self, n: int = 64, seed: int = 0) -> float:
        """Max |g - (d_t u + v.grad_x u - tr(A D^2 u))| at random points of Q_1."""
        rng = np.random.default_rng(seed)
        d = self.d
        t = rng.uniform(-1, 0, n)
        x = rng.uniform(-1, 1, (n, d))
        v = rng.uniform(-1, 1, (n, d))
        u = self.u_star
        direct = u.dt()(t, x, v) + sum(v[:, i] * u.dx(i)(t, x, v) for i in range(d))
        A = self.coefficient()(t, x, v)
        for i in range(d):
            for k in range(d):
                direct = direct - A[:, i, k] * u.dv(i).dv(k)(t, x, v)
        return float(np.max(np.abs(direct - self.g(t, x, v))))

    def rescaled(self, r: float) -> "ManufacturedCase":
        """The case composed with delta_r: u* o delta_r under A o delta_r."""
        op = self.operator
        if isinstance(op, VariableCoefficient):
            op = op.rescaled(r)
        return ManufacturedCase(self.u_star.rescaled(r * r, r ** 3, r), op,
                                f"{self.name}@delta_{r}")


# -- reports -------------------------------------------------------------------

@dataclass
class SchauderReport:
    case_id: str
    lhs: float
    rhs_source: float
    rhs_zero_order: float
    ratio: float
    refinement_trace: list = dc_field(default_factory=list)
    components: dict = dc_field(default_factory=dict)
    runtime: float = 0.0

    def __post_init__(self):
        for name in ("lhs", "rhs_source", "rhs_zero_order"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def refinement_change(self) -> float:
        tr = [r for r in self.refinement_trace if math.isfinite(r)]
        if len(tr) < 2:
            return 0.0 if len(tr) == len(self.refinement_trace) else math.inf
        if tr[-2] == 0:
            return 0.0 if tr[-1] == 0 else math.inf
        return abs(tr[-1] / tr[-2] - 1)

    def to_verification(self, tol: float = REFINEMENT_TOLERANCE,
                        anchor: str = "schauder-estimate") -> VerificationReport:
        rep = VerificationReport(self.case_id, runtime=self.runtime)
        rep.measured.update({"lhs": self.lhs, "rhs_source": self.rhs_source,
                             "rhs_zero_order": self.rhs_zero_order, "ratio": self.ratio})
        for k, r in enumerate(self.refinement_trace):
            rep.measured[f"ratio@level{k}"] = r
        rep.measured.update({f"component {k}": v for k, v in self.components.items()})
        rep.compare("ratio finite", self.ratio, 1e300, 0.0, "le", anchor)
        if len(self.refinement_trace) > 1:
            rep.compare("refinement change", self.refinement_change, 0.0, tol, "abs", anchor)
        return rep


def _ratio(lhs, rhs):
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


class _Tabulated:
    """Derivative supplier backed by precomputed grid arrays keyed by (j, beta, eta)."""

    def __init__(self, d, table):
        self.d = d
        self.table = table

    @staticmethod
    def key(d, j, beta, eta):
        pad = lambda m: tuple(m) + (0,) * (d - len(tuple(m)))
        return (int(j), pad(beta), pad(eta))

    def partial(self, j=0, beta=(), eta=()):
        arr = self.table[self.key(self.d, j, beta, eta)]
        return lambda T, X, V: arr

    def sliced(self, idx):
        return _Tabulated(self.d, {k: v[idx] for k, v in self.table.items()})


def _levels(d, n_coarse):
    coarse = GridSpec.uniform(d, n_coarse)
    fine = coarse.refined()
    sub = tuple(slice(None, None, 2) for _ in fine.shape)
    return coarse, fine, sub


def _needed(kind, d):
    """Derivative specs a seminorm kind consumes."""
    z = (0,) * d
    specs = {"u": [(0, z, z)],
             "hess_v": [(0, z, _unit(d, i, k)) for i in range(d) for k in range(d)],
             "dt": [(1, z, z)],
             "grad_x": [(0, _unit(d, i), z) for i in range(d)],
             "grad_v": [(0, z, _unit(d, i)) for i in range(d)],
             "d3_v": [(0, z, _unit(d, i, k, m)) for i in range(d) for k in range(d)
                      for m in range(d)]}
    names = {"primed_two_plus": ["u", "hess_v"], "two_plus": ["u", "hess_v", "dt"],
             "double_primed_three_plus": ["u", "dt", "grad_x", "d3_v"],
             "one_plus": ["u", "grad_v"], "alpha": ["u"]}[kind]
    out = []
    for n in names:
        for s in specs[n]:
            if s not in out:
                out.append(s)
    return out


def measure_seminorm(u, domain: KineticCylinder, grid: GridSpec, spec: SeminormSpec,
                     pair_budget=DEFAULT_PAIR_BUDGET, seed=0) -> float:
    """Sampled seminorm of an analytic field on ``domain``."""
    fld = SampledField.from_function(domain, grid, u)
    return seminorm(fld, spec, pair_budget, seed).value


def _solve_tables(op, g, fld, specs, rule, threads):
    pts = (fld.T.ravel(), fld.X.reshape(-1, fld.d), fld.V.reshape(-1, fld.d))
    if np.allclose(op.A0, np.eye(op.d)):
        vals = solve_on_points(g, *pts, derivatives=specs, rule=rule, threads=threads)
    else:
        vals = solve_anisotropic_on_points(op, g, *pts, derivatives=specs, rule=rule,
                                           threads=threads)
    shape = fld.grid.shape
    return {_Tabulated.key(fld.d, *s): vals[k].reshape(shape) for k, s in enumerate(specs)}


def _check_source(g, d):
    if getattr(g, "is_zero", False):
        return
    lo, hi = g.t_support
    xlo, xhi, vlo, vhi = g.box()
    inside = lo > -1 and hi < 0 and np.all(xlo > -1) and np.all(xhi < 1) \
        and np.all(vlo > -1) and np.all(vhi < 1)
    if not inside:
        raise ValueError("the source must be supported strictly inside Q_1")


def _constant_run(op, g, lhs_kind, rhs_kind, alpha, beta, n_coarse, rule, threads,
                  pair_budget, seed, case_id):
    t0 = time.perf_counter()
    d = op.d
    if getattr(g, "d", d) != d:
        raise ValueError("source and operator dimensions differ")
    _check_source(g, d)
    dom = KineticCylinder(PhasePoint.origin(d), 1.0)
    coarse, fine, sub = _levels(d, n_coarse)
    probe = SampledField(dom, fine, np.zeros(fine.shape))
    specs = _needed(lhs_kind, d)
    table = _solve_tables(op, g, probe, specs, rule, threads)
    sup = _Tabulated(d, table)
    lhs_spec = SeminormSpec(lhs_kind, alpha, beta)
    rhs_spec = SeminormSpec(rhs_kind, alpha)
    trace, comps = [], {}
    lhs = rhs = 0.0
    for level, (grid, idx) in enumerate(((coarse, sub), (fine, Ellipsis))):
        s = sup.sliced(idx) if idx is not Ellipsis else sup
        u_vals = s.table[_Tabulated.key(d, 0, (), ())]
        fld = SampledField(dom, grid, u_vals, derivative_supplier=s)
        est = seminorm(fld, lhs_spec, pair_budget, seed)
        gf = SampledField.from_function(dom, grid, g)
        rhs_est = seminorm(gf, rhs_spec, pair_budget, seed)
        lhs, rhs = est.value, rhs_est.value
        trace.append(_ratio(lhs, rhs))
        comps.update({f"L{level} lhs[{k}]": v for k, v in est.components.items()})
        comps[f"L{level} |u|_0"] = sup_norm(fld)
    return SchauderReport(case_id, lhs, rhs, 0.0, trace[-1], trace, comps,
                          time.perf_counter() - t0)


def run_constant_case(op: ConstantOperator, g, alpha: float = 0.5, beta: float | None = None,
                      n_coarse: int = 7, rule: ConvolutionRule | None = None, threads: int = 1,
                      pair_budget: int = DEFAULT_PAIR_BUDGET, seed: int = 0,
                      case_id: str = "constant") -> SchauderReport:
    """[u]'_{2+a,b,Q_1} / [g]_{a,Q_1} for the convolution solution u, on two nested grids."""
    if not 0 < alpha < 1 or (beta is not None and not 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    return _constant_run(op, g, "primed_two_plus", "alpha", alpha, beta, n_coarse, rule,
                         threads, pair_budget, seed, case_id)


def run_higher_constant_case(op: ConstantOperator, g, alpha: float = 0.5, n_coarse: int = 7,
                             rule: ConvolutionRule | None = None, threads: int = 1,
                             pair_budget: int = DEFAULT_PAIR_BUDGET, seed: int = 0,
                             case_id: str = "higher-constant") -> SchauderReport:
    """[u]''_{3+a,Q_1} / [g]_{1+a,Q_1}."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not getattr(g, "is_zero", False) and not hasattr(g, "partial"):
        raise ValueError("the source needs analytic first derivatives")
    return _constant_run(op, g, "double_primed_three_plus", "one_plus", alpha, None, n_coarse,
                         rule, threads, pair_budget, seed, case_id)


def _full_norm(field_fn, dom, grid, order, alpha, pair_budget, seed):
    """|h|_{a} = |h|_0 + [h]_a, or |h|_{1+a} = |h|_0 + |grad_v h|_0 + [h]_{1+a}."""
    fld = SampledField.from_function(dom, grid, field_fn)
    if order == 0:
        return sup_norm(fld) + quantity_seminorm(fld, "u", alpha, "alpha", pair_budget, seed)[0]
    semi = seminorm(fld, SeminormSpec("one_plus", alpha), pair_budget, seed).value
    return sup_norm(fld) + sup_norm(fld, "grad_v") + semi


def _variable_run(case: ManufacturedCase, lhs_kind, order, alpha, beta, n_coarse,
                  pair_budget, seed, case_id):
    t0 = time.perf_counter()
    d = case.d
    A = case.coefficient()
    p, q = zero_order_exponents(alpha)
    power = p if order == 0 else q
    big = KineticCylinder(PhasePoint.origin(d), 1.0)
    half = KineticCylinder(PhasePoint.origin(d), 0.5)
    coarse, fine, _ = _levels(d, n_coarse)
    probe = SampledField(big, fine, np.zeros(fine.shape))
    A.check_ellipticity(probe.T[probe.mask], probe.X[probe.mask], probe.V[probe.mask])
    lhs_spec = SeminormSpec(lhs_kind, alpha, beta)
    trace, comps = [], {}
    for level, grid in enumerate((coarse, fine)):
        lhs_fld = SampledField.from_function(half, grid, case.u_star)
        est = seminorm(lhs_fld, lhs_spec, pair_budget, seed)
        if order == 0:
            gf = SampledField.from_function(big, grid, case.g)
            rhs_src = seminorm(gf, SeminormSpec("alpha", alpha), pair_budget, seed).value
        else:
            rhs_src = _full_norm(case.g, big, grid, 1, alpha, pair_budget, seed)
        a_norm = _full_norm(A, big, grid, order, alpha, pair_budget, seed)
        u0 = sup_norm(SampledField.from_function(big, grid, case.u_star))
        rhs_zero = a_norm ** power * u0
        trace.append(_ratio(est.value, rhs_src + rhs_zero))
        comps.update({f"L{level} lhs[{k}]": v for k, v in est.components.items()})
        comps.update({f"L{level} |A|": a_norm, f"L{level} |u|_0": u0})
    return SchauderReport(case_id, est.value, rhs_src, rhs_zero, trace[-1], trace, comps,
                          time.perf_counter() - t0)


def run_variable_case(case: ManufacturedCase, alpha: float = 0.5, beta: float | None = None,
                      n_coarse: int = 5, pair_budget: int = DEFAULT_PAIR_BUDGET,
                      seed: int = 0) -> SchauderReport:
    """[u*]'_{2+a,b,Q_1/2} against [g]_{a,Q_1} + |A|_{a,Q_1}^p |u*|_{0,Q_1}."""
    return _variable_run(case, "primed_two_plus", 0, alpha, beta, n_coarse, pair_budget, seed,
                         f"variable({case.name})")


def run_higher_variable_case(case: ManufacturedCase, alpha: float = 0.5, n_coarse: int = 5,
                             pair_budget: int = DEFAULT_PAIR_BUDGET,
                             seed: int = 0) -> SchauderReport:
    """[u*]''_{3+a,Q_1/2} against |g|_{1+a,Q_1} + |A|_{1+a,Q_1}^q |u*|_{0,Q_1}."""
    return _variable_run(case, "double_primed_three_plus", 1, alpha, None, n_coarse,
                         pair_budget, seed, f"higher-variable({case.name})")


# -- coefficient regularity ----------------------------------------------------

def _chain_weights(T: np.ndarray, r: float, eta: Sequence[int]) -> dict:
    """d_v^eta [F(v0 + r T v)] = sum_w weight * (d^w F)(v0 + r T v)."""
    d = T.shape[0]
    slots = [i for i, e in enumerate(eta) for _ in range(e)]
    out: dict = {}
    for ks in itertools.product(range(d), repeat=len(slots)):
        w = r ** len(slots)
        for k, i in zip(ks, slots):
            w *= T[k, i]
        if w == 0.0:
            continue
        key = tuple(ks.count(m) for m in range(d))
        out[key] = out.get(key, 0.0) + w
    return out


def _multi_indices(d, M):
    return [e for e in itertools.product(range(M + 1), repeat=d) if sum(e) == M]


def _unit_ball_velocities(d, n_v):
    g = np.linspace(-1, 1, n_v)
    V = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return V[np.linalg.norm(V, axis=-1) <= 1 + 1e-12]


def _transformed_derivatives(f, cov, M, n_v, quad_rule):
    """Order-M v-derivatives of A and C on a Q_1 velocity grid (n_t = n_x = 1)."""
    d = f.d
    grid = GridSpec(1, (1,) * d, (n_v,) * d)
    dom = KineticCylinder(PhasePoint.origin(d), 1.0)
    probe = SampledField(dom, grid, np.zeros(grid.shape))
    V = probe.V.reshape(-1, d)
    Vphys = cov.base.v + cov.r1 * V @ cov.T_matrix.T
    Ti = cov.T_inv
    cache = {}

    def coeff(w):
        if w not in cache:
            cache[w] = coefficients(f, Vphys, "ac", eta=w, quad_rule=quad_rule)
        return cache[w]

    A_parts, C_parts = [], []
    for eta in _multi_indices(d, M):
        Aq = np.zeros((V.shape[0], d, d))
        Cq = np.zeros(V.shape[0])
        for w, c in _chain_weights(cov.T_matrix, cov.r1, eta).items():
            res = coeff(w)
            Aq += c * np.einsum("ij,njk,kl->nil", Ti, res["a"], Ti)
            Cq += c * cov.r1 ** 2 * res["c"]
        A_parts.append(Aq.reshape(V.shape[0], -1))
        C_parts.append(Cq[:, None])
    shape = grid.shape
    A_vals = np.concatenate(A_parts, axis=-1).reshape(shape + (-1,))
    C_vals = np.concatenate(C_parts, axis=-1).reshape(shape + (-1,))
    return SampledField(dom, grid, A_vals), SampledField(dom, grid, C_vals)


def coefficient_regularity_check(f: DensityField, covs: Sequence[ChangeOfVariables], M: int = 0,
                                 alpha: float = 0.5, n_v: int = 5, tol: float = 0.3,
                                 quad_rule=DEFAULT_QUADRATURE, seed: int = 0) -> VerificationReport:
    """Growth in |v0| of [d_v^M A]_a and [d_v^M C]_a on Q_1 against the upper-bound exponents.

    The predicted exponents (M+a)(1+g/2)+2 for A and (M+a-2)(1+g/2) for C are
    upper bounds; the comparison passes when the fitted slope does not exceed
    them by more than ``tol``.
    """
    rep = VerificationReport(f"coefficient-regularity({f.name}, M={M}, alpha={alpha})")
    g = f.gamma
    pred = {"A": (M + alpha) * (1 + g / 2) + 2, "C": (M + alpha - 2) * (1 + g / 2)}
    speeds, vals = [], {"A": [], "C": []}
    for cov in covs:
        Af, Cf = _transformed_derivatives(f, cov, M, n_v, quad_rule)
        nv = float(np.linalg.norm(cov.base.v))
        speeds.append(nv)
        for name, fld in (("A", Af), ("C", Cf)):
            s = quantity_seminorm(fld, "u", alpha, "alpha", DEFAULT_PAIR_BUDGET, seed)[0]
            vals[name].append(s)
            rep.measured[f"[{name}]@|v0|={nv:.4g}"] = s
    if f.is_zero:
        rep.notes.append("zero density: every seminorm vanishes")
        for name in vals:
            rep.compare(f"max [{name}]", max(vals[name], default=0.0), 0.0, 0.0, "abs",
                        "coefficient-regularity")
        return rep
    for name in ("A", "C"):
        y = np.asarray(vals[name])
        rep.measured[f"predicted exponent {name}"] = pred[name]
        if len(y) < 2 or np.any(y <= 0):
            rep.notes.append(f"{name}: not enough positive data for a fit")
            continue
        fit, resid = fit_power_law(np.add(1, speeds), y, f"[{name}]_vs_log(1+|v0|)")
        rep.fits.append(fit)
        rep.measured[f"exponent {name}"] = fit.slope
        rep.measured[f"fit residual {name}"] = resid
        rep.compare(f"exponent {name} <= bound", fit.slope, pred[name], tol, "le",
                    "coefficient-regularity")
    return rep


def coefficient_growth_by_order(f: DensityField, covs, orders=(0, 1), alpha=0.5, n_v=5,
                                tol=0.3, quad_rule=DEFAULT_QUADRATURE) -> VerificationReport:
    """Change of the fitted A exponent per unit of derivative order, against 1 + gamma/2."""
    rep = VerificationReport(f"coefficient-growth-by-order({f.name})")
    slopes = []
    for M in orders:
        sub = coefficient_regularity_check(f, covs, M, alpha, n_v, tol, quad_rule)
        rep.merge(sub, prefix=f"M={M}:")
        slopes.append(sub.measured.get("exponent A", math.nan))
    for (m0, s0), (m1, s1) in zip(zip(orders, slopes), zip(orders[1:], slopes[1:])):
        step = (s1 - s0) / (m1 - m0)
        rep.measured[f"slope step {m0}->{m1}"] = step
        rep.compare(f"slope step {m0}->{m1}", step, 1 + f.gamma / 2, tol, "abs",
                    "coefficient-regularity")
    return rep


# -- bootstrap -----------------------------------------------------------------

class PulledBackDensity:
    """f_{z0}(t, x, v) = f(v0 + r T v) for a density independent of (t, x)."""

    def __init__(self, f: DensityField, cov: ChangeOfVariables, r: float | None = None):
        self.f = f
        self.cov = cov
        self.r = cov.r1 if r is None else float(r)
        self.d = f.d

    def _phys(self, v):
        return self.cov.base.v + self.r * np.asarray(v, float) @ self.cov.T_matrix.T

    def __call__(self, t, x, v):
        out = self.f.velocity_function()(self._phys(v))
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(t), out.shape))

    def partial(self, j=0, beta=(), eta=()):
        if j or any(beta):
            return lambda t, x, v: np.zeros(np.shape(t))
        eta = tuple(eta) + (0,) * (self.d - len(tuple(eta)))
        terms = [(c, self.f.velocity_function(w))
                 for w, c in _chain_weights(self.cov.T_matrix, self.r, eta).items()]

        def fn(t, x, v):
            V = self._phys(v)
            out = sum((c * h(V) for c, h in terms), np.zeros(np.shape(V)[:-1]))
            return np.broadcast_to(out, np.broadcast_shapes(np.shape(t), out.shape))

        return fn


def bootstrap_stage(f: DensityField, z0: PhasePoint, stage: int = 0, alpha: float = 0.5,
                    c1: float = 0.1, n_v: int = 9, n_v_coeff: int = 5,
                    quad_rule=DEFAULT_QUADRATURE, seed: int = 0) -> VerificationReport:
    """One iteration of the regularity loop at base point z0.

    Stage 0 measures |f_{z0}|_{a,Q_1} and its pulled-back bound.  Stage 1
    adds the transformed coefficients and the variable-coefficient Schauder
    measurement of f_{z0} with source g = -tr(A D^2 f_{z0}) - C f_{z0}.
    """
    if stage not in (0, 1):
        raise ValueError("stage must be 0 or 1")
    t_start = time.perf_counter()
    d = f.d
    cov = build_change_of_variables(z0, f.gamma, c1)
    nv = float(np.linalg.norm(z0.v))
    rep = VerificationReport(f"bootstrap(stage={stage}, |v0|={nv:.4g})")
    fz = PulledBackDensity(f, cov)
    dom = KineticCylinder(PhasePoint.origin(d), 1.0)
    grid = GridSpec(1, (1,) * d, (n_v,) * d)
    fld = SampledField.from_function(dom, grid, fz)
    f_sup = sup_norm(fld)
    f_semi = quantity_seminorm(fld, "u", alpha, "alpha", DEFAULT_PAIR_BUDGET, seed)[0]
    rep.measured.update({"|v0|": nv, "r1": cov.r1, "sup f_z0": f_sup, "[f_z0]_a": f_semi,
                         "|f_z0|_a": f_sup + f_semi,
                         "pullback bound": pullback_seminorm_bound(cov, 0, alpha, f_semi)})
    if stage == 1 and not f.is_zero:
        Af, Cf = _transformed_derivatives(f, cov, 0, n_v_coeff, quad_rule)
        A_vals = Af.values.reshape(Af.values.shape[:-1] + (d, d))
        ev = np.linalg.eigvalsh(A_vals[Af.mask])
        rep.measured.update({"lambda": float(ev.min()), "Lambda": float(ev.max())})
        rep.compare("A ellipticity", float(ev.min()), 0.0, 0.0, "ge", "transformed-ellipticity")
        cgrid = Af.grid
        cfld = SampledField.from_function(dom, cgrid, fz)
        H = cfld.quantity("hess_v").reshape(cgrid.shape + (d, d))
        g_vals = -np.einsum("...ij,...ij->...", A_vals, H) - Cf.values[..., 0] * cfld.values
        gfld = SampledField(dom, cgrid, g_vals)
        g_semi = quantity_seminorm(gfld, "u", alpha, "alpha", DEFAULT_PAIR_BUDGET, seed)[0]
        a_norm = sup_norm(Af) + quantity_seminorm(Af, "u", alpha, "alpha",
                                                  DEFAULT_PAIR_BUDGET, seed)[0]
        half = KineticCylinder(PhasePoint.origin(d), 0.5)
        lhs_fld = SampledField.from_function(half, grid, fz)
        lhs = seminorm(lhs_fld, SeminormSpec("primed_two_plus", alpha), DEFAULT_PAIR_BUDGET,
                       seed).value
        p, _ = zero_order_exponents(alpha)
        rhs = g_semi + a_norm ** p * f_sup
        rep.measured.update({"[g]_a": g_semi, "|A|_a": a_norm, "lhs": lhs, "rhs": rhs,
                             "ratio": _ratio(lhs, rhs)})
        rep.compare("ratio finite", _ratio(lhs, rhs), 1e300, 0.0, "le", "schauder-estimate")
    rep.runtime = time.perf_counter() - t_start
    return rep


def bootstrap_sweep(f: DensityField, speeds=(2.0, 3.0, 4.0, 5.0), stage: int = 0,
                    alpha: float = 0.5, t0: float = 2.0, c1: float = 0.1,
                    residual_tol: float = 0.15, threads: int = 1, **kw) -> VerificationReport:
    """Fit log of the stage's measured seminorm against |v0|^2 over base points v0 = s e_1."""
    d = f.d
    rep = VerificationReport(f"bootstrap-sweep(stage={stage}, {f.name})")
    jobs = [lambda s=s: bootstrap_stage(f, PhasePoint(t0, np.zeros(d), s * np.eye(d)[0]),
                                        stage, alpha, c1, **kw) for s in speeds]
    key = "|f_z0|_a" if stage == 0 else "lhs"
    ys = []
    for sub in run_jobs(jobs, threads):
        rep.merge(sub, prefix=f"|v0|={sub.measured['|v0|']:.4g}:")
        ys.append(sub.measured.get(key, 0.0))
    ys = np.asarray(ys)
    if f.is_zero or np.all(ys == 0):
        rep.notes.append("zero density: every measured seminorm vanishes")
        rep.compare(f"max {key}", float(np.max(ys, initial=0.0)), 0.0, 0.0, "abs",
                    "pointwise-decay")
        return rep
    x = np.asarray(speeds, float) ** 2
    fit, resid = fit_power_law(x, ys, f"log{key}_vs_|v0|^2", log_x=False)
    rep.fits.append(fit)
    mu = f.envelope[1]
    rep.measured.update({"slope": fit.slope, "fit residual": resid, "envelope mu": mu})
    rep.compare("slope < 0", fit.slope, 0.0, 0.0, "le", "pointwise-decay")
    rep.compare("fit residual", resid, residual_tol, 0.0, "le", "pointwise-decay")
    rep.compare("|slope| <= mu", abs(fit.slope), mu, 0.0, "le", "pointwise-decay")
    return rep


def run_jobs(jobs: Sequence[Callable], threads: int = 1) -> list:
    """Run independent jobs, returning results in submission order."""
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda j: j(), jobs))
    return [j() for j in jobs]


# -- standard families ---------------------------------------------------------

def standard_sources(d: int = 1) -> dict:
    """Three compactly supported bump sources inside Q_1."""
    from .fields import bump_field
    return {
        "centered": bump_field(d),
        "tilted": bump_field(d, v_tilt=0.3),
        "offset": bump_field(d, t_center=-0.45, t_half=0.35, x_center=0.15, x_half=0.7,
                             v_center=-0.1, v_half=0.75, power=5),
    }


def standard_cases(d: int = 1) -> dict:
    """Manufactured solutions for the variable-coefficient checks."""
    from .fields import bump_field, poly_factor
    u_bump = bump_field(d, t_center=-0.5, t_half=0.6, x_half=1.2, v_half=1.2, v_tilt=0.2)
    # v_1^2 plus a term linear in v: constant velocity Hessian
    quad = (SeparableField.product(constant_factor(), [constant_factor()] * d,
                                   [poly_factor([0.0, 0.0, 1.0])] + [constant_factor()] * (d - 1))
            + SeparableField.product(poly_factor([1.0, 0.5]), [poly_factor([0.2, 1.0])] * d,
                                     [poly_factor([0.0, 0.3])] + [constant_factor()] * (d - 1)))
    return {
        "identity-quadratic": ManufacturedCase(quad, ConstantOperator(np.eye(d)),
                                               "identity-quadratic"),
        "identity-bump": ManufacturedCase(u_bump, ConstantOperator(np.eye(d)), "identity-bump"),
        "oscillating-bump": ManufacturedCase(u_bump, VariableCoefficient.oscillating(d),
                                             "oscillating-bump"),
    }


def constant_operators(d: int, a0=(1.0, 4.0)) -> dict:
    """The identity plus diag(1, a, ..., a) for every a != 1 (diag(a) when d = 1)."""
    ops = {"I": ConstantOperator(np.eye(d))}
    for a in a0:
        if a == 1.0:
            continue
        diag = np.full(d, float(a)) if d == 1 else np.r_[1.0, np.full(d - 1, float(a))]
        ops[f"diag({', '.join(f'{x:g}' for x in diag)})"] = ConstantOperator(np.diag(diag))
    return ops
