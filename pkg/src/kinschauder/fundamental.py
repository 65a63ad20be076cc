"""Fundamental solution of the kinetic Fokker-Planck operator and convolution solves.

``Gamma(t, x, v) = C_d t^{-2d} exp(-|v|^2/t + 3 v.x/t^2 - 3|x|^2/t^3)`` for t > 0
solves ``d_t u + v . grad_x u - Lap_v u = 0`` with a point source at the origin.
Every partial derivative is ``P(t^{-1/2}, x/t^2, v/t) * Gamma`` where ``P`` is a
polynomial whose monomials all have total degree ``l + 2j + 3k``; the
polynomials are built exactly with rational coefficients.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import gammainc, roots_hermite, roots_legendre

from .geometry import PhasePoint

__all__ = [
    "SingularPointError",
    "QuadratureError",
    "GammaDerivativeSpec",
    "ConstantOperator",
    "gamma_constant",
    "gamma",
    "gamma_arrays",
    "gamma_polynomial",
    "gamma_derivative",
    "gamma_derivative_arrays",
    "GammaField",
    "MomentResult",
    "gamma_moment_integral",
    "ConvolutionRule",
    "solve_const_isotropic",
    "solve_const_anisotropic",
    "solve_on_points",
    "solve_anisotropic_on_points",
    "residual",
    "residual_report",
    "normalization_report",
    "derivative_specs",
    "moment_scaling_report",
    "solver_accuracy_report",
]


class SingularPointError(ValueError):
    """Derivative of Gamma requested at t = 0."""


class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested accuracy."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class GammaDerivativeSpec:
    """Orders of d_t^j d_x^beta d_v^eta."""

    j: int = 0
    beta: tuple = ()
    eta: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(int(b) for b in self.beta))
        object.__setattr__(self, "eta", tuple(int(e) for e in self.eta))
        if self.j < 0 or any(b < 0 for b in self.beta) or any(e < 0 for e in self.eta):
            raise ValueError("derivative orders must be nonnegative integers")

    @property
    def k(self) -> int:
        return sum(self.beta)

    @property
    def ell(self) -> int:
        return sum(self.eta)

    @property
    def weighted_order(self) -> int:
        return self.ell + 2 * self.j + 3 * self.k

    def padded(self, d: int) -> "GammaDerivativeSpec":
        beta = self.beta + (0,) * (d - len(self.beta))
        eta = self.eta + (0,) * (d - len(self.eta))
        if len(beta) != d or len(eta) != d:
            raise ValueError(f"multi-index longer than dimension {d}")
        return GammaDerivativeSpec(self.j, beta, eta)

    def moment_exponent(self, p: float = 0.0, q: float = 0.0) -> float:
        """Predicted power of t for the weighted L^1 norm of the derivative."""
        return -(self.ell / 2 + self.j + 1.5 * self.k) + 1.5 * p + 0.5 * q


@dataclass(frozen=True)
class ConstantOperator:
    """tr(A0 D_v^2) with spectrum of A0 inside [lam, Lam]."""

    A0: np.ndarray
    lam: float | None = None
    Lam: float | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A0, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A0 must be square")
        if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14):
            raise ValueError("A0 must be symmetric")
        A = 0.5 * (A + A.T)
        ev = np.linalg.eigvalsh(A)
        if ev[0] <= 0:
            raise ValueError("A0 must be positive definite")
        lam = ev[0] if self.lam is None else float(self.lam)
        Lam = ev[-1] if self.Lam is None else float(self.Lam)
        if not 0 < lam <= Lam or ev[0] < lam * (1 - 1e-12) or ev[-1] > Lam * (1 + 1e-12):
            raise ValueError(f"spectrum {ev} not inside [{lam}, {Lam}]")
        A.setflags(write=False)
        object.__setattr__(self, "A0", A)
        object.__setattr__(self, "lam", float(lam))
        object.__setattr__(self, "Lam", float(Lam))

    @classmethod
    def identity(cls, d: int):
        return cls(np.eye(d))

    @property
    def d(self) -> int:
        return self.A0.shape[0]

    def sqrt(self) -> np.ndarray:
        w, Q = np.linalg.eigh(self.A0)
        P = (Q * np.sqrt(w)) @ Q.T
        return 0.5 * (P + P.T)


# -- Gamma and its derivatives ----------------------------------------------

def gamma_constant(d: int) -> float:
    return (math.sqrt(3.0) / (2.0 * math.pi)) ** d


def gamma_arrays(t, x, v):
    """Vectorized Gamma; ``x, v`` carry a trailing dimension axis."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    d = x.shape[-1]
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    expo = (-np.sum(v * v, axis=-1) / ts + 3.0 * np.sum(v * x, axis=-1) / ts ** 2
            - 3.0 * np.sum(x * x, axis=-1) / ts ** 3)
    val = gamma_constant(d) * np.exp(expo - 2 * d * np.log(ts))
    return np.where(pos, val, 0.0)


def gamma(z: PhasePoint) -> float:
    return float(gamma_arrays(np.array(z.t), z.x, z.v))


# Monomials are keyed by (a, ey, ew): s^a prod Y_i^ey_i prod W_i^ew_i with
# s = t^{-1/2}, Y = x / t^2, W = v / t.

def _add(acc, key, c):
    if c:
        acc[key] = acc.get(key, 0) + c
        if acc[key] == 0:
            del acc[key]


def _bump(tup, i, by):
    return tup[:i] + (tup[i] + by,) + tup[i + 1:]


def _diff_t(P, d):
    out = {}
    for (a, ey, ew), c in P.items():
        # derivative of the monomial
        _add(out, (a + 2, ey, ew), -c * (Fraction(a, 2) + 2 * sum(ey) + sum(ew)))
        # derivative of t^{-2d} prefactor and of the exponent
        _add(out, (a + 2, ey, ew), -2 * d * c)
        for i in range(d):
            _add(out, (a, ey, _bump(ew, i, 2)), c)
            _add(out, (a, _bump(ey, i, 1), _bump(ew, i, 1)), -6 * c)
            _add(out, (a, _bump(ey, i, 2), ew), 9 * c)
    return out


def _diff_x(P, i):
    out = {}
    for (a, ey, ew), c in P.items():
        if ey[i]:
            _add(out, (a + 4, _bump(ey, i, -1), ew), c * ey[i])
        _add(out, (a + 2, ey, _bump(ew, i, 1)), 3 * c)
        _add(out, (a + 2, _bump(ey, i, 1), ew), -6 * c)
    return out


def _diff_v(P, i):
    out = {}
    for (a, ey, ew), c in P.items():
        if ew[i]:
            _add(out, (a + 2, ey, _bump(ew, i, -1)), c * ew[i])
        _add(out, (a, ey, _bump(ew, i, 1)), -2 * c)
        _add(out, (a, _bump(ey, i, 1), ew), 3 * c)
    return out


@lru_cache(maxsize=256)
def _polynomial(j: int, beta: tuple, eta: tuple, d: int):
    zero = (0,) * d
    P = {(0, zero, zero): Fraction(1)}
    for _ in range(j):
        P = _diff_t(P, d)
    for i, k in enumerate(beta):
        for _ in range(k):
            P = _diff_x(P, i)
    for i, k in enumerate(eta):
        for _ in range(k):
            P = _diff_v(P, i)
    return tuple(sorted(P.items()))


def gamma_polynomial(spec: GammaDerivativeSpec, d: int) -> dict:
    """Exact coefficients of P_{j,beta,eta} keyed by (a, ey, ew)."""
    sp = spec.padded(d)
    return dict(_polynomial(sp.j, sp.beta, sp.eta, d))


def _eval_polynomial(items, s, Y, W):
    out = np.zeros(np.broadcast_shapes(np.shape(s), Y.shape[:-1], W.shape[:-1]))
    for (a, ey, ew), c in items:
        term = float(c) * s ** a
        for i, e in enumerate(ey):
            if e:
                term = term * Y[..., i] ** e
        for i, e in enumerate(ew):
            if e:
                term = term * W[..., i] ** e
        out = out + term
    return out


def gamma_derivative_arrays(spec: GammaDerivativeSpec, t, x, v):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    d = x.shape[-1]
    if np.any(t == 0.0):
        raise SingularPointError("derivatives of Gamma are singular at t = 0")
    sp = spec.padded(d)
    items = _polynomial(sp.j, sp.beta, sp.eta, d)
    ts = np.where(t > 0, t, 1.0)
    P = _eval_polynomial(items, ts ** -0.5, x / ts[..., None] ** 2, v / ts[..., None])
    return np.where(t > 0, P * gamma_arrays(t, x, v), 0.0)


def gamma_derivative(spec: GammaDerivativeSpec, z: PhasePoint) -> float:
    return float(gamma_derivative_arrays(spec, np.array(z.t), z.x, z.v))


class GammaField:
    """Gamma exposed through the ``partial(j, beta, eta)`` derivative protocol."""

    def __init__(self, d: int):
        self.d = d

    def __call__(self, t, x, v):
        return gamma_arrays(t, x, v)

    def partial(self, j=0, beta=(), eta=()):
        spec = GammaDerivativeSpec(j, tuple(beta), tuple(eta))
        return lambda t, x, v: gamma_derivative_arrays(spec, t, x, v)


# -- moment integrals ---------------------------------------------------------

# Per coordinate the Gaussian weight after y = t^{3/2} ybar, w = t^{1/2} wbar is
# exp(-(3 ybar^2 - 3 ybar wbar + wbar^2)); L^T maps (ybar, wbar) to independent
# standard Hermite variables.
_M = np.array([[3.0, -1.5], [-1.5, 1.0]])
_L = np.linalg.cholesky(_M)
_LT_INV = np.linalg.inv(_L.T)
_DET_SQRT = math.sqrt(np.linalg.det(_M))


@dataclass(frozen=True)
class MomentResult:
    value: float
    error_estimate: float
    order: int

    def __float__(self):
        return self.value


def _moment_value(items, d, p, q, t, order):
    xh, wh = roots_hermite(order)
    e1, e2 = np.meshgrid(xh, xh, indexing="ij")
    w2 = np.outer(wh, wh).ravel()
    eta = np.stack([e1.ravel(), e2.ravel()])
    yb, wb = _LT_INV @ eta                          # per-coordinate nodes
    # tensor product over the d coordinates
    grids = np.meshgrid(*([np.arange(yb.size)] * d), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    ybar = yb[idx]
    wbar = wb[idx]
    weights = np.prod(w2[idx], axis=-1) / _DET_SQRT ** d
    y = t ** 1.5 * ybar
    w = t ** 0.5 * wbar
    P = _eval_polynomial(items, np.full(weights.shape, t ** -0.5), y / t ** 2, w / t)
    integrand = np.abs(P) * np.linalg.norm(y, axis=-1) ** p * np.linalg.norm(w, axis=-1) ** q
    return gamma_constant(d) * float(np.sum(weights * integrand))


def _ray_integrals(C, m):
    """int_0^inf |sum_k C[:, k] r^k| r^m exp(-r^2) dr for each row of C.

    The positive real roots of the polynomial split the ray into pieces of
    constant sign; on each piece the integral is exact via incomplete gamma.
    """
    n, K = C.shape
    scale = np.max(np.abs(C), axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    Cn = C / scale
    deg = K - 1
    while deg > 0 and np.all(np.abs(Cn[:, deg]) < 1e-14):
        deg -= 1
    if deg > 0:
        lead = Cn[:, deg].copy()
        small = np.abs(lead) < 1e-14
        lead[small] = 1e-14        # spurious root far out on the ray, where exp(-r^2) ~ 0
        comp = np.zeros((n, deg, deg))
        comp[:, 0, :] = -Cn[:, deg - 1::-1][:, :deg] / lead[:, None]
        if deg > 1:
            comp[:, np.arange(1, deg), np.arange(deg - 1)] = 1.0
        rts = np.linalg.eigvals(comp)
        real = (np.abs(rts.imag) <= 1e-10 * (1 + np.abs(rts.real))) & (rts.real > 0)
        r = np.where(real, rts.real, np.inf)
        r.sort(axis=1)
    else:
        r = np.full((n, 0), np.inf)
    edges = np.concatenate([np.zeros((n, 1)), r, np.full((n, 1), np.inf)], axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    total = np.zeros((n, a.shape[1]))
    for k in range(deg + 1):
        sk = 0.5 * (k + m + 1)
        g = 0.5 * math.gamma(sk) * (gammainc(sk, b * b) - gammainc(sk, a * a))
        total = total + Cn[:, k:k + 1] * g
    return scale[:, 0] * np.sum(np.abs(total), axis=1)


def _moment_polar(items, p, q, t, epsrel=1e-10, limit=200):
    """d = 1 moment integral: polar coordinates in the whitened (y, w) plane."""
    # per-monomial t factor: s^a Y^ey W^ew -> t^{-(a + ey + ew)/2} ybar^ey wbar^ew
    mons = [(float(c) * t ** (-(a + ey[0] + ew[0]) / 2), ey[0], ew[0]) for (a, ey, ew), c in items]
    K = max(e + f for _, e, f in mons) + 1
    row_y, row_w = _LT_INV
    # panel breaks where ybar or wbar vanish along the ray
    breaks = []
    for row in (row_y, row_w):
        th = math.atan2(-row[0], row[1])
        breaks += [th % math.pi, th % math.pi + math.pi]
    breaks = np.unique(np.r_[0.0, breaks, 2 * math.pi])
    mons_arr = [(c, e, f) for c, e, f in mons]

    def integrand(th):
        th = np.atleast_1d(th)
        al = row_y[0] * np.cos(th) + row_y[1] * np.sin(th)
        be = row_w[0] * np.cos(th) + row_w[1] * np.sin(th)
        C = np.zeros((th.size, K))
        for c, e, f in mons_arr:
            C[:, e + f] += c * al ** e * be ** f
        return np.abs(al) ** p * np.abs(be) ** q * _ray_integrals(C, p + q + 1)

    total, err = 0.0, 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        v, e = quad(lambda x: float(integrand(x)[0]), lo, hi, epsabs=0.0, epsrel=epsrel,
                    limit=limit)
        total += v
        err += e
    pref = gamma_constant(1) * t ** (1.5 * p + 0.5 * q) / _DET_SQRT
    return pref * total, pref * err


def gamma_moment_integral(spec: GammaDerivativeSpec, p: float, q: float, t: float,
                          d: int = 1, order: int | None = None,
                          rtol: float | None = None, method: str = "auto") -> MomentResult:
    """Integral of |d Gamma(t, y, w)| |y|^p |w|^q over (y, w).

    ``method="polar"`` (default for d = 1) integrates each ray from the origin
    of the whitened (y, w) plane exactly and the angle adaptively, split where
    the y or w weight vanishes; the estimate is the adaptive one.

    ``method="hermite"`` (default for d > 1) uses tensor Gauss-Hermite with
    ``order`` nodes per axis.  |d Gamma| has kinks where the derivative changes
    sign, so that rule converges only algebraically (as slowly as order^-1);
    its estimate is six times the change against 1.5x the order, twice the
    error a first-order rule would leave.

    If ``rtol`` is given and the estimate exceeds it, :class:`QuadratureError`
    is raised.
    """
    if not t > 0:
        raise ValueError("moment integrals need t > 0")
    if method == "auto":
        method = "polar" if d == 1 else "hermite"
    if method not in ("polar", "hermite"):
        raise ValueError(f"unknown method {method!r}")
    if method == "polar" and d != 1:
        raise ValueError("the polar route is implemented for d = 1")
    sp = spec.padded(d)
    items = _polynomial(sp.j, sp.beta, sp.eta, d)
    if method == "polar":
        val, err = _moment_polar(items, p, q, t)
        order = 0
    else:
        if order is None:
            order = {1: 160, 2: 14, 3: 6}.get(d, 4)
        val = _moment_value(items, d, p, q, t, order)
        ref = _moment_value(items, d, p, q, t, order + max(order // 2, 2))
        err = 6.0 * abs(ref - val)
    if rtol is not None and err > rtol * abs(val):
        raise QuadratureError(
            f"moment quadrature did not converge: estimate {err:.3e} vs value {val:.3e}", err)
    return MomentResult(val, err, order)


# -- convolution solver -------------------------------------------------------

_S_BREAKS = np.array([0.0, 1 / 64, 1 / 16, 1 / 4, 1 / 2, 3 / 4, 15 / 16, 63 / 64, 1.0])


@dataclass(frozen=True)
class ConvolutionRule:
    """Node counts of the nested Gauss-Legendre rule.

    ``n_s`` nodes on each of the graded panels in the elapsed time s, then per
    coordinate ``n_a`` nodes in the velocity offset and ``n_b`` in the position
    offset, both clipped to the source support and to ``n_std`` standard
    deviations of the kernel.
    """

    n_s: int = 12
    n_a: int = 20
    n_b: int = 20
    n_std: float = 8.5
    batch: int = 32

    def coarser(self) -> "ConvolutionRule":
        return ConvolutionRule(max(self.n_s * 2 // 3, 4), max(self.n_a * 2 // 3, 4),
                               max(self.n_b * 2 // 3, 4), self.n_std, self.batch)


def _gl_nodes(lo, hi, n):
    x, w = roots_legendre(n)
    half = 0.5 * np.maximum(hi - lo, 0.0)
    mid = 0.5 * (hi + lo)
    nodes = mid[..., None] + half[..., None] * x
    weights = half[..., None] * w
    return nodes, weights


def _expand_derivative(source, j, beta, eta, d):
    """d_t^j d_x^beta d_v^eta u as sum of coef * s^m * (partial g)(...) terms."""
    beta = tuple(beta) + (0,) * (d - len(beta))
    eta = tuple(eta) + (0,) * (d - len(eta))
    combos = [((), 1.0, 0)]
    for i in range(d):
        new = []
        for ks, c, m in combos:
            for k in range(eta[i] + 1):
                new.append((ks + (k,), c * math.comb(eta[i], k) * (-1.0) ** k, m + k))
        combos = new
    terms = []
    for ks, c, m in combos:
        xb = tuple(beta[i] + ks[i] for i in range(d))
        vb = tuple(eta[i] - ks[i] for i in range(d))
        if j == 0 and not any(xb) and not any(vb):
            field = source
        else:
            if not hasattr(source, "partial"):
                raise ValueError("derivatives of the solution need a source with analytic partials")
            field = source.partial(j, xb, vb)
        terms.append((c, m, field))
    return terms


def _eval_source(field, tau, ys, ws):
    if hasattr(field, "terms") and hasattr(field, "evaluate_split"):
        return field.evaluate_split(tau, ys, ws)
    shape = np.broadcast_shapes(tau.shape, *[a.shape for a in ys], *[a.shape for a in ws])
    x = np.stack([np.broadcast_to(a, shape) for a in ys], axis=-1)
    v = np.stack([np.broadcast_to(a, shape) for a in ws], axis=-1)
    return field(np.broadcast_to(tau, shape), x, v)


def _solve_batch(integrands, t_lo, t_hi, source, T, X, V, rule):
    """Convolution values for a batch of points; returns array (n_out, P)."""
    P_, d = X.shape
    frac_nodes, frac_w = [], []
    for a, b in zip(_S_BREAKS[:-1], _S_BREAKS[1:]):
        n, w = _gl_nodes(np.array(a), np.array(b), rule.n_s)
        frac_nodes.append(n)
        frac_w.append(w)
    frac_nodes = np.concatenate(frac_nodes)
    frac_w = np.concatenate(frac_w)
    s_lo = np.maximum(0.0, T - t_hi)
    s_hi = T - t_lo
    length = np.maximum(s_hi - s_lo, 0.0)
    s = s_lo[:, None] + length[:, None] * frac_nodes          # (P, Ns)
    ws = length[:, None] * frac_w
    s = np.where(length[:, None] > 0, s, 1.0)
    tau = T[:, None] - s
    xlo, xhi, vlo, vhi = source.slab(tau)                     # (P, Ns, d)
    # axes: (P, Ns, [a_i, b_i] for each coordinate)
    extra = 2 * d
    kernel = np.ones((1, 1) + (1,) * extra)
    ys, wvs = [], []
    for i in range(d):
        sh = s[..., None]
        A = rule.n_std * np.sqrt(2.0 * sh[..., 0])
        a_lo = np.maximum(V[:, None, i] - vhi[..., i], -A)
        a_hi = np.minimum(V[:, None, i] - vlo[..., i], A)
        a, wa = _gl_nodes(a_lo, a_hi, rule.n_a)               # (P, Ns, na)
        sa = s[..., None]
        B = rule.n_std * sa ** 1.5 / math.sqrt(6.0)
        cen = 0.5 * a * sa
        base = X[:, None, None, i] - sa * (V[:, None, None, i] - a)
        b_lo = np.maximum(base - xhi[..., None, i], cen - B)
        b_hi = np.minimum(base - xlo[..., None, i], cen + B)
        b, wb = _gl_nodes(b_lo, b_hi, rule.n_b)               # (P, Ns, na, nb)
        # 1D kernel factor Gamma_1(s, b, a)
        s4 = sa[..., None]
        a4 = a[..., None]
        k1 = (gamma_constant(1) / s4 ** 2
              * np.exp(-3.0 * (b - 0.5 * a4 * s4) ** 2 / s4 ** 3 - 0.25 * a4 * a4 / s4))
        wgt = k1 * wa[..., None] * wb
        y_i = X[:, None, None, None, i] - b - s4 * (V[:, None, None, None, i] - a4)
        w_i = V[:, None, None, None, i] - a4
        shape = (P_, s.shape[1]) + (1,) * (2 * i) + (rule.n_a, rule.n_b) + (1,) * (2 * (d - 1 - i))
        kernel = kernel * wgt.reshape(shape)
        ys.append(y_i.reshape(shape))
        wvs.append(np.broadcast_to(w_i, wgt.shape).reshape(shape))
    kernel = kernel * ws.reshape((P_, -1) + (1,) * extra)
    tau_b = tau.reshape((P_, -1) + (1,) * extra)
    s_b = s.reshape((P_, -1) + (1,) * extra)
    out = np.zeros((len(integrands), P_))
    axes = tuple(range(1, 2 + extra))
    for k, terms in enumerate(integrands):
        acc = 0.0
        for c, m, field in terms:
            vals = _eval_source(field, tau_b, ys, wvs)
            acc = acc + c * (s_b ** m if m else 1.0) * vals
        out[k] = np.sum(kernel * acc, axis=axes)
    return out


def solve_on_points(source, T, X, V, derivatives: Sequence = ((0, (), ()),),
                    rule: ConvolutionRule | None = None, threads: int = 1,
                    return_error: bool = False):
    """Solution of d_t u + v.grad_x u - Lap_v u = g (and requested derivatives) at points.

    ``source`` exposes ``__call__(t, x, v)``, ``t_support`` and ``slab(t)``;
    derivatives of the solution need ``source.partial`` and a source that
    vanishes at both ends of its time support.  Returns an array of shape
    ``(len(derivatives), n_points)`` (and a same-shaped error estimate when
    ``return_error`` is set).
    """
    rule = rule or ConvolutionRule()
    T = np.atleast_1d(np.asarray(T, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    d = X.shape[1]
    if getattr(source, "is_zero", False):
        z = np.zeros((len(derivatives), T.size))
        return (z, z.copy()) if return_error else z
    t_lo, t_hi = source.t_support
    integrands = [_expand_derivative(source, j, beta, eta, d) for j, beta, eta in derivatives]

    def run(r):
        chunks = [slice(i, min(i + r.batch, T.size)) for i in range(0, T.size, r.batch)]

        def job(sl):
            return _solve_batch(integrands, t_lo, t_hi, source, T[sl], X[sl], V[sl], r)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(job, chunks))
        else:
            parts = [job(sl) for sl in chunks]
        return np.concatenate(parts, axis=1) if parts else np.zeros((len(integrands), 0))

    vals = run(rule)
    if return_error:
        return vals, np.abs(vals - run(rule.coarser()))
    return vals


def solve_const_isotropic(source, z: PhasePoint, rule: ConvolutionRule | None = None,
                          tol: float | None = None) -> float:
    """u(z) = int Gamma(S_zeta^{-1} z) g(zeta) dzeta for the isotropic operator."""
    if tol is None:
        return float(solve_on_points(source, [z.t], z.x[None], z.v[None], rule=rule)[0, 0])
    val, err = solve_on_points(source, [z.t], z.x[None], z.v[None], rule=rule, return_error=True)
    if err[0, 0] > tol:
        raise QuadratureError(f"convolution estimate {err[0, 0]:.3e} exceeds {tol:.3e}",
                              float(err[0, 0]))
    return float(val[0, 0])


def _mapped(source, P):
    diag = np.allclose(P, np.diag(np.diag(P)))
    if diag and hasattr(source, "rescaled"):
        p = np.diag(P)
        return source.rescaled(1.0, p, p)
    from .fields import MappedSource
    return MappedSource(source, P)


def solve_const_anisotropic(op: ConstantOperator, source, z: PhasePoint,
                            rule: ConvolutionRule | None = None) -> float:
    """Solve with tr(A0 D_v^2) via P = A0^{1/2}: u(t, P x, P v) = u_P(t, x, v)."""
    P = op.sqrt()
    Pinv = np.linalg.inv(P)
    gP = _mapped(source, P)
    return float(solve_on_points(gP, [z.t], (Pinv @ z.x)[None], (Pinv @ z.v)[None],
                                 rule=rule)[0, 0])


def solve_anisotropic_on_points(op: ConstantOperator, source, T, X, V,
                                derivatives=((0, (), ()),), rule=None, threads=1):
    """Grid version of :func:`solve_const_anisotropic` with derivatives (diagonal A0)."""
    P = op.sqrt()
    Pinv = np.linalg.inv(P)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    needs_chain = any(any(b) or any(e) for _, b, e in derivatives)
    if needs_chain and not np.allclose(P, np.diag(np.diag(P))):
        raise NotImplementedError("solution derivatives need a diagonal A0")
    vals = solve_on_points(_mapped(source, P), T, X @ Pinv.T, V @ Pinv.T,
                           derivatives, rule=rule, threads=threads)
    pinv = np.diag(Pinv)
    for k, (_, beta, eta) in enumerate(derivatives):
        factor = 1.0
        for i, b in enumerate(beta):
            factor *= pinv[i] ** b
        for i, e in enumerate(eta):
            factor *= pinv[i] ** e
        vals[k] *= factor
    return vals


# -- residual -----------------------------------------------------------------

def residual(u, op: ConstantOperator, z: PhasePoint) -> float:
    """d_t u + v . grad_x u - tr(A0 D_v^2 u) at z; ``u.partial`` supplies derivatives."""
    if not hasattr(u, "partial"):
        raise ValueError("residual needs a field exposing partial(j, beta, eta)")
    d = z.d
    T = np.array([z.t])
    X = z.x[None]
    V = z.v[None]

    def unit(i):
        e = [0] * d
        e[i] = 1
        return tuple(e)

    val = float(u.partial(1, (0,) * d, (0,) * d)(T, X, V)[0])
    for i in range(d):
        val += z.v[i] * float(u.partial(0, unit(i), (0,) * d)(T, X, V)[0])
    A0 = op.A0
    for i in range(d):
        for k in range(d):
            if A0[i, k]:
                eta = [0] * d
                eta[i] += 1
                eta[k] += 1
                val -= A0[i, k] * float(u.partial(0, (0,) * d, tuple(eta))(T, X, V)[0])
    return val


# -- verification reports -------------------------------------------------------

def _report(case_id):
    from .report import VerificationReport
    return VerificationReport(case_id)


def residual_report(d: int = 1, n: int = 1000, seed: int = 0, rtol: float = 1e-9):
    """Residual of Gamma under d_t + v.grad_x - Lap_v at random points, relative to Gamma."""
    rep = _report(f"gamma-residual(d={d})")
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.05, 2.0, n)
    x = rng.normal(size=(n, d)) * t[:, None] ** 1.5
    v = rng.normal(size=(n, d)) * t[:, None] ** 0.5
    zero = (0,) * d
    unit = lambda i: tuple(int(k == i) for k in range(d))
    res = gamma_derivative_arrays(GammaDerivativeSpec(1, zero, zero), t, x, v)
    for i in range(d):
        res = res + v[:, i] * gamma_derivative_arrays(GammaDerivativeSpec(0, unit(i), zero), t, x, v)
        e = tuple(2 * k for k in unit(i))
        res = res - gamma_derivative_arrays(GammaDerivativeSpec(0, zero, e), t, x, v)
    g = gamma_arrays(t, x, v)
    live = g > 1e-30
    rel = np.abs(res[live]) / g[live]
    worst = float(np.max(rel, initial=0.0))
    rep.measured.update({"points": float(live.sum()), "max |residual|/Gamma": worst})
    rep.compare("max |residual|/Gamma", worst, rtol, 0.0, "le", "fundamental-solution")
    return rep


def normalization_report(times=(0.1, 0.5, 1.0), d: int = 1, tol: float = 1e-6):
    rep = _report(f"gamma-normalization(d={d})")
    spec = GammaDerivativeSpec(0, (0,) * d, (0,) * d)
    for t in times:
        m = gamma_moment_integral(spec, 0, 0, t, d)
        rep.measured[f"mass@t={t}"] = m.value
        rep.error_estimates[f"mass@t={t}"] = m.error_estimate
        rep.compare(f"mass@t={t}", m.value, 1.0, tol, "abs", "unit-mass")
    return rep


def derivative_specs(d: int, max_weight: int):
    """Every (j, beta, eta) with |eta| + 2j + 3|beta| <= max_weight."""
    import itertools
    out = []
    for j in range(max_weight // 2 + 1):
        for beta in itertools.product(range(max_weight // 3 + 1), repeat=d):
            for eta in itertools.product(range(max_weight + 1), repeat=d):
                s = GammaDerivativeSpec(j, beta, eta)
                if s.weighted_order <= max_weight:
                    out.append(s)
    return out


def moment_scaling_report(d: int = 1, times=(0.1, 0.2, 0.4, 0.8), max_weight: int = 3,
                          pq=((0, 0), (0, 1), (1, 0), (1, 1)), tol: float = 0.05,
                          order: int | None = None):
    """Log-log slope in t of each moment integral against -(l/2+j+3k/2) + 3p/2 + q/2."""
    from .report import fit_power_law
    rep = _report(f"gamma-moment-scaling(d={d})")
    for spec in derivative_specs(d, max_weight):
        for p, q in pq:
            vals, errs = [], []
            for t in times:
                m = gamma_moment_integral(spec, p, q, t, d, order)
                vals.append(m.value)
                errs.append(m.error_estimate / max(abs(m.value), 1e-300))
            name = f"j={spec.j},beta={spec.beta},eta={spec.eta},p={p},q={q}"
            fit, _ = fit_power_law(times, vals, name)
            rep.fits.append(fit)
            rep.error_estimates[name] = max(errs)
            rep.compare(name, fit.slope, spec.moment_exponent(p, q), tol, "abs",
                        "derivative-moment-scaling")
    return rep


def solver_accuracy_report(u_star=None, n: int = 17, rule: ConvolutionRule | None = None,
                           threads: int = 1, tol: float = 1e-3, A0=None):
    """Recover a compactly supported u* from g = L u* on an n^(1+2d) grid over Q_1."""
    from .fields import bump_field
    if u_star is None:
        u_star = bump_field(1, v_tilt=0.3)
    d = u_star.d
    op = ConstantOperator(np.eye(d) if A0 is None else np.asarray(A0, float))
    g = u_star.kinetic_operator(op.A0)
    rep = _report(f"solver-accuracy(d={d}, n={n})")
    ax_t = np.linspace(-1.0, 0.0, n)
    ax = np.linspace(-1.0, 1.0, n)
    mesh = np.meshgrid(ax_t, *([ax] * (2 * d)), indexing="ij")
    T = mesh[0].ravel()
    X = np.stack([m.ravel() for m in mesh[1:1 + d]], axis=-1)
    V = np.stack([m.ravel() for m in mesh[1 + d:]], axis=-1)
    if np.allclose(op.A0, np.eye(d)):
        u = solve_on_points(g, T, X, V, rule=rule, threads=threads)[0]
    else:
        u = solve_anisotropic_on_points(op, g, T, X, V, rule=rule, threads=threads)[0]
    exact = u_star(T, X, V)
    scale = float(np.max(np.abs(exact)))
    err = float(np.max(np.abs(u - exact))) / scale
    rep.measured.update({"points": float(T.size), "max |u*|": scale, "relative Linf error": err})
    rep.compare("relative Linf error", err, tol, 0.0, "le", "convolution-solution")
    return rep
