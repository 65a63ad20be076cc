"""Closed-form separable fields with exact derivatives of every order.

A :class:`SeparableField` is a finite sum of terms
``c * f_t(t) * prod_i f_{x,i}(x_i) * prod_i f_{v,i}(v_i)`` where every factor
is a :class:`Factor`: ``p(s) * exp(-a (s - c)^2) * cos(w s + phi)`` optionally
restricted to an interval.  These fields serve as manufactured solutions,
compactly supported sources, and analytic test fields.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = ["Factor", "Term", "SeparableField", "bump_factor", "poly_factor",
           "constant_factor", "cos_factor", "bump_field", "MappedSource", "ShiftedSource"]


@dataclass(frozen=True)
class Factor:
    poly: Polynomial
    lo: float = -np.inf
    hi: float = np.inf
    gauss: float = 0.0
    center: float = 0.0
    freq: float = 0.0
    phase: float = 0.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self.poly(s)
        if self.gauss:
            out = out * np.exp(-self.gauss * (s - self.center) ** 2)
        if self.freq:
            out = out * np.cos(self.freq * s + self.phase)
        elif self.phase:
            out = out * math.cos(self.phase)
        if np.isfinite(self.lo) or np.isfinite(self.hi):
            out = np.where((s >= self.lo) & (s <= self.hi), out, 0.0)
        return out

    @property
    def is_zero(self) -> bool:
        return not np.any(self.poly.coef)

    def _identity(self):
        return Polynomial.identity(domain=self.poly.domain, window=self.poly.window)

    def deriv(self) -> list["Factor"]:
        """Derivative as a sum of factors (inside the support interval)."""
        out = [replace(self, poly=self.poly.deriv())]
        if self.gauss:
            shifted = self._identity() - self.center
            out.append(replace(self, poly=-2.0 * self.gauss * shifted * self.poly))
        if self.freq:
            out.append(replace(self, poly=-self.freq * self.poly,
                               phase=self.phase - 0.5 * np.pi))
        return [f for f in out if not f.is_zero]

    def times_identity(self) -> "Factor":
        """The factor multiplied by its own variable s."""
        return replace(self, poly=self._identity() * self.poly)

    def rescaled(self, p: float) -> "Factor":
        """s -> f(p s) for p > 0."""
        if not p > 0:
            raise ValueError("rescaling requires a positive factor")
        dom = np.asarray(self.poly.domain, dtype=float) / p
        poly = Polynomial(self.poly.coef, domain=dom, window=self.poly.window)
        return Factor(poly, self.lo / p, self.hi / p, self.gauss * p * p,
                      self.center / p, self.freq * p, self.phase)

    def shifted(self, c: float) -> "Factor":
        """s -> f(s - c)."""
        dom = np.asarray(self.poly.domain, dtype=float) + c
        poly = Polynomial(self.poly.coef, domain=dom, window=self.poly.window)
        return Factor(poly, self.lo + c, self.hi + c, self.gauss, self.center + c,
                      self.freq, self.phase - self.freq * c)


def _combine(f: Factor, g: Factor) -> list[Factor]:
    """Product of two factors as a sum of factors."""
    p = f.poly.convert() * g.poly.convert()
    lo, hi = max(f.lo, g.lo), min(f.hi, g.hi)
    gauss = f.gauss + g.gauss
    center = 0.0
    if gauss:
        center = (f.gauss * f.center + g.gauss * g.center) / gauss
        p = p * math.exp(-f.gauss * g.gauss * (f.center - g.center) ** 2 / gauss)
    if not f.freq or not g.freq:
        const = math.cos(f.phase) if not f.freq else math.cos(g.phase)
        freq, phase = (g.freq, g.phase) if not f.freq else (f.freq, f.phase)
        if not freq:
            freq, phase = 0.0, 0.0
        return [Factor(p * const, lo, hi, gauss, center, freq, phase)]
    # cos a cos b = (cos(a + b) + cos(a - b)) / 2
    return [Factor(p * 0.5, lo, hi, gauss, center, f.freq + g.freq, f.phase + g.phase),
            Factor(p * 0.5, lo, hi, gauss, center, f.freq - g.freq, f.phase - g.phase)]


def poly_factor(coef: Sequence[float]) -> Factor:
    """Global polynomial sum_k coef[k] s^k."""
    return Factor(Polynomial(list(coef)))


def constant_factor(c: float = 1.0) -> Factor:
    return Factor(Polynomial([c]))


def cos_factor(freq: float, phase: float = 0.0, scale: float = 1.0) -> Factor:
    """scale * cos(freq s + phase)."""
    return Factor(Polynomial([scale]), freq=float(freq), phase=float(phase))


def bump_factor(center: float, halfwidth: float, power: int = 6) -> Factor:
    """(1 - ((s - center)/halfwidth)^2)^power on [center - h, center + h]; C^{power-1}."""
    base = Polynomial([1.0, 0.0, -1.0], domain=[center - halfwidth, center + halfwidth],
                      window=[-1.0, 1.0])
    return Factor(base ** power, center - halfwidth, center + halfwidth)


@dataclass(frozen=True)
class Term:
    coef: float
    ft: Factor
    fx: tuple
    fv: tuple

    def __call__(self, t, x, v):
        out = self.coef * self.ft(t)
        for i, f in enumerate(self.fx):
            out = out * f(x[..., i])
        for i, f in enumerate(self.fv):
            out = out * f(v[..., i])
        return out


def _support(factor: Factor):
    return factor.lo, factor.hi


class SeparableField:
    """Sum of separable terms in (t, x_1..x_d, v_1..v_d)."""

    def __init__(self, terms: Sequence[Term], d: int):
        self.terms = [tm for tm in terms if tm.coef != 0.0]
        self.d = int(d)
        for tm in self.terms:
            if len(tm.fx) != self.d or len(tm.fv) != self.d:
                raise ValueError("term dimension does not match field dimension")

    # construction -------------------------------------------------------
    @classmethod
    def product(cls, ft: Factor, fx: Sequence[Factor], fv: Sequence[Factor], coef=1.0):
        return cls([Term(float(coef), ft, tuple(fx), tuple(fv))], len(fx))

    @classmethod
    def zero(cls, d: int):
        return cls([], d)

    # evaluation ---------------------------------------------------------
    def __call__(self, t, x, v):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.zeros(np.broadcast_shapes(t.shape, x.shape[:-1], v.shape[:-1]))
        for tm in self.terms:
            out = out + tm(t, x, v)
        return out

    def evaluate_split(self, t, xs, vs):
        """Evaluate with per-coordinate arrays that only need to broadcast together."""
        out = 0.0
        for tm in self.terms:
            val = tm.coef * tm.ft(np.asarray(t, dtype=float))
            for f, a in zip(tm.fx, xs):
                val = val * f(a)
            for f, a in zip(tm.fv, vs):
                val = val * f(a)
            out = out + val
        return out

    def at(self, z):
        return float(self(np.array(z.t), z.x, z.v))

    # algebra ------------------------------------------------------------
    def __add__(self, other: "SeparableField") -> "SeparableField":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return SeparableField(self.terms + other.terms, self.d)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, c: float) -> "SeparableField":
        return SeparableField([replace(tm, coef=tm.coef * c) for tm in self.terms], self.d)

    __rmul__ = __mul__

    def multiply(self, other: "SeparableField") -> "SeparableField":
        """Pointwise product of two fields, expanded exactly into separable terms."""
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        terms = []
        for a in self.terms:
            for b in other.terms:
                slots = [_combine(a.ft, b.ft)]
                slots += [_combine(f, g) for f, g in zip(a.fx + a.fv, b.fx + b.fv)]
                for combo in itertools.product(*slots):
                    terms.append(Term(a.coef * b.coef, combo[0], tuple(combo[1:1 + self.d]),
                                      tuple(combo[1 + self.d:])))
        return SeparableField(terms, self.d)

    def _diff_slot(self, slot: str, i: int = 0) -> "SeparableField":
        terms = []
        for tm in self.terms:
            if slot == "t":
                terms += [replace(tm, ft=f) for f in tm.ft.deriv()]
            else:
                facs = tm.fx if slot == "x" else tm.fv
                for f in facs[i].deriv():
                    new = facs[:i] + (f,) + facs[i + 1:]
                    terms.append(replace(tm, fx=new) if slot == "x" else replace(tm, fv=new))
        return SeparableField(terms, self.d)

    def dt(self, j: int = 1):
        out = self
        for _ in range(j):
            out = out._diff_slot("t")
        return out

    def dx(self, i: int, k: int = 1):
        out = self
        for _ in range(k):
            out = out._diff_slot("x", i)
        return out

    def dv(self, i: int, k: int = 1):
        out = self
        for _ in range(k):
            out = out._diff_slot("v", i)
        return out

    def partial(self, j: int = 0, beta: Sequence[int] = (), eta: Sequence[int] = ()):
        """d_t^j d_x^beta d_v^eta as a new field."""
        out = self.dt(j)
        for i, k in enumerate(beta):
            out = out.dx(i, k)
        for i, k in enumerate(eta):
            out = out.dv(i, k)
        return out

    def times_v(self, i: int) -> "SeparableField":
        terms = []
        for tm in self.terms:
            fv = tm.fv[:i] + (tm.fv[i].times_identity(),) + tm.fv[i + 1:]
            terms.append(replace(tm, fv=fv))
        return SeparableField(terms, self.d)

    def transport(self) -> "SeparableField":
        """v . grad_x of the field."""
        out = SeparableField.zero(self.d)
        for i in range(self.d):
            out = out + self.dx(i).times_v(i)
        return out

    def kinetic_operator(self, A0=None) -> "SeparableField":
        """d_t u + v . grad_x u - tr(A0 D_v^2 u) for a constant matrix A0 (default I)."""
        A0 = np.eye(self.d) if A0 is None else np.asarray(A0, dtype=float)
        out = self.dt() + self.transport()
        for i in range(self.d):
            for j in range(self.d):
                if A0[i, j] != 0.0:
                    out = out - self.dv(i).dv(j) * float(A0[i, j])
        return out

    def rescaled(self, ts: float = 1.0, xs=None, vs=None) -> "SeparableField":
        """(t, x, v) -> u(ts t, xs * x, vs * v) with positive diagonal scalings."""
        xs = np.ones(self.d) if xs is None else np.broadcast_to(np.asarray(xs, float), (self.d,))
        vs = np.ones(self.d) if vs is None else np.broadcast_to(np.asarray(vs, float), (self.d,))
        terms = []
        for tm in self.terms:
            terms.append(Term(tm.coef, tm.ft.rescaled(ts),
                              tuple(f.rescaled(p) for f, p in zip(tm.fx, xs)),
                              tuple(f.rescaled(p) for f, p in zip(tm.fv, vs))))
        return SeparableField(terms, self.d)

    # support ------------------------------------------------------------
    @property
    def t_support(self):
        if not self.terms:
            return (0.0, 0.0)
        los, his = zip(*(_support(tm.ft) for tm in self.terms))
        return min(los), max(his)

    def box(self):
        """Bounding box (xlo, xhi, vlo, vhi) of the support in x and v."""
        d = self.d
        if not self.terms:
            z = np.zeros(d)
            return z, z.copy(), z.copy(), z.copy()
        xlo = np.full(d, np.inf)
        xhi = np.full(d, -np.inf)
        vlo = np.full(d, np.inf)
        vhi = np.full(d, -np.inf)
        for tm in self.terms:
            for i in range(d):
                xlo[i] = min(xlo[i], tm.fx[i].lo)
                xhi[i] = max(xhi[i], tm.fx[i].hi)
                vlo[i] = min(vlo[i], tm.fv[i].lo)
                vhi[i] = max(vhi[i], tm.fv[i].hi)
        return xlo, xhi, vlo, vhi

    def slab(self, t):
        """Support box in (x, v) at times t; constant for separable fields."""
        t = np.asarray(t, dtype=float)
        xlo, xhi, vlo, vhi = self.box()
        shape = t.shape + (self.d,)
        return (np.broadcast_to(xlo, shape), np.broadcast_to(xhi, shape),
                np.broadcast_to(vlo, shape), np.broadcast_to(vhi, shape))

    @property
    def is_zero(self) -> bool:
        return not self.terms


def bump_field(d: int, t_center=-0.5, t_half=0.4, x_center=0.0, x_half=0.8,
               v_center=0.0, v_half=0.8, power=6, coef=1.0, v_tilt=0.0) -> SeparableField:
    """Tensor-product polynomial bump; ``v_tilt`` multiplies by (1 + v_tilt * v_1)."""
    xc = np.broadcast_to(np.asarray(x_center, float), (d,))
    vc = np.broadcast_to(np.asarray(v_center, float), (d,))
    field = SeparableField.product(
        bump_factor(t_center, t_half, power),
        [bump_factor(xc[i], x_half, power) for i in range(d)],
        [bump_factor(vc[i], v_half, power) for i in range(d)],
        coef,
    )
    if v_tilt:
        field = field + field.times_v(0) * v_tilt
    return field


class MappedSource:
    """g_P(t, x, v) = g(t, P x, P v) for a symmetric positive definite P."""

    def __init__(self, g, P):
        self.g = g
        self.P = np.asarray(P, dtype=float)
        self.d = self.P.shape[0]
        self.Pinv = np.linalg.inv(self.P)

    def __call__(self, t, x, v):
        return self.g(t, x @ self.P.T, v @ self.P.T)

    @property
    def t_support(self):
        return self.g.t_support

    def slab(self, t):
        xlo, xhi, vlo, vhi = self.g.slab(t)
        return _mapped_box(self.Pinv, xlo, xhi) + _mapped_box(self.Pinv, vlo, vhi)


def _mapped_box(M, lo, hi):
    """Bounding box of M applied to the box [lo, hi]."""
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    mc = c @ M.T
    mh = h @ np.abs(M).T
    return mc - mh, mc + mh


class ShiftedSource:
    """g(S_{z0}^{-1} z): the source transported by the Galilean shift."""

    def __init__(self, g, z0):
        self.g = g
        self.z0 = z0
        self.d = z0.d

    def __call__(self, t, x, v):
        t = np.asarray(t, dtype=float)
        dt = t - self.z0.t
        return self.g(dt, x - self.z0.x - dt[..., None] * self.z0.v, v - self.z0.v)

    @property
    def t_support(self):
        lo, hi = self.g.t_support
        return lo + self.z0.t, hi + self.z0.t

    def slab(self, t):
        t = np.asarray(t, dtype=float)
        dt = t - self.z0.t
        xlo, xhi, vlo, vhi = self.g.slab(dt)
        off = self.z0.x + dt[..., None] * self.z0.v
        return xlo + off, xhi + off, vlo + self.z0.v, vhi + self.z0.v
