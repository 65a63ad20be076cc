"""Kinetic Hölder seminorms estimated on sampled fields.

A :class:`SampledField` stores values on a tensor grid laid over a cylinder
``Q_r(z0)``: the grid is the image under ``S_{z0} o delta_r`` of a reference
grid on ``[-1, 0] x [-1, 1]^d x [-1, 1]^d``, so x-nodes are sheared along the
transport direction.  For d > 1 the x and v balls are cut out of the box by a
mask.  Points sit on the closure of the cylinder.

Seminorms are maxima of difference quotients over sampled pairs and are
therefore lower bounds of the true suprema.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .geometry import KineticCylinder, quasimetric_arrays
from .report import VerificationReport

__all__ = [
    "GridSpec",
    "SampledField",
    "SeminormSpec",
    "SeminormEstimate",
    "KINDS",
    "DEFAULT_PAIR_BUDGET",
    "seminorm",
    "quantity_seminorm",
    "sup_norm",
    "check_interpolation",
]

DEFAULT_PAIR_BUDGET = 1_000_000
KINDS = ("alpha", "alpha_x", "alpha_t", "one_plus", "two_plus", "primed_two_plus",
         "double_primed_three_plus")
_QUANTITIES = ("u", "dt", "grad_x", "grad_v", "hess_v", "d3_v")


@dataclass(frozen=True)
class GridSpec:
    n_t: int
    n_x: tuple
    n_v: tuple

    def __post_init__(self):
        n_x = tuple(int(n) for n in np.atleast_1d(self.n_x))
        n_v = tuple(int(n) for n in np.atleast_1d(self.n_v))
        if len(n_x) != len(n_v):
            raise ValueError("n_x and n_v must have one entry per dimension")
        if int(self.n_t) < 1 or min(n_x + n_v) < 1:
            raise ValueError("resolutions must be positive")
        object.__setattr__(self, "n_t", int(self.n_t))
        object.__setattr__(self, "n_x", n_x)
        object.__setattr__(self, "n_v", n_v)

    @classmethod
    def uniform(cls, d: int, n: int, n_t: int | None = None):
        return cls(n if n_t is None else n_t, (n,) * d, (n,) * d)

    @property
    def d(self) -> int:
        return len(self.n_x)

    @property
    def shape(self) -> tuple:
        return (self.n_t,) + self.n_x + self.n_v

    @property
    def count(self) -> int:
        return int(np.prod(self.shape))

    def refined(self) -> "GridSpec":
        """Grid with half the spacing on every axis with more than one node."""
        f = lambda n: 2 * n - 1 if n > 1 else 1
        return GridSpec(f(self.n_t), tuple(map(f, self.n_x)), tuple(map(f, self.n_v)))


def _ref_axes(grid: GridSpec):
    tau = np.array([0.0]) if grid.n_t == 1 else np.linspace(-1.0, 0.0, grid.n_t)
    xi = [np.array([0.0]) if n == 1 else np.linspace(-1.0, 1.0, n) for n in grid.n_x]
    eta = [np.array([0.0]) if n == 1 else np.linspace(-1.0, 1.0, n) for n in grid.n_v]
    return tau, xi, eta


class SampledField:
    """Values of a (scalar or tensor valued) function on a cylinder grid.

    ``derivative_supplier`` exposes ``partial(j, beta, eta)`` returning an
    evaluator ``(t, x, v) -> values``; without it derivatives come from finite
    differences.  ``evaluator`` evaluates the field off the grid (needed by the
    t-seminorm when the cylinder moves with nonzero velocity).
    """

    def __init__(self, domain: KineticCylinder, grid: GridSpec, values,
                 derivative_supplier=None, evaluator: Callable | None = None):
        if grid.d != domain.d:
            raise ValueError("grid and cylinder dimensions differ")
        values = np.asarray(values, dtype=float)
        if values.shape[:len(grid.shape)] != grid.shape:
            if values.ndim >= 1 and values.size % grid.count == 0:
                values = values.reshape(grid.shape + values.shape[1:] if values.ndim > 1
                                        else grid.shape)
            else:
                raise ValueError(f"values of shape {values.shape} do not match grid {grid.shape}")
        self.domain = domain
        self.grid = grid
        self.values = values
        self.derivative_supplier = derivative_supplier
        self.evaluator = evaluator
        self._cache = {}
        tau, xi, eta = _ref_axes(grid)
        d, r, z0 = grid.d, domain.radius, domain.center
        mesh = np.meshgrid(tau, *xi, *eta, indexing="ij")
        self.tau = mesh[0]
        self.xi = np.stack(mesh[1:1 + d], axis=-1)
        self.eta = np.stack(mesh[1 + d:], axis=-1)
        self.T = z0.t + r * r * self.tau
        self.X = z0.x + r ** 3 * self.xi + (self.T - z0.t)[..., None] * z0.v
        self.V = z0.v + r * self.eta
        tol = 1e-12
        self.mask = ((np.linalg.norm(self.xi, axis=-1) <= 1 + tol)
                     & (np.linalg.norm(self.eta, axis=-1) <= 1 + tol))

    @classmethod
    def from_function(cls, domain: KineticCylinder, grid: GridSpec, u, derivative_supplier="auto"):
        """Sample a callable ``u(t, x, v)`` on the grid of ``domain``."""
        probe = cls(domain, grid, np.zeros(grid.shape))
        values = np.asarray(u(probe.T, probe.X, probe.V), dtype=float)
        if derivative_supplier == "auto":
            derivative_supplier = u if hasattr(u, "partial") else None
        return cls(domain, grid, values, derivative_supplier, evaluator=u)

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def component_shape(self) -> tuple:
        return self.values.shape[len(self.grid.shape):]

    @property
    def point_count(self) -> int:
        return int(self.mask.sum())

    def restricted(self, values) -> "SampledField":
        """Same grid with other values and no derivative access."""
        return SampledField(self.domain, self.grid, values)

    # derivative access --------------------------------------------------
    def _flat(self, arr):
        return arr.reshape(self.grid.shape + (-1,))

    def _analytic(self, name, T=None, X=None, V=None):
        sup = self.derivative_supplier
        d = self.d
        zero = (0,) * d
        if T is None:
            T, X, V = self.T, self.X, self.V

        def ev(j, beta, eta):
            # scalar or tensor valued; trailing component axes are flattened
            out = np.asarray(sup.partial(j, beta, eta)(T, X, V), dtype=float)
            comp = out.shape[np.ndim(T):] if out.ndim > np.ndim(T) else ()
            out = np.broadcast_to(out, np.shape(T) + comp)
            return out.reshape(np.shape(T) + (-1,))

        def unit(*idx):
            e = [0] * d
            for i in idx:
                e[i] += 1
            return tuple(e)

        if name == "dt":
            comps = [ev(1, zero, zero)]
        elif name == "grad_x":
            comps = [ev(0, unit(i), zero) for i in range(d)]
        elif name == "grad_v":
            comps = [ev(0, zero, unit(i)) for i in range(d)]
        elif name == "hess_v":
            comps = [ev(0, zero, unit(i, k)) for i in range(d) for k in range(d)]
        else:
            comps = [ev(0, zero, unit(i, k, m)) for i in range(d) for k in range(d)
                     for m in range(d)]
        return np.concatenate(comps, axis=-1)

    def _axis_derivative(self, arr, ax_kind, i=0):
        """Physical derivative of a flat-component array along one direction by finite differences."""
        d, r, v0 = self.d, self.domain.radius, self.domain.center.v
        tau, xi, eta = _ref_axes(self.grid)
        if ax_kind == "v":
            ax, ref, scale = 1 + d + i, eta[i], 1.0 / r
        elif ax_kind == "x":
            ax, ref, scale = 1 + i, xi[i], r ** -3
        else:
            ax, ref, scale = 0, tau, r ** -2
        if ref.size < 3:
            raise ValueError(f"finite differences need at least 3 nodes along the {ax_kind} axis")
        out = np.gradient(arr, ref, axis=ax, edge_order=2) * scale
        if ax_kind == "t" and np.any(v0):
            for k in range(d):
                out = out - v0[k] * self._axis_derivative(arr, "x", k)
        return out

    def _finite_difference(self, name):
        u = self._flat(self.values)
        d = self.d
        if name == "dt":
            return self._axis_derivative(u, "t")
        if name == "grad_x":
            return np.concatenate([self._axis_derivative(u, "x", i) for i in range(d)], axis=-1)
        first = [self._axis_derivative(u, "v", i) for i in range(d)]
        if name == "grad_v":
            return np.concatenate(first, axis=-1)
        second = [self._axis_derivative(first[i], "v", k) for i in range(d) for k in range(d)]
        if name == "hess_v":
            return np.concatenate(second, axis=-1)
        return np.concatenate([self._axis_derivative(s, "v", m) for s in second
                               for m in range(d)], axis=-1)

    def quantity(self, name: str) -> np.ndarray:
        """Array of shape ``grid.shape + (m,)`` for u or one of its derivatives."""
        if name not in _QUANTITIES:
            raise ValueError(f"unknown quantity {name!r}")
        if name not in self._cache:
            if name == "u":
                q = self._flat(self.values)
            elif self.derivative_supplier is not None:
                q = self._analytic(name)
            else:
                q = self._finite_difference(name)
            self._cache[name] = q
        return self._cache[name]

    def has_analytic(self) -> bool:
        return self.derivative_supplier is not None

    def evaluate_quantity(self, name, t, x, v):
        """Quantity at arbitrary points (analytic supplier or evaluator only)."""
        if name == "u":
            if self.evaluator is None:
                raise ValueError("off-grid evaluation needs an evaluator")
            out = np.asarray(self.evaluator(t, x, v), dtype=float)
            return out.reshape(np.shape(t) + (-1,))
        if self.derivative_supplier is None:
            raise ValueError(f"off-grid {name} needs an analytic derivative supplier")
        return self._analytic(name, np.asarray(t, float), np.asarray(x, float),
                              np.asarray(v, float))


@dataclass(frozen=True)
class SeminormSpec:
    kind: str
    alpha: float = 0.5
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown seminorm kind {self.kind!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        beta = self.alpha if self.beta is None else self.beta
        if not 0 < beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        object.__setattr__(self, "beta", float(beta))


@dataclass
class SeminormEstimate:
    value: float
    pair_count: int
    is_lower_bound: bool = True
    components: dict = dc_field(default_factory=dict)

    def __float__(self):
        return self.value


# -- pair machinery ---------------------------------------------------------

def _strided(shape, stride):
    """Flat indices of the nested subgrid keeping every ``stride``-th node per axis."""
    axes = [np.arange(0, n, stride) for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.ravel_multi_index([m.ravel() for m in mesh], shape)


def _neighbours(shape):
    """Flat index pairs of grid neighbours along each axis."""
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    a, b = [], []
    for ax, n in enumerate(shape):
        if n < 2:
            continue
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[ax] = slice(0, n - 1)
        hi[ax] = slice(1, n)
        a.append(idx[tuple(lo)].ravel())
        b.append(idx[tuple(hi)].ravel())
    if not a:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(a), np.concatenate(b)


def _capped(arrays, cap, rng):
    n = arrays[0].size
    if n <= cap:
        return arrays
    keep = np.sort(rng.choice(n, size=cap, replace=False))
    return [x[keep] for x in arrays]


def _random_pairs(N, count, rng):
    u = rng.random((count, 2))
    i = np.minimum((u[:, 0] * N).astype(np.int64), N - 1)
    k = np.minimum((u[:, 1] * (N - 1)).astype(np.int64), N - 2)
    k = k + (k >= i)
    return np.minimum(i, k), np.maximum(i, k)


def _pair_indices(shape, mask, budget, rng):
    """Index pairs (into the flattened grid) of distinct unmasked points.

    All pairs when affordable.  Otherwise: every pair of the finest nested
    subgrid fitting half the budget (so a refined grid never loses the pairs
    its coarse parent saw), grid neighbours, then a seeded random draw.
    """
    live = np.flatnonzero(mask.ravel())
    N = live.size
    if N * (N - 1) // 2 <= budget:
        i, k = np.triu_indices(N, 1)
        return live[i], live[k]
    flat_mask = mask.ravel()
    stride = 2
    while True:
        sub = _strided(shape, stride)
        sub = sub[flat_mask[sub]]
        if sub.size * (sub.size - 1) // 2 <= budget // 2:
            break
        stride *= 2
    i, k = np.triu_indices(sub.size, 1)
    parts_i, parts_k = [sub[i]], [sub[k]]
    na, nb = _neighbours(shape)
    ok = flat_mask[na] & flat_mask[nb]
    na, nb = _capped([na[ok], nb[ok]], budget // 4, rng)
    parts_i.append(na)
    parts_k.append(nb)
    used = sum(p.size for p in parts_i)
    ri, rk = _random_pairs(N, max(budget - used, 0), rng)
    parts_i.append(live[ri])
    parts_k.append(live[rk])
    return np.concatenate(parts_i), np.concatenate(parts_k)


def _grouped_pairs(gshape, mshape, budget, rng):
    """Pairs (g, a, b) of distinct members a<b inside groups g (flat indices).

    Same selection order as :func:`_pair_indices`, with strides applied to
    both the group and the member grids.
    """
    G, M = int(np.prod(gshape)), int(np.prod(mshape))
    per = M * (M - 1) // 2
    if G * per <= budget:
        a, b = np.triu_indices(M, 1)
        g = np.repeat(np.arange(G), a.size)
        return g, np.tile(a, G), np.tile(b, G)
    stride = 2
    while True:
        gs, ms = _strided(gshape, stride), _strided(mshape, stride)
        if gs.size * ms.size * (ms.size - 1) // 2 <= budget // 2:
            break
        stride *= 2
    a, b = np.triu_indices(ms.size, 1)
    parts = [(np.repeat(gs, a.size), np.tile(ms[a], gs.size), np.tile(ms[b], gs.size))]
    na, nb = _neighbours(mshape)
    if na.size:
        g = np.repeat(np.arange(G), na.size)
        parts.append(tuple(_capped([g, np.tile(na, G), np.tile(nb, G)], budget // 4, rng)))
    used = sum(p[0].size for p in parts)
    count = max(budget - used, 0)
    g = np.minimum((rng.random(count) * G).astype(np.int64), G - 1)
    ra, rb = _random_pairs(M, count, rng) if M > 1 else (np.zeros(0, np.int64),) * 2
    parts.append((g[:ra.size], ra, rb))
    return tuple(np.concatenate([p[j] for p in parts]) for j in range(3))


def _max_quotient(num, den):
    ok = den > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def _full_alpha(field: SampledField, q, alpha, budget, seed):
    if field.point_count < 2:
        raise ValueError("seminorm needs at least two grid points")
    T, X, V = field.T.ravel(), field.X.reshape(-1, field.d), field.V.reshape(-1, field.d)
    qf = q.reshape(T.size, -1)
    i, k = _pair_indices(field.grid.shape, field.mask, budget, np.random.default_rng(seed))
    best = 0.0
    for s in range(0, i.size, 100_000):
        a, b = i[s:s + 100_000], k[s:s + 100_000]
        num = np.linalg.norm(qf[a] - qf[b], axis=-1)
        rho = np.minimum(quasimetric_arrays(T[a], X[a], V[a], T[b], X[b], V[b]),
                         quasimetric_arrays(T[b], X[b], V[b], T[a], X[a], V[a]))
        best = max(best, _max_quotient(num, rho ** alpha))
    return best, int(i.size)


def _split(field: SampledField, arr):
    """Reshape grid-leading array to (n_t, NX, NV, ...)."""
    g = field.grid
    NX = int(np.prod(g.n_x))
    NV = int(np.prod(g.n_v))
    return arr.reshape((g.n_t, NX, NV) + arr.shape[len(g.shape):])


def _x_alpha(field: SampledField, q, alpha, budget, seed):
    g = field.grid
    qs = _split(field, q)                          # (n_t, NX, NV, m)
    ms = _split(field, field.mask)
    xi = _split(field, field.xi)[0, :, 0]          # (NX, d)
    NX = xi.shape[0]
    if NX < 2:
        return 0.0, 0
    G = g.n_t * qs.shape[2]
    gi, a, b = _grouped_pairs((g.n_t,) + g.n_v, g.n_x, budget,
                               np.random.default_rng(seed))
    it, iv = np.divmod(gi, qs.shape[2])
    ok = ms[it, a, iv] & ms[it, b, iv]
    num = np.linalg.norm(qs[it, a, iv] - qs[it, b, iv], axis=-1)
    dist = field.domain.radius ** 3 * np.linalg.norm(xi[a] - xi[b], axis=-1)
    return _max_quotient(num[ok], dist[ok] ** alpha), int(ok.sum())


def _t_alpha(field: SampledField, name, alpha, budget, seed):
    g = field.grid
    if g.n_t < 2:
        return 0.0, 0
    z0 = field.domain.center
    shear = bool(np.any(z0.v))
    mask = _split(field, field.mask)[0]            # (NX, NV)
    Ts = _split(field, field.T)[:, 0, 0]
    G = mask.size
    gi, a, b = _grouped_pairs(g.n_x + g.n_v, (g.n_t,), budget,
                               np.random.default_rng(seed))
    ix, iv = np.divmod(gi, mask.shape[1])
    ok = mask[ix, iv]
    gi, a, b, ix, iv = gi[ok], a[ok], b[ok], ix[ok], iv[ok]
    Xs = _split(field, field.X)
    Vs = _split(field, field.V)
    v = Vs[a, ix, iv]
    dt = Ts[b] - Ts[a]
    qs = _split(field, field.quantity(name))
    qa = qs[a, ix, iv]
    if not shear:
        qb = qs[b, ix, iv]
    else:
        # same physical x at the other time: evaluate off the sheared grid
        x = Xs[a, ix, iv]
        inside = (np.linalg.norm(x - z0.x - (Ts[b] - z0.t)[:, None] * z0.v, axis=-1)
                  <= field.domain.radius ** 3 * (1 + 1e-12))
        a, b, v, dt, qa, x = a[inside], b[inside], v[inside], dt[inside], qa[inside], x[inside]
        qb = field.evaluate_quantity(name, Ts[b], x, v)
    num = np.linalg.norm(qa - qb, axis=-1)
    den = np.abs(dt) ** alpha + (np.abs(dt) * np.linalg.norm(v, axis=-1)) ** (2 * alpha / 3)
    return _max_quotient(num, den), int(num.size)


def quantity_seminorm(field: SampledField, name: str, alpha: float, kind: str = "alpha",
                      pair_budget: int = DEFAULT_PAIR_BUDGET, seed: int = 0):
    """[q]_alpha (kind ``alpha``, ``alpha_x`` or ``alpha_t``) of a quantity of the field."""
    if kind == "alpha":
        return _full_alpha(field, field.quantity(name), alpha, pair_budget, seed)
    if kind == "alpha_x":
        return _x_alpha(field, field.quantity(name), alpha, pair_budget, seed)
    if kind == "alpha_t":
        return _t_alpha(field, name, alpha, pair_budget, seed)
    raise ValueError(kind)


def sup_norm(field: SampledField, name: str = "u") -> float:
    q = field.quantity(name)
    return float(np.max(np.linalg.norm(q[field.mask], axis=-1), initial=0.0))


# constituents of the composite kinds: (label, quantity, sub-kind, exponent)
def _constituents(spec: SeminormSpec):
    a, b = spec.alpha, spec.beta
    return {
        "alpha": [("u", "u", "alpha", a)],
        "alpha_x": [("u", "u", "alpha_x", a)],
        "alpha_t": [("u", "u", "alpha_t", a)],
        "one_plus": [("grad_v", "grad_v", "alpha", a), ("t", "u", "alpha_t", (1 + a) / 2),
                     ("x", "u", "alpha_x", (1 + a) / 3)],
        "two_plus": [("hess_v", "hess_v", "alpha", a), ("dt", "dt", "alpha", a),
                     ("x", "u", "alpha_x", (2 + a) / 3)],
        "primed_two_plus": [("hess_v", "hess_v", "alpha", a), ("x", "u", "alpha_x", (2 + a) / 3),
                            ("t", "u", "alpha_t", b)],
        "double_primed_three_plus": [("dt", "dt", "alpha", a), ("grad_x", "grad_x", "alpha", a),
                                     ("d3_v", "d3_v", "alpha", a)],
    }[spec.kind]


def seminorm(field: SampledField, spec: SeminormSpec, pair_budget: int = DEFAULT_PAIR_BUDGET,
             seed: int = 0) -> SeminormEstimate:
    """Sampled estimate of the seminorm named by ``spec.kind`` (a lower bound)."""
    if field.point_count < 2:
        raise ValueError("seminorm needs at least two grid points")
    total, count, parts = 0.0, 0, {}
    for label, name, kind, expo in _constituents(spec):
        val, n = quantity_seminorm(field, name, expo, kind, pair_budget, seed)
        parts[label] = val
        total += val
        count += n
    return SeminormEstimate(total, count, True, parts)


# -- interpolation inequalities --------------------------------------------

def check_interpolation(field: SampledField, alpha: float, epsilons: Sequence[float],
                        C_max: float = 1e3, pair_budget: int = DEFAULT_PAIR_BUDGET,
                        seed: int = 0, higher: bool | None = None) -> VerificationReport:
    """Smallest constant C making each interpolation inequality hold at every epsilon.

    Each inequality reads ``lhs <= eps^a * top + C eps^-b |u|_0``; the report
    records the per-inequality constants and passes when the overall constant
    is finite and at most ``C_max``.  The two inequalities on D_v^3 u and
    grad_x u are included when ``higher`` (default: analytic derivatives are
    available).
    """
    eps = [float(e) for e in epsilons]
    if not eps or min(eps) <= 0:
        raise ValueError("epsilons must be positive")
    if higher is None:
        higher = field.has_analytic()
    rep = VerificationReport(f"interpolation(alpha={alpha})")

    def semi(name, kind="alpha", expo=alpha):
        return quantity_seminorm(field, name, expo, kind, pair_budget, seed)[0]

    u0 = sup_norm(field, "u")
    top = seminorm(field, SeminormSpec("two_plus", alpha), pair_budget, seed).value
    rows = [
        ("[u]_a", semi("u"), 2.0, top, alpha),
        ("|dt u|_0", sup_norm(field, "dt"), alpha, semi("dt"), 2.0),
        ("|grad_v u|_0", sup_norm(field, "grad_v"), 1 + alpha, top, 1.0),
        ("[grad_v u]_a", semi("grad_v"), 1.0, top, 1 + alpha),
        ("|D2_v u|_0", sup_norm(field, "hess_v"), alpha, top, 2.0),
    ]
    if higher:
        rows += [
            ("|D3_v u|_0", sup_norm(field, "d3_v"), alpha, semi("d3_v"), 3.0),
            ("|grad_x u|_0", sup_norm(field, "grad_x"), alpha, semi("grad_x"), 3.0),
        ]
    rep.measured.update({"|u|_0": u0, "[u]_2+a": top})
    C_all = 0.0
    for label, lhs, a_pow, rhs_top, b_pow in rows:
        C_row = 0.0
        for e in eps:
            excess = lhs - e ** a_pow * rhs_top
            if excess <= 1e-12 * max(abs(lhs), 1.0):
                continue
            C_row = max(C_row, excess * e ** b_pow / u0 if u0 > 0 else math.inf)
        rep.measured[f"lhs {label}"] = lhs
        rep.measured[f"C {label}"] = C_row
        C_all = max(C_all, C_row)
    rep.measured["C"] = C_all
    rep.compare("C", C_all, C_max, 0.0, "le", anchor="interpolation-inequalities")
    return rep
