"""Kinetic geometry: Galilean group, kinetic scaling, quasimetric and cylinders.

Points are ``z = (t, x, v)`` with ``x, v`` in R^d.  Besides the scalar API on
:class:`PhasePoint`, array versions (``*_arrays``) act on batches stored as
``t`` of shape ``(n,)`` and ``x, v`` of shape ``(n, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PhasePoint",
    "KineticCylinder",
    "galilean_shift",
    "galilean_inverse",
    "dilate",
    "quasimetric",
    "cylinder_contains",
    "shift_arrays",
    "inverse_arrays",
    "dilate_arrays",
    "quasimetric_arrays",
    "contains_arrays",
    "algebra_report",
]


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(t, x, v)`` of phase space-time."""

    t: float
    x: np.ndarray = field(repr=True)
    v: np.ndarray = field(repr=True)

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        v = np.atleast_1d(np.asarray(self.v, dtype=float)).copy()
        if x.ndim != 1 or v.ndim != 1 or x.shape != v.shape:
            raise ValueError(f"x and v must be vectors of equal length, got {x.shape} and {v.shape}")
        if x.shape[0] < 1:
            raise ValueError("dimension must be positive")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @classmethod
    def origin(cls, d: int = 3) -> "PhasePoint":
        return cls(0.0, np.zeros(d), np.zeros(d))

    def as_tuple(self):
        return self.t, self.x, self.v

    def __eq__(self, other):
        if not isinstance(other, PhasePoint):
            return NotImplemented
        return (self.t == other.t and np.array_equal(self.x, other.x)
                and np.array_equal(self.v, other.v))

    def __hash__(self):
        return hash((self.t, self.x.tobytes(), self.v.tobytes()))

    def allclose(self, other: "PhasePoint", rtol=1e-12, atol=1e-12) -> bool:
        return (np.isclose(self.t, other.t, rtol=rtol, atol=atol)
                and np.allclose(self.x, other.x, rtol=rtol, atol=atol)
                and np.allclose(self.v, other.v, rtol=rtol, atol=atol))


def _check_dims(*points: PhasePoint):
    d = points[0].d
    for p in points[1:]:
        if p.d != d:
            raise ValueError(f"dimension mismatch: {d} vs {p.d}")


@dataclass(frozen=True)
class KineticCylinder:
    """The cylinder Q_r(z0): t in (t0 - r^2, t0], |x - x0 - (t - t0) v0| < r^3, |v - v0| < r."""

    center: PhasePoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def d(self) -> int:
        return self.center.d

    @classmethod
    def unit(cls, d: int = 3) -> "KineticCylinder":
        return cls(PhasePoint.origin(d), 1.0)

    def contains(self, z: PhasePoint) -> bool:
        return cylinder_contains(self, z)


def galilean_shift(z0: PhasePoint, z: PhasePoint) -> PhasePoint:
    """S_{z0}(z) = (t0 + t, x0 + x + t v0, v0 + v)."""
    _check_dims(z0, z)
    return PhasePoint(z0.t + z.t, z0.x + z.x + z.t * z0.v, z0.v + z.v)


def galilean_inverse(z0: PhasePoint, z: PhasePoint) -> PhasePoint:
    """S_{z0}^{-1}(z) = (t - t0, x - x0 - (t - t0) v0, v - v0)."""
    _check_dims(z0, z)
    dt = z.t - z0.t
    return PhasePoint(dt, z.x - z0.x - dt * z0.v, z.v - z0.v)


def dilate(r: float, z: PhasePoint) -> PhasePoint:
    """delta_r(z) = (r^2 t, r^3 x, r v)."""
    if not r > 0:
        raise ValueError(f"scaling factor must be positive, got {r}")
    return PhasePoint(r * r * z.t, r ** 3 * z.x, r * z.v)


def quasimetric(z: PhasePoint, zp: PhasePoint) -> float:
    """rho(z, z') = |t'-t|^{1/2} + |x'-x-(t'-t)v|^{1/3} + |v'-v|.  Not symmetric."""
    _check_dims(z, zp)
    dt = zp.t - z.t
    return float(abs(dt) ** 0.5
                 + np.linalg.norm(zp.x - z.x - dt * z.v) ** (1.0 / 3.0)
                 + np.linalg.norm(zp.v - z.v))


def cylinder_contains(Q: KineticCylinder, z: PhasePoint) -> bool:
    _check_dims(Q.center, z)
    return bool(contains_arrays(Q, np.array([z.t]), z.x[None, :], z.v[None, :])[0])


# -- batched versions -------------------------------------------------------

def shift_arrays(z0: PhasePoint, t, x, v):
    t = np.asarray(t, dtype=float)
    return z0.t + t, z0.x + x + t[..., None] * z0.v, z0.v + v


def inverse_arrays(z0: PhasePoint, t, x, v):
    dt = np.asarray(t, dtype=float) - z0.t
    return dt, x - z0.x - dt[..., None] * z0.v, v - z0.v


def dilate_arrays(r: float, t, x, v):
    if not r > 0:
        raise ValueError(f"scaling factor must be positive, got {r}")
    return r * r * np.asarray(t, dtype=float), r ** 3 * np.asarray(x), r * np.asarray(v)


def quasimetric_arrays(t, x, v, tp, xp, vp):
    """Elementwise rho(z_i, z'_i) for batches of points."""
    dt = np.asarray(tp, dtype=float) - np.asarray(t, dtype=float)
    dx = np.asarray(xp) - np.asarray(x) - dt[..., None] * np.asarray(v)
    return (np.sqrt(np.abs(dt)) + np.cbrt(np.linalg.norm(dx, axis=-1))
            + np.linalg.norm(np.asarray(vp) - np.asarray(v), axis=-1))


def contains_arrays(Q: KineticCylinder, t, x, v):
    z0, r = Q.center, Q.radius
    dt = np.asarray(t, dtype=float) - z0.t
    in_t = (dt > -r * r) & (dt <= 0.0)
    in_x = np.linalg.norm(x - z0.x - dt[..., None] * z0.v, axis=-1) < r ** 3
    in_v = np.linalg.norm(v - z0.v, axis=-1) < r
    return in_t & in_x & in_v


# -- algebraic checks ----------------------------------------------------------

def _compose(a, b):
    """S_a(b) with both a and b batched."""
    ta, xa, va = a
    tb, xb, vb = b
    return ta + tb, xa + xb + tb[:, None] * va, va + vb


def _rel(a, b, scale):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / scale))


def algebra_report(n: int = 10_000, d: int = 3, seed: int = 0, rtol: float = 1e-12):
    """Group law, inverse, dilation automorphism, homogeneity and left invariance of rho."""
    from .report import VerificationReport
    rng = np.random.default_rng(seed)

    def draw():
        return rng.normal(size=n), rng.normal(size=(n, d)), rng.normal(size=(n, d))

    a, b, c = draw(), draw(), draw()
    r = rng.uniform(0.1, 10.0, n)
    rep = VerificationReport(f"geometry-algebra(d={d}, n={n})")

    def scale(*zs):
        s = np.ones(n)
        for t, x, v in zs:
            s = np.maximum(s, np.maximum(np.abs(t), np.maximum(np.abs(x).max(-1),
                                                               np.abs(v).max(-1))))
        return s

    def err(p, q, s):
        return max(_rel(p[0], q[0], s), _rel(p[1], q[1], s[:, None]), _rel(p[2], q[2], s[:, None]))

    # associativity
    lhs = _compose(a, _compose(b, c))
    rhs = _compose(_compose(a, b), c)
    s = scale(a, b, c) ** 2
    rep.compare("associativity", err(lhs, rhs, s), 0.0, rtol, "abs", "galilean-group")
    # inverse
    ta, xa, va = a
    inv = (-ta, -xa + ta[:, None] * va, -va)
    zero = (np.zeros(n), np.zeros((n, d)), np.zeros((n, d)))
    rep.compare("inverse", err(_compose(a, inv), zero, scale(a) ** 2), 0.0, rtol, "abs",
                "galilean-group")
    # dilation is an automorphism: delta_r(S_a b) = S_{delta_r a}(delta_r b)
    dil = lambda z: (r ** 2 * z[0], r[:, None] ** 3 * z[1], r[:, None] * z[2])
    s = scale(dil(a), dil(b)) ** 2
    rep.compare("dilation automorphism", err(dil(_compose(a, b)), _compose(dil(a), dil(b)), s),
                0.0, rtol, "abs", "kinetic-scaling")
    # rho homogeneity and left invariance
    rho = quasimetric_arrays(*b, *c)
    rho_r = quasimetric_arrays(*dil(b), *dil(c))
    rep.compare("rho homogeneity", _rel(rho_r, r * rho, r * rho), 0.0, rtol, "abs",
                "kinetic-scaling")
    rho_s = quasimetric_arrays(*_compose(a, b), *_compose(a, c))
    rep.compare("rho left invariance", _rel(rho_s, rho, rho), 0.0, rtol, "abs",
                "galilean-group")
    return rep
