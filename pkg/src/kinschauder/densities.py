"""Velocity densities f(t, x, v) used as inputs of the Landau coefficients.

Built-in densities are finite sums of Gaussians ``w exp(-mu |v - c|^2)`` that do
not depend on (t, x); every velocity derivative is a Hermite polynomial times
the same Gaussian.  Sampled densities are read from a binary grid file and
interpolated linearly.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import eval_hermite

__all__ = [
    "GaussianComponent",
    "DensityField",
    "maxwellian",
    "shifted_maxwellian",
    "bimodal",
    "zero_density",
    "grid_density",
    "write_grid_file",
    "read_grid_file",
    "GRID_MAGIC",
]

GRID_MAGIC = b"KLLGRID1"


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    center: np.ndarray
    mu: float

    def derivative(self, eta: Sequence[int]):
        """d_v^eta of w exp(-mu |v - c|^2) as a function of v (trailing axis d)."""
        eta = tuple(int(e) for e in eta)
        c = np.asarray(self.center, dtype=float)
        s = math.sqrt(self.mu)
        scale = self.weight * np.prod([(-s) ** e for e in eta]) if eta else self.weight

        def fn(v):
            v = np.asarray(v, dtype=float)
            y = v - c
            out = scale * np.exp(-self.mu * np.sum(y * y, axis=-1))
            for i, e in enumerate(eta):
                if e:
                    out = out * eval_hermite(e, s * y[..., i])
            return out

        return fn


class DensityField:
    """Nonnegative density with a Gaussian envelope ``f <= C0 exp(-mu |v|^2)``.

    ``parts`` lists ``(fn, center, mu)`` triples whose sum is f; each
    ``fn(u) exp(mu |u - center|^2)`` is smooth and bounded, which is what the
    Gauss-Hermite part of the coefficient quadrature integrates.
    """

    def __init__(self, d: int, gamma: float, components: Sequence[GaussianComponent] = (),
                 envelope: tuple | None = None, kernel_constants=(1.0, 1.0, 1.0),
                 name: str = "mixture", sampled: Callable | None = None):
        if not -d <= gamma < 0:
            raise ValueError(f"gamma must lie in [-d, 0) = [{-d}, 0), got {gamma}")
        self.d = int(d)
        self.gamma = float(gamma)
        self.components = tuple(components)
        for comp in self.components:
            if np.shape(comp.center) != (self.d,):
                raise ValueError("component center has the wrong dimension")
            if comp.mu <= 0 or comp.weight < 0:
                raise ValueError("components need mu > 0 and nonnegative weight")
        self.sampled = sampled
        if envelope is None:
            envelope = self._default_envelope()
        self.envelope = (float(envelope[0]), float(envelope[1]))
        self.kernel_constants = tuple(float(k) for k in kernel_constants)
        self.name = name

    def _default_envelope(self):
        if not self.components:
            return (0.0, 1.0)
        # |v - c|^2 >= |v|^2 / 2 - |c|^2
        mu = min(c.mu for c in self.components)
        if all(not np.any(c.center) for c in self.components):
            return (sum(c.weight for c in self.components), mu)
        C0 = sum(c.weight * math.exp(c.mu * float(np.dot(c.center, c.center)))
                 for c in self.components)
        return (C0, mu / 2)

    # evaluation -----------------------------------------------------------
    def velocity_function(self, eta=()):
        eta = tuple(eta) + (0,) * (self.d - len(tuple(eta)))
        fns = [c.derivative(eta) for c in self.components]
        sampled = self.sampled
        if sampled is not None and any(eta):
            raise ValueError("sampled densities have no analytic derivatives")

        def fn(v):
            v = np.asarray(v, dtype=float)
            out = np.zeros(v.shape[:-1])
            for f in fns:
                out = out + f(v)
            if sampled is not None:
                out = out + sampled(v)
            return out

        return fn

    def __call__(self, t, x, v):
        return self.velocity_function()(v)

    def partial(self, j=0, beta=(), eta=()):
        if j or any(beta):
            return lambda t, x, v: np.zeros(np.shape(v)[:-1])
        fn = self.velocity_function(eta)
        return lambda t, x, v: fn(v)

    def parts(self, eta=()):
        """(fn, center, mu) triples summing to d_v^eta f."""
        eta = tuple(eta) + (0,) * (self.d - len(tuple(eta)))
        out = [(c.derivative(eta), np.asarray(c.center, float), c.mu) for c in self.components]
        if self.sampled is not None:
            if any(eta):
                raise ValueError("sampled densities have no analytic derivatives")
            out.append((self.sampled, np.zeros(self.d), self.envelope[1]))
        return out

    @property
    def is_zero(self) -> bool:
        return self.sampled is None and all(c.weight == 0 for c in self.components)

    # algebra --------------------------------------------------------------
    def _like(self, components, name, envelope=None, sampled=None):
        return DensityField(self.d, self.gamma, components, envelope, self.kernel_constants,
                            name, sampled)

    def scaled(self, s: float) -> "DensityField":
        if s < 0:
            raise ValueError("densities must stay nonnegative")
        sampled = None if self.sampled is None else (lambda v, g=self.sampled: s * g(v))
        comps = [GaussianComponent(c.weight * s, c.center, c.mu) for c in self.components]
        return self._like(comps, f"{s}*{self.name}", (self.envelope[0] * s, self.envelope[1]),
                          sampled)

    def shifted(self, v_shift) -> "DensityField":
        """v -> f(v - v_shift)."""
        if self.sampled is not None:
            raise ValueError("shifting a sampled density is not supported")
        a = np.broadcast_to(np.asarray(v_shift, float), (self.d,))
        comps = [GaussianComponent(c.weight, c.center + a, c.mu) for c in self.components]
        return self._like(comps, f"shift({self.name})")

    def __add__(self, other: "DensityField") -> "DensityField":
        if other.d != self.d or other.gamma != self.gamma:
            raise ValueError("densities must share d and gamma")
        if self.sampled is not None or other.sampled is not None:
            raise ValueError("adding sampled densities is not supported")
        env = (self.envelope[0] + other.envelope[0], min(self.envelope[1], other.envelope[1]))
        return self._like(self.components + other.components, f"{self.name}+{other.name}", env)

    def with_gamma(self, gamma: float) -> "DensityField":
        return DensityField(self.d, gamma, self.components, self.envelope,
                            self.kernel_constants, self.name, self.sampled)

    def with_constants(self, kernel_constants) -> "DensityField":
        return DensityField(self.d, self.gamma, self.components, self.envelope,
                            kernel_constants, self.name, self.sampled)

    # checks ---------------------------------------------------------------
    def validate(self, v_samples, slack: float = 1.0 + 1e-9) -> None:
        """Raise if f is negative or exceeds its envelope at the samples."""
        v = np.atleast_2d(np.asarray(v_samples, dtype=float))
        vals = self.velocity_function()(v)
        if np.any(vals < 0):
            raise ValueError("density is negative at a sampled velocity")
        C0, mu = self.envelope
        bound = C0 * np.exp(-mu * np.sum(v * v, axis=-1))
        if np.any(vals > slack * bound + 1e-300):
            raise ValueError("density exceeds its Gaussian envelope")

    def sup_on_ball(self, v, radius: float = 1.0, n: int = 9) -> float:
        """Sampled sup of f over the ball B_radius(v)."""
        g = np.linspace(-radius, radius, n)
        pts = np.stack(np.meshgrid(*([g] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d)
        pts = pts[np.linalg.norm(pts, axis=-1) <= radius]
        return float(np.max(self.velocity_function()(np.asarray(v, float) + pts)))


def maxwellian(d: int = 3, gamma: float = -1.0, mu: float = 1.0, mass: float = 1.0,
               kernel_constants=(1.0, 1.0, 1.0)) -> DensityField:
    """mass * exp(-mu |v|^2)."""
    return DensityField(d, gamma, [GaussianComponent(mass, np.zeros(d), mu)],
                        kernel_constants=kernel_constants, name=f"maxwellian(mu={mu})")


def shifted_maxwellian(d: int = 3, gamma: float = -1.0, mu: float = 1.0, v_shift=2.0,
                       kernel_constants=(1.0, 1.0, 1.0)) -> DensityField:
    """exp(-mu |v - v_shift|^2); a scalar shift moves along the first axis."""
    a = np.asarray(v_shift, float)
    if a.ndim == 0:
        a = float(a) * np.eye(d)[0]
    return DensityField(d, gamma, [GaussianComponent(1.0, a, mu)],
                        kernel_constants=kernel_constants,
                        name=f"shifted-maxwellian(mu={mu})")


def bimodal(d: int = 3, gamma: float = -1.0, mu: float = 1.0, separation: float = 2.0,
            kernel_constants=(1.0, 1.0, 1.0)) -> DensityField:
    """Two half-weight Gaussians centred at +-separation/2 along the first axis."""
    e = 0.5 * separation * np.eye(d)[0]
    comps = [GaussianComponent(0.5, e, mu), GaussianComponent(0.5, -e, mu)]
    return DensityField(d, gamma, comps, kernel_constants=kernel_constants,
                        name=f"bimodal(mu={mu},sep={separation})")


def zero_density(d: int = 3, gamma: float = -1.0) -> DensityField:
    return DensityField(d, gamma, [], envelope=(0.0, 1.0), name="zero")


# -- sampled densities and the grid file format -----------------------------

def write_grid_file(path, extents, values) -> None:
    """Write ``values`` sampled on a uniform velocity grid.

    Layout (little-endian): magic ``KLLGRID1``; uint32 d; d pairs of float64
    (lo, hi); d uint32 resolutions; row-major float64 payload.
    """
    values = np.asarray(values, dtype="<f8")
    extents = np.asarray(extents, dtype=float).reshape(-1, 2)
    d = values.ndim
    if extents.shape[0] != d:
        raise ValueError("one (lo, hi) pair per axis is required")
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<I", d))
        for lo, hi in extents:
            fh.write(struct.pack("<dd", float(lo), float(hi)))
        fh.write(struct.pack(f"<{d}I", *values.shape))
        fh.write(np.ascontiguousarray(values).tobytes())


def read_grid_file(path):
    """Return (extents array (d, 2), values array) from a grid file."""
    data = Path(path).read_bytes()
    if data[:8] != GRID_MAGIC:
        raise ValueError(f"{path}: not a density grid file")
    off = 8
    (d,) = struct.unpack_from("<I", data, off)
    off += 4
    ext = np.array(struct.unpack_from(f"<{2 * d}d", data, off)).reshape(d, 2)
    off += 16 * d
    shape = struct.unpack_from(f"<{d}I", data, off)
    off += 4 * d
    n = int(np.prod(shape))
    if len(data) - off != 8 * n:
        raise ValueError(f"{path}: payload has {len(data) - off} bytes, expected {8 * n}")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).astype(float)
    return ext, values


def grid_density(path, gamma: float = -1.0, envelope=(1.0, 1.0),
                 kernel_constants=(1.0, 1.0, 1.0)) -> DensityField:
    """Density interpolated linearly from a grid file (zero outside its box)."""
    ext, values = read_grid_file(path)
    if np.any(values < 0):
        raise ValueError("grid density has negative values")
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(ext, values.shape)]
    interp = RegularGridInterpolator(axes, values, bounds_error=False, fill_value=0.0)

    def sampled(v):
        v = np.asarray(v, dtype=float)
        return interp(v.reshape(-1, v.shape[-1])).reshape(v.shape[:-1])

    return DensityField(values.ndim, gamma, [], envelope, kernel_constants,
                        name=f"grid({Path(path).name})", sampled=sampled)
