"""Landau coefficients and the checks built on them.

    a(v) = a_const int (I - w^ w^) |w|^{gamma+2} f(v - w) dw
    b(v) = b_const int |w|^gamma w f(v - w) dw
    c(v) = c_const int |w|^gamma f(v - w) dw      (c_const f(v) when gamma = -d)

The w-integral is split by a smooth partition of unity ``chi(|w|) + (1 - chi)``
with ``chi = 1`` near the origin.  The inner piece is done in polar
coordinates with a Gauss-Jacobi rule absorbing the radial power; the outer
piece has a smooth kernel and is done by Gauss-Hermite in ``u = v - w``
against the Gaussian envelope of each part of f.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_hermite, roots_jacobi, roots_legendre

from .densities import DensityField
from .geometry import PhasePoint
from .report import VerificationReport, fit_power_law

__all__ = [
    "LandauQuadrature",
    "CoefficientField",
    "HydroBounds",
    "ChangeOfVariables",
    "EllipticityWindow",
    "smooth_step",
    "coefficients",
    "coefficient_field",
    "coeff_a",
    "coeff_b",
    "coeff_c",
    "radial_kernel_integral",
    "hydro_moments",
    "hydro_check",
    "moment_order",
    "appendix_exponents",
    "appendix_bounds_check",
    "build_change_of_variables",
    "transformed_coefficients",
    "transformed_on_points",
    "ellipticity_window",
    "pullback_seminorm_bound",
    "barrier_ratios",
    "barrier_check",
    "estimate_mu0",
    "gaussian_radial_moment",
    "maxwellian_origin_values",
    "oracle_report",
    "window_stability_report",
    "barrier_samples",
]


@dataclass(frozen=True)
class LandauQuadrature:
    rho0: float = 6.0        # radius where the inner cutoff reaches zero
    n_radial: int = 32
    n_theta: int = 24
    n_phi: int = 48
    n_hermite: int = 48
    batch: int = 4


DEFAULT_QUADRATURE = LandauQuadrature()


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def _angular_rule(d, n_theta, n_phi):
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    wphi = np.full(n_phi, 2 * np.pi / n_phi)
    if d == 2:
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1), wphi
    if d == 3:
        ct, wt = roots_legendre(n_theta)
        st = np.sqrt(1 - ct ** 2)
        dirs = np.stack([np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(),
                         np.repeat(ct, n_phi)], axis=-1)
        return dirs, np.outer(wt, wphi).ravel()
    raise ValueError("coefficient quadrature supports d in {1, 2, 3}")


def _radial_power(kind, gamma, d):
    return {"a": gamma + 2, "b": gamma + 1, "c": gamma}[kind] + d - 1


def _kernel_shape(kind, hat, d):
    """Angular part of the kernel for unit directions ``hat`` (..., d)."""
    if kind == "a":
        return np.eye(d) - hat[..., :, None] * hat[..., None, :]
    if kind == "b":
        return hat
    return np.ones(hat.shape[:-1])


def coefficients(f: DensityField, V, kinds: str = "abc", eta: Sequence[int] = (),
                 quad_rule: LandauQuadrature = DEFAULT_QUADRATURE, t=0.0, x=None) -> dict:
    """Coefficients (or their v-derivatives d^eta) at velocities ``V`` of shape (n, d).

    Returns a dict with ``a`` (n, d, d), ``b`` (n, d), ``c`` (n,) for the
    requested kinds.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n, d = V.shape
    if d != f.d:
        raise ValueError("velocity dimension differs from the density's")
    gamma = f.gamma
    ka, kb, kc = f.kernel_constants
    consts = {"a": ka, "b": kb, "c": kc}
    shapes = {"a": (d, d), "b": (d,), "c": ()}
    out = {k: np.zeros((n,) + shapes[k]) for k in kinds}
    if f.is_zero:
        return out
    if "c" in kinds and gamma == -d:
        fn = f.velocity_function(eta)
        out["c"] = kc * fn(V)
        kinds = kinds.replace("c", "")
        if not kinds:
            return out
    q = quad_rule
    parts = f.parts(eta)
    dirs, wang = _angular_rule(d, q.n_theta, q.n_phi)
    xh, wh = roots_hermite(q.n_hermite)
    grids = np.meshgrid(*([xh] * d), indexing="ij")
    Xh = np.stack([g.ravel() for g in grids], axis=-1)
    Wh = np.ones(Xh.shape[0])
    for g in np.meshgrid(*([wh] * d), indexing="ij"):
        Wh = Wh * g.ravel()
    # outer nodes per part: u = c + x / sqrt(mu)
    outer = []
    for fn, c, mu in parts:
        U = c + Xh / math.sqrt(mu)
        ratio = fn(U) * np.exp(mu * np.sum((U - c) ** 2, axis=-1))
        keep = ratio != 0
        outer.append((U[keep], Wh[keep] * ratio[keep] / mu ** (d / 2)))
    total = lambda W: sum(fn(W) for fn, _, _ in parts)
    for s in range(0, n, q.batch):
        Vb = V[s:s + q.batch]
        for kind in kinds:
            beta = _radial_power(kind, gamma, d)
            xr, wr = roots_jacobi(q.n_radial, 0.0, beta)
            r = q.rho0 * (xr + 1) / 2
            wr = wr * (q.rho0 / 2) ** (beta + 1) * (1 - smooth_step(r / q.rho0))
            # inner: w = r * dir
            W = r[:, None, None] * dirs[None, :, :]                     # (nr, na, d)
            F = total(Vb[:, None, None, :] - W[None])                   # (nb, nr, na)
            wts = wr[:, None] * wang[None, :]
            K = _kernel_shape(kind, dirs, d)                            # (na, ...)
            inner = np.tensordot(np.einsum("bra,ra->ba", F, wts), K, axes=(1, 0))
            # outer
            acc = inner
            for U, wu in outer:
                Wv = Vb[:, None, :] - U[None]                           # (nb, nu, d)
                rad = np.linalg.norm(Wv, axis=-1)
                rs = np.where(rad > 0, rad, 1.0)
                hat = Wv / rs[..., None]
                pw = {"a": gamma + 2, "b": gamma + 1, "c": gamma}[kind]
                scal = wu * smooth_step(rad / q.rho0) * rs ** pw
                if kind == "a":
                    tr = np.sum(scal, axis=1)[:, None, None] * np.eye(d)
                    acc = acc + tr - np.einsum("bu,bui,buj->bij", scal, hat, hat)
                elif kind == "b":
                    acc = acc + np.einsum("bu,bui->bi", scal, hat)
                else:
                    acc = acc + np.sum(scal, axis=1)
            out[kind][s:s + q.batch] = consts[kind] * acc
    if "a" in out:
        out["a"] = 0.5 * (out["a"] + np.swapaxes(out["a"], -1, -2))
    return out


@dataclass(frozen=True)
class CoefficientField:
    a_bar: np.ndarray
    b_bar: np.ndarray
    c_bar: float
    at: PhasePoint


def coefficient_field(f: DensityField, z: PhasePoint, quad_rule=DEFAULT_QUADRATURE):
    res = coefficients(f, z.v[None], "abc", quad_rule=quad_rule)
    return CoefficientField(res["a"][0], res["b"][0], float(res["c"][0]), z)


def coeff_a(f: DensityField, z: PhasePoint, quad_rule=DEFAULT_QUADRATURE) -> np.ndarray:
    return coefficients(f, z.v[None], "a", quad_rule=quad_rule)["a"][0]


def coeff_b(f: DensityField, z: PhasePoint, quad_rule=DEFAULT_QUADRATURE) -> np.ndarray:
    return coefficients(f, z.v[None], "b", quad_rule=quad_rule)["b"][0]


def coeff_c(f: DensityField, z: PhasePoint, quad_rule=DEFAULT_QUADRATURE) -> float:
    return float(coefficients(f, z.v[None], "c", quad_rule=quad_rule)["c"][0])


def radial_kernel_integral(k: float, v_norm: float, mu: float = 1.0) -> float:
    """int_{R^3} |w|^k exp(-mu |v - w|^2) dw by a one-dimensional reduction.

    Integrating over the angle between w and v leaves
    2 pi int_0^inf s^{k+1} (exp(-mu (v-s)^2) - exp(-mu (v+s)^2)) / (2 mu v) ds.
    """
    if v_norm == 0:
        val, _ = quad(lambda s: s ** (k + 2) * math.exp(-mu * s * s), 0, np.inf,
                      epsabs=0, epsrel=1e-13, limit=200)
        return 4 * math.pi * val
    v = float(v_norm)

    def g(s):
        return s ** (k + 1) * math.exp(-mu * (v - s) ** 2) * -math.expm1(-4 * mu * v * s) / (2 * mu * v)

    val, _ = quad(g, 0, np.inf, points=None, epsabs=0, epsrel=1e-13, limit=400)
    return 2 * math.pi * val


# -- hydrodynamic quantities -------------------------------------------------

def moment_order(d: int, gamma: float) -> int:
    """Smallest integer p with p > d |gamma| / (2 + gamma + d)."""
    thr = d * abs(gamma) / (2 + gamma + d)
    return int(math.floor(thr)) + 1


@dataclass(frozen=True)
class HydroBounds:
    m0: float
    M0: float
    E0: float
    H0: float
    P0: float
    p: int

    def __post_init__(self):
        if not 0 < self.m0 <= self.M0:
            raise ValueError("need 0 < m0 <= M0")
        if self.E0 <= 0 or self.P0 <= 0:
            raise ValueError("E0 and P0 must be positive")
        if int(self.p) != self.p or self.p < 0:
            raise ValueError("p must be a nonnegative integer")

    @classmethod
    def for_density(cls, d, gamma, m0=0.1, M0=100.0, E0=100.0, H0=100.0, P0=1000.0):
        return cls(m0, M0, E0, H0, P0, moment_order(d, gamma))


def hydro_moments(f: DensityField, p: int = 2, order: int = 40, t=0.0, x=None) -> dict:
    """Mass, energy, entropy and p-th moment by Gauss-Hermite on the envelope."""
    d = f.d
    C0, mu = f.envelope
    mq = mu / 2 if mu > 0 else 0.5
    xh, wh = roots_hermite(order)
    grids = np.meshgrid(*([xh] * d), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=-1) / math.sqrt(mq)
    W = np.ones(U.shape[0])
    for g in np.meshgrid(*([wh] * d), indexing="ij"):
        W = W * g.ravel()
    W = W / mq ** (d / 2) * np.exp(mq * np.sum(U * U, axis=-1))
    fv = f.velocity_function()(U)
    r2 = np.sum(U * U, axis=-1)
    flogf = np.where(fv > 0, fv * np.log(np.where(fv > 0, fv, 1.0)), 0.0)
    return {
        "mass": float(np.sum(W * fv)),
        "energy": float(np.sum(W * r2 * fv)),
        "entropy": float(np.sum(W * flogf)),
        "moment": float(np.sum(W * r2 ** (p / 2) * fv)),
    }


def hydro_check(f: DensityField, bounds: HydroBounds, t=0.0, x=None) -> VerificationReport:
    rep = VerificationReport(f"hydro({f.name})")
    m = hydro_moments(f, bounds.p, t=t, x=x)
    rep.measured.update(m)
    rep.compare("mass>=m0", m["mass"], bounds.m0, 0.0, "ge", "hydrodynamic-bounds")
    rep.compare("mass<=M0", m["mass"], bounds.M0, 0.0, "le", "hydrodynamic-bounds")
    rep.compare("energy<=E0", m["energy"], bounds.E0, 0.0, "le", "hydrodynamic-bounds")
    rep.compare("entropy<=H0", m["entropy"], bounds.H0, 0.0, "le", "hydrodynamic-bounds")
    rep.compare(f"moment_{bounds.p}<=P0", m["moment"], bounds.P0, 0.0, "le", "moment-condition")
    return rep


# -- growth exponents --------------------------------------------------------

def appendix_exponents(d: int, gamma: float) -> dict:
    """Power of |v| in the coefficient bounds for the given (d, gamma).

    ``a_perp`` is the e-perp-v quadratic form, ``a_par`` the e-parallel-v one.
    The b and c entries drop the (1 + sup f)^k factors, which tend to 1 for
    decaying densities; ``None`` means no power-law prediction.
    """
    g = gamma
    if g >= -2:
        a_par, a_perp = g, g + 2
    else:
        a_par, a_perp = g, g + 2       # moment-controlled very soft range
    if g >= (-3 * d - 2) / (d + 2):
        b = g + 1
    else:
        b = -2 - 2 * (g + 1) / d
    if g == -d:
        c = None
    elif g >= -2 * d / (d + 2):
        c = g
    else:
        c = -2 - 2 * g / d
    return {"a_perp": a_perp, "a_par": a_par, "b": b, "c": c}


def _orthonormal_frame(v, rng=None):
    """Unit vector along v and a unit vector orthogonal to it."""
    d = v.size
    nv = np.linalg.norm(v)
    e_par = v / nv if nv > 0 else np.eye(d)[0]
    if d == 1:
        return e_par, None
    if rng is None:
        cand = np.eye(d)[int(np.argmin(np.abs(e_par)))]
    else:
        cand = rng.standard_normal(d)
    e_perp = cand - np.dot(cand, e_par) * e_par
    if np.linalg.norm(e_perp) < 1e-8:
        cand = np.eye(d)[int(np.argmin(np.abs(e_par)))]
        e_perp = cand - np.dot(cand, e_par) * e_par
    return e_par, e_perp / np.linalg.norm(e_perp)


def appendix_bounds_check(f: DensityField, bounds: HydroBounds | None, v_samples,
                          tol: float = 0.1, seed: int = 0,
                          quad_rule=DEFAULT_QUADRATURE) -> VerificationReport:
    """Fit the large-|v| growth exponents of the coefficients and compare.

    Primary fits regress the log of each quantity on log|v|; fits on
    log(1 + |v|) are recorded alongside as diagnostics.
    """
    V = np.atleast_2d(np.asarray(v_samples, dtype=float))
    if V.shape[0] < 4:
        raise ValueError("exponent fits need at least 4 velocity samples")
    rep = VerificationReport(f"growth-bounds({f.name}, gamma={f.gamma})")
    if bounds is not None:
        rep.merge(hydro_check(f, bounds), prefix="hydro:")
    rng = np.random.default_rng(seed)
    res = coefficients(f, V, "abc", quad_rule=quad_rule)
    norms = np.linalg.norm(V, axis=-1)
    a_par, a_perp = [], []
    for k in range(V.shape[0]):
        e_par, e_perp = _orthonormal_frame(V[k], rng)
        A = res["a"][k]
        a_par.append(e_par @ A @ e_par)
        if e_perp is not None:
            a_perp.append(e_perp @ A @ e_perp)
        rep.compare(f"psd@|v|={norms[k]:.3g}", np.linalg.eigvalsh(A)[0],
                    -1e-10 * abs(np.trace(A)), 0.0, "ge", "coefficient-definitions")
    quantities = {"a_par": np.array(a_par), "b": np.linalg.norm(res["b"], axis=-1),
                  "c": res["c"]}
    if a_perp:
        quantities["a_perp"] = np.array(a_perp)
    predicted = appendix_exponents(f.d, f.gamma)
    anchors = {"a_par": "a-bounds-unit-vectors", "a_perp": "a-bounds-unit-vectors",
               "b": "b-c-upper-bounds", "c": "b-c-upper-bounds"}
    for name, vals in quantities.items():
        rep.measured.update({f"{name}@|v|={n:.4g}": float(q) for n, q in zip(norms, vals)})
        if predicted[name] is None or np.any(vals <= 0):
            rep.notes.append(f"{name}: no power-law fit")
            continue
        fit, resid = fit_power_law(norms, vals, f"{name}_vs_log|v|")
        fit1, _ = fit_power_law(1 + norms, vals, f"{name}_vs_log(1+|v|)")
        rep.fits += [fit, fit1]
        rep.measured[f"exponent {name}"] = fit.slope
        rep.measured[f"exponent {name} (log(1+|v|))"] = fit1.slope
        rep.compare(f"exponent {name}", fit.slope, predicted[name], tol, "abs", anchors[name])
    return rep


# -- change of variables -----------------------------------------------------

@dataclass(frozen=True)
class ChangeOfVariables:
    """T_{z0}(t, x, v) = (t0 + t, x0 + T x + t v0, v0 + T v) and the radius r1."""

    base: PhasePoint
    T_matrix: np.ndarray
    r1: float
    c1: float
    gamma: float

    @property
    def anisotropic(self) -> bool:
        return bool(np.linalg.norm(self.base.v) >= 2)

    @property
    def T_inv(self) -> np.ndarray:
        return np.linalg.inv(self.T_matrix)

    def apply(self, r, t, x, v):
        """T_{z0}(delta_r(t, x, v)) for batched arrays (x, v with trailing d)."""
        z0, T = self.base, self.T_matrix
        t = np.asarray(t, dtype=float)
        tt = r * r * t
        xx = z0.x + (r ** 3) * np.asarray(x) @ T.T + tt[..., None] * z0.v
        vv = z0.v + r * np.asarray(v) @ T.T
        return z0.t + tt, xx, vv


def build_change_of_variables(z0: PhasePoint, gamma: float, c1: float = 0.1) -> ChangeOfVariables:
    """T and r1 for base point z0.

    For |v0| >= 2, T scales the v0 direction by |v0|^{gamma/2} and its
    orthogonal complement by |v0|^{1+gamma/2}.  For |v0| < 2, T = I and the
    |v0|-dependent factor of r1 is frozen at its value for |v0| = 2.
    """
    d = z0.d
    nv = float(np.linalg.norm(z0.v))
    tfac = min(1.0, math.sqrt(z0.t / 2)) if z0.t > 0 else 0.0
    if z0.t <= 0:
        raise ValueError("the base point needs t0 > 0")
    if nv >= 2:
        e = z0.v / nv
        P = np.outer(e, e)
        T = nv ** (gamma / 2) * P + nv ** (1 + gamma / 2) * (np.eye(d) - P)
        r1 = c1 * min(nv, nv ** (-1 - gamma / 2)) * tfac
    else:
        T = np.eye(d)
        r1 = c1 * min(2.0, 2.0 ** (-1 - gamma / 2)) * tfac
    T.setflags(write=False)
    return ChangeOfVariables(z0, T, float(r1), float(c1), float(gamma))


def _check_in_unit_cylinder(t, x, v):
    t = np.asarray(t, dtype=float)
    ok = ((t > -1 - 1e-12) & (t <= 1e-12)
          & (np.linalg.norm(x, axis=-1) <= 1 + 1e-12) & (np.linalg.norm(v, axis=-1) <= 1 + 1e-12))
    if not np.all(ok):
        raise ValueError("points must lie in the unit cylinder")


def transformed_on_points(f: DensityField, cov: ChangeOfVariables, r: float, t, x, v,
                          kinds="abc", quad_rule=DEFAULT_QUADRATURE) -> dict:
    """A = T^-1 a(.) T^-1, B = r T^-1 b(.), C = r^2 c(.) at T_{z0}(delta_r z)."""
    if not 0 < r <= cov.r1 * (1 + 1e-12):
        raise ValueError(f"radius {r} must lie in (0, r1 = {cov.r1}]")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    _check_in_unit_cylinder(t, x, v)
    _, _, vv = cov.apply(r, t, x, v)
    res = coefficients(f, vv, kinds, quad_rule=quad_rule)
    Ti = cov.T_inv
    out = {}
    if "a" in res:
        out["A"] = np.einsum("ij,njk,kl->nil", Ti, res["a"], Ti)
    if "b" in res:
        out["B"] = r * res["b"] @ Ti.T
    if "c" in res:
        out["C"] = r * r * res["c"]
    return out


def transformed_coefficients(f: DensityField, cov: ChangeOfVariables, r: float, z: PhasePoint,
                             quad_rule=DEFAULT_QUADRATURE):
    res = transformed_on_points(f, cov, r, [z.t], z.x[None], z.v[None], "abc", quad_rule)
    return res["A"][0], res["B"][0], float(res["C"][0])


@dataclass(frozen=True)
class EllipticityWindow:
    lam: float
    Lam: float

    def __post_init__(self):
        if not 0 < self.lam <= self.Lam:
            raise ValueError("need 0 < lambda <= Lambda")


def ellipticity_window(f: DensityField, cov: ChangeOfVariables, n_v: int = 3,
                       quad_rule=DEFAULT_QUADRATURE) -> EllipticityWindow:
    """Extreme eigenvalues of the transformed A over a velocity grid of the unit ball."""
    d = f.d
    g = np.linspace(-1, 1, n_v) if n_v > 1 else np.zeros(1)
    V = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)
    V = V[np.linalg.norm(V, axis=-1) <= 1 + 1e-12]
    n = V.shape[0]
    A = transformed_on_points(f, cov, cov.r1, np.zeros(n), np.zeros((n, d)), V, "a",
                              quad_rule)["A"]
    ev = np.linalg.eigvalsh(A)
    return EllipticityWindow(float(ev.min()), float(ev.max()))


def pullback_seminorm_bound(cov: ChangeOfVariables, M: int, alpha: float, measured: float) -> float:
    """r1^{-M-alpha} (1 + |v0|)^{-gamma alpha / 2} times the measured seminorm."""
    if measured < 0:
        raise ValueError("measured seminorm must be nonnegative")
    nv = float(np.linalg.norm(cov.base.v))
    return cov.r1 ** (-M - alpha) * (1 + nv) ** (-cov.gamma * alpha / 2) * measured


# -- Gaussian barrier ----------------------------------------------------------

def _directional_forms(A, V):
    nv = np.linalg.norm(V, axis=-1)
    e = V / np.where(nv > 0, nv, 1.0)[:, None]
    par = np.einsum("ni,nij,nj->n", e, A, e)
    perp_trace = np.trace(A, axis1=-2, axis2=-1) - par
    return nv, par, perp_trace


def barrier_ratios(f: DensityField, mu_bar: float, V, quad_rule=DEFAULT_QUADRATURE):
    """(a_ij d_ij phi + c phi) / ((1 + |v|)^{gamma+2} phi) for phi = exp(-mu_bar |v|^2).

    Uses the radial Hessian of phi: (4 mu^2 |v|^2 - 2 mu) on v^ v^ and -2 mu
    on its orthogonal complement.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    res = coefficients(f, V, "ac", quad_rule=quad_rule)
    nv, par, perp_tr = _directional_forms(res["a"], V)
    val = (4 * mu_bar ** 2 * nv ** 2 - 2 * mu_bar) * par - 2 * mu_bar * perp_tr + res["c"]
    return val / (1 + nv) ** (f.gamma + 2)


def barrier_check(f: DensityField, mu_bar: float, R0: float, v_samples, c_margin: float = 0.01,
                  quad_rule=DEFAULT_QUADRATURE) -> VerificationReport:
    if mu_bar <= 0 or R0 <= 0:
        raise ValueError("mu_bar and R0 must be positive")
    V = np.atleast_2d(np.asarray(v_samples, dtype=float))
    V = V[np.linalg.norm(V, axis=-1) >= R0]
    if V.shape[0] == 0:
        raise ValueError("no velocity samples with |v| >= R0")
    rep = VerificationReport(f"barrier({f.name}, mu_bar={mu_bar:.6g}, R0={R0})")
    ratios = barrier_ratios(f, mu_bar, V, quad_rule)
    worst = float(np.max(ratios))
    rep.measured.update({"max_ratio": worst, "min_ratio": float(np.min(ratios)),
                         "samples": float(V.shape[0])})
    rep.compare("max supersolution ratio", worst, -c_margin, 0.0, "le", "gaussian-barrier")
    if f.is_zero:
        rep.notes.append("degenerate density: coefficients vanish identically")
    return rep


def estimate_mu0(f: DensityField, v_range, quad_rule=DEFAULT_QUADRATURE, seed: int = 0) -> float:
    """C2 / (2 C1) with C1 = max e.a.e/(1+|v|)^gamma (e || v), C2 = min e.a.e/(1+|v|)^{gamma+2} (e perp v).

    ``v_range`` is a list of velocities, or of speeds (placed along the first axis).
    """
    V = np.asarray(v_range, dtype=float)
    if V.ndim == 1:
        V = V[:, None] * np.eye(f.d)[0]
    if V.size == 0 or np.any(np.linalg.norm(V, axis=-1) < 2 - 1e-12):
        raise ValueError("v_range must be nonempty with |v| >= 2")
    if f.d < 2:
        raise ValueError("the perpendicular form needs d >= 2")
    res = coefficients(f, V, "a", quad_rule=quad_rule)
    rng = np.random.default_rng(seed)
    nv = np.linalg.norm(V, axis=-1)
    par, perp = [], []
    for k in range(V.shape[0]):
        e_par, e_perp = _orthonormal_frame(V[k], rng)
        par.append(e_par @ res["a"][k] @ e_par)
        perp.append(e_perp @ res["a"][k] @ e_perp)
    C1 = float(np.max(np.array(par) / (1 + nv) ** f.gamma))
    C2 = float(np.min(np.array(perp) / (1 + nv) ** (f.gamma + 2)))
    if not C1 > 0 or not C2 > 0:
        raise ValueError("degenerate density: ellipticity constants vanish")
    return C2 / (2 * C1)


# -- oracles and composite reports ----------------------------------------------

def gaussian_radial_moment(d: int, k: float, mu: float = 1.0) -> float:
    """int_{R^d} |w|^k exp(-mu |w|^2) dw in closed form (k > -d)."""
    if k <= -d:
        raise ValueError("the moment diverges for k <= -d")
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    return sphere * math.gamma((k + d) / 2) / (2 * mu ** ((k + d) / 2))


def maxwellian_origin_values(d: int, gamma: float, mu: float = 1.0, mass: float = 1.0,
                             kernel_constants=(1.0, 1.0, 1.0)) -> tuple[float, float]:
    """(s, c) with a(0) = s I and c(0) = c for mass * exp(-mu |v|^2)."""
    ka, _, kc = kernel_constants
    s = ka * mass * (d - 1) / d * gaussian_radial_moment(d, gamma + 2, mu)
    c = kc * mass * (1.0 if gamma == -d else gaussian_radial_moment(d, gamma, mu))
    return s, c


def oracle_report(f: DensityField, tol: float = 1e-4, trace_rtol: float = 1e-6,
                  speeds=(0.5, 2.0, 5.0), quad_rule=DEFAULT_QUADRATURE) -> VerificationReport:
    """Coefficients of a centred Maxwellian against one-dimensional radial reductions (d = 3)."""
    rep = VerificationReport(f"coefficient-oracles({f.name})")
    comps = f.components
    if (f.d != 3 or len(comps) != 1 or np.any(comps[0].center) or f.sampled is not None):
        raise ValueError("the radial oracles need a single centred Gaussian in d = 3")
    mass, mu = comps[0].weight, comps[0].mu
    ka, _, kc = f.kernel_constants
    res = coefficients(f, np.zeros((1, 3)), "abc", quad_rule=quad_rule)
    s_or = ka * mass * (2 / 3) * radial_kernel_integral(f.gamma + 2, 0.0, mu)
    c_or = kc * mass * (1.0 if f.gamma == -3 else radial_kernel_integral(f.gamma, 0.0, mu))
    for i in range(3):
        for k in range(3):
            rep.compare(f"a(0)[{i}{k}]", res["a"][0, i, k], s_or if i == k else 0.0, tol, "abs",
                        "coefficient-definitions")
    rep.compare("c(0)", res["c"][0], c_or, tol, "abs", "coefficient-definitions")
    rep.compare("|b(0)|", np.linalg.norm(res["b"][0]), 0.0, tol, "abs", "coefficient-definitions")
    V = np.array([[s, 0.0, 0.0] for s in speeds])
    res = coefficients(f, V, "a", quad_rule=quad_rule)
    for s, A in zip(speeds, res["a"]):
        ref = ka * mass * 2 * radial_kernel_integral(f.gamma + 2, s, mu)
        rep.measured[f"trace a@|v|={s}"] = float(np.trace(A))
        rep.compare(f"trace identity@|v|={s}", np.trace(A), ref, trace_rtol, "rel",
                    "coefficient-definitions")
    return rep


def window_stability_report(f: DensityField, speeds=(2.0, 4.0, 6.0, 8.0, 10.0), t0: float = 2.0,
                            c1: float = 0.1, tol: float = 0.2, n_v: int = 3,
                            quad_rule=DEFAULT_QUADRATURE) -> VerificationReport:
    """Eigenvalue window of the transformed A at base points v0 = s e_1; endpoints must vary <= tol."""
    rep = VerificationReport(f"ellipticity-window({f.name})")
    lams, Lams = [], []
    for s in speeds:
        z0 = PhasePoint(t0, np.zeros(f.d), s * np.eye(f.d)[0])
        w = ellipticity_window(f, build_change_of_variables(z0, f.gamma, c1), n_v, quad_rule)
        lams.append(w.lam)
        Lams.append(w.Lam)
        rep.measured.update({f"lambda@|v0|={s}": w.lam, f"Lambda@|v0|={s}": w.Lam})
    for name, vals in (("lambda", lams), ("Lambda", Lams)):
        spread = (max(vals) - min(vals)) / min(vals)
        rep.compare(f"{name} variation", spread, 0.0, tol, "abs", "transformed-ellipticity")
    return rep


def barrier_samples(d: int, n: int = 200, r0: float = 5.0, r_max: float = 10.0,
                    seed: int = 0) -> np.ndarray:
    """Velocities with uniformly random directions and speeds in [r0, r_max]."""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return dirs * rng.uniform(r0, r_max, n)[:, None]
