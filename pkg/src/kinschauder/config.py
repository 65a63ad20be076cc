"""Run configuration: an INI file with fixed sections and validated keys.

Every key has a default, so an empty file is a valid configuration.  Vectors
are comma-separated numbers.  Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import field
from typing import Any

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "parse_config", "serialize_config",
           "load_config", "DENSITY_NAMES"]

DENSITY_NAMES = ("maxwellian", "shifted-maxwellian", "bimodal", "zero", "grid")


class ConfigError(ValueError):
    """Parse or validation failure; ``key`` names the offending entry when known."""

    def __init__(self, message, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line


def _floats(s):
    return tuple(float(p) for p in str(s).replace(" ", "").split(",") if p)


def _opt_float(s):
    s = str(s).strip()
    return None if s.lower() in ("", "none", "auto") else float(s)


def _opt_floats(s):
    s = str(s).strip()
    return None if s.lower() in ("", "none", "auto") else _floats(s)


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# (section, key) -> (attribute, parser, default)
SCHEMA: dict = {
    ("run", "d"): ("d", int, 3),
    ("run", "gamma"): ("gamma", float, -1.0),
    ("run", "seed"): ("seed", int, 0),
    ("run", "out"): ("out", str, ""),
    ("run", "alpha"): ("alpha", float, 0.5),
    ("run", "beta"): ("beta", _opt_float, None),
    ("run", "pair_budget"): ("pair_budget", int, 1_000_000),
    ("density", "name"): ("density", str, "maxwellian"),
    ("density", "mu"): ("mu", float, 1.0),
    ("density", "mass"): ("mass", float, 1.0),
    ("density", "v_shift"): ("v_shift", float, 2.0),
    ("density", "separation"): ("separation", float, 2.0),
    ("density", "grid_file"): ("grid_file", str, ""),
    ("density", "envelope"): ("envelope", _floats, (1.0, 1.0)),
    ("density", "kernel_constants"): ("kernel_constants", _floats, (1.0, 1.0, 1.0)),
    ("quadrature", "rho0"): ("rho0", float, 6.0),
    ("quadrature", "n_radial"): ("n_radial", int, 32),
    ("quadrature", "n_theta"): ("n_theta", int, 24),
    ("quadrature", "n_phi"): ("n_phi", int, 48),
    ("quadrature", "n_hermite"): ("n_hermite", int, 48),
    ("quadrature", "moment_order"): ("moment_order", int, 0),
    ("quadrature", "n_s"): ("n_s", int, 12),
    ("quadrature", "n_a"): ("n_a", int, 20),
    ("quadrature", "n_b"): ("n_b", int, 20),
    ("grid", "n_coarse"): ("n_coarse", int, 7),
    ("grid", "n_v"): ("n_v", int, 9),
    ("grid", "n_solve"): ("n_solve", int, 17),
    ("gamma", "point"): ("point", _opt_floats, None),
    ("gamma", "times"): ("times", _floats, (0.1, 0.2, 0.4, 0.8)),
    ("gamma", "max_weight"): ("max_weight", int, 3),
    ("gamma", "tol"): ("moment_tol", float, 0.05),
    ("bounds", "v_min"): ("v_min", float, 2.0),
    ("bounds", "v_max"): ("v_max", float, 10.0),
    ("bounds", "n_samples"): ("n_samples", int, 8),
    ("bounds", "tol"): ("bounds_tol", float, 0.1),
    ("bounds", "window_speeds"): ("window_speeds", _floats, (2.0, 4.0, 6.0, 8.0, 10.0)),
    ("bounds", "window_tol"): ("window_tol", float, 0.2),
    ("barrier", "mu_bar"): ("mu_bar", _opt_float, None),
    ("barrier", "r0"): ("r0", float, 5.0),
    ("barrier", "r_max"): ("r_max", float, 10.0),
    ("barrier", "n_samples"): ("barrier_samples", int, 200),
    ("barrier", "margin"): ("margin", float, 0.01),
    ("schauder", "family"): ("family", str, "constant"),
    ("schauder", "a0"): ("a0", _floats, (1.0, 4.0)),
    ("schauder", "tol"): ("refinement_tol", float, 0.3),
    ("bootstrap", "speeds"): ("speeds", _floats, (2.0, 3.0, 4.0, 5.0)),
    ("bootstrap", "stage"): ("stage", int, 0),
    ("bootstrap", "c1"): ("c1", float, 0.1),
    ("bootstrap", "t0"): ("t0", float, 2.0),
    ("bootstrap", "residual_tol"): ("residual_tol", float, 0.15),
    ("output", "formats"): ("formats", lambda s: tuple(p.strip() for p in str(s).split(",")
                                                      if p.strip()), ("csv", "json")),
    ("output", "strict"): ("strict", _bool, False),
}

_FAMILIES = ("constant", "higher-constant", "variable", "higher-variable", "regularity")


def _fields():
    out = []
    for (_, _), (attr, _, default) in SCHEMA.items():
        out.append((attr, Any, field(default=default)))
    return out


RunConfig = dataclasses.make_dataclass("RunConfig", _fields(), frozen=True)
RunConfig.__doc__ = "Validated run configuration; see ``SCHEMA`` for sections and defaults."


def _validate(cfg) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}", key=key)

    if cfg.d not in (1, 2, 3):
        bad("run.d", f"dimension must be 1, 2 or 3, got {cfg.d}")
    if not (-cfg.d <= cfg.gamma < 0):
        bad("run.gamma", f"gamma must lie in [-d, 0) = [{-cfg.d}, 0), got {cfg.gamma}")
    if not 0 < cfg.alpha < 1:
        bad("run.alpha", "alpha must lie in (0, 1)")
    if cfg.beta is not None and not 0 < cfg.beta < 1:
        bad("run.beta", "beta must lie in (0, 1)")
    if cfg.pair_budget < 1:
        bad("run.pair_budget", "must be positive")
    if cfg.density not in DENSITY_NAMES:
        bad("density.name", f"unknown density {cfg.density!r}; choose from {DENSITY_NAMES}")
    if cfg.density == "grid" and not cfg.grid_file:
        bad("density.grid_file", "a grid density needs a grid file")
    if cfg.mu <= 0:
        bad("density.mu", "mu must be positive")
    if cfg.mass <= 0:
        bad("density.mass", "mass must be positive")
    if len(cfg.envelope) != 2 or cfg.envelope[0] < 0 or cfg.envelope[1] <= 0:
        bad("density.envelope", "expected 'C0, mu' with C0 >= 0, mu > 0")
    if len(cfg.kernel_constants) != 3:
        bad("density.kernel_constants", "expected three constants")
    for key in ("n_radial", "n_theta", "n_phi", "n_hermite", "n_s", "n_a", "n_b"):
        if getattr(cfg, key) < 2:
            bad(f"quadrature.{key}", "need at least 2 nodes")
    if cfg.rho0 <= 0:
        bad("quadrature.rho0", "must be positive")
    if cfg.moment_order < 0:
        bad("quadrature.moment_order", "must be >= 0 (0 selects the default)")
    if cfg.n_coarse < 2 or cfg.n_v < 2 or cfg.n_solve < 2:
        bad("grid", "resolutions must be at least 2")
    if cfg.point is not None and len(cfg.point) != 1 + 2 * cfg.d:
        bad("gamma.point", f"expected 1 + 2d = {1 + 2 * cfg.d} numbers (t, x, v)")
    if not cfg.times or min(cfg.times) <= 0:
        bad("gamma.times", "times must be positive")
    if cfg.max_weight < 0:
        bad("gamma.max_weight", "must be >= 0")
    if not 0 < cfg.v_min < cfg.v_max:
        bad("bounds.v_min", "need 0 < v_min < v_max")
    if cfg.n_samples < 4:
        bad("bounds.n_samples", "exponent fits need at least 4 samples")
    if cfg.mu_bar is not None and cfg.mu_bar <= 0:
        bad("barrier.mu_bar", "must be positive")
    if cfg.r0 <= 0 or cfg.r_max < cfg.r0:
        bad("barrier.r0", "need 0 < r0 <= r_max")
    if cfg.barrier_samples < 1:
        bad("barrier.n_samples", "must be positive")
    if cfg.family not in _FAMILIES:
        bad("schauder.family", f"unknown family {cfg.family!r}; choose from {_FAMILIES}")
    if not cfg.a0 or min(cfg.a0) <= 0:
        bad("schauder.a0", "diagonal entries must be positive")
    if len(cfg.speeds) < 2 or min(cfg.speeds) <= 0:
        bad("bootstrap.speeds", "need at least two positive speeds")
    if cfg.stage not in (0, 1):
        bad("bootstrap.stage", "stage must be 0 or 1")
    if cfg.c1 <= 0 or cfg.t0 <= 0:
        bad("bootstrap.c1", "c1 and t0 must be positive")
    if set(cfg.formats) - {"csv", "json"}:
        bad("output.formats", "formats must be csv and/or json")
    for name in ("moment_tol", "bounds_tol", "window_tol", "refinement_tol", "residual_tol",
                 "margin"):
        if not math.isfinite(getattr(cfg, name)) or getattr(cfg, name) < 0:
            bad(name, "tolerances must be nonnegative")


def parse_config(text: str):
    """Parse INI text into a validated :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: expected a [section] header",
                          line=exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"line {line}: malformed entry", line=line) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"line {line}: {exc.message}", line=line) from exc
    sections = {s for s, _ in SCHEMA}
    values = {}
    for sec in cp.sections():
        if sec not in sections:
            raise ConfigError(f"unknown section [{sec}]", key=sec)
        for key, raw in cp.items(sec):
            if (sec, key) not in SCHEMA:
                raise ConfigError(f"{sec}.{key}: unknown key", key=f"{sec}.{key}")
            attr, conv, _ = SCHEMA[(sec, key)]
            try:
                values[attr] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{sec}.{key}: cannot parse {raw!r} ({exc})",
                                  key=f"{sec}.{key}") from exc
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _render(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_render(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg) -> str:
    """INI text that parses back to an equal configuration."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for (sec, key), (attr, _, _) in SCHEMA.items():
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, key, _render(getattr(cfg, attr)))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_config(path) -> object:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
