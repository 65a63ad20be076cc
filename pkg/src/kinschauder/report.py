"""Verification reports and their JSON / CSV / fit-data serialization."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["Comparison", "FitData", "VerificationReport", "emit_report", "CSV_FIELDS",
           "fit_power_law"]

# fixed CSV column order
CSV_FIELDS = ("case", "quantity", "measured", "predicted", "tolerance", "comparison", "pass",
              "anchor")

_KINDS = ("abs", "rel", "le", "ge")


@dataclass
class Comparison:
    """One measured-vs-predicted check.

    ``kind`` selects the test: ``abs`` |m - p| <= tol, ``rel`` |m - p| <= tol |p|,
    ``le`` m <= p + tol, ``ge`` m >= p - tol.
    """

    quantity: str
    measured: float
    predicted: float
    tolerance: float
    kind: str = "abs"
    anchor: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown comparison kind {self.kind!r}")
        self.measured = float(self.measured)
        self.predicted = float(self.predicted)
        self.tolerance = float(self.tolerance)

    @property
    def passed(self) -> bool:
        m, p, tol = self.measured, self.predicted, self.tolerance
        if not math.isfinite(m):
            return False
        if self.kind == "abs":
            return abs(m - p) <= tol
        if self.kind == "rel":
            return abs(m - p) <= tol * abs(p)
        if self.kind == "le":
            return m <= p + tol
        return m >= p - tol


@dataclass
class FitData:
    """Points of a log-log (or log-linear) fit, written as a two-column file."""

    name: str
    x: Sequence[float]
    y: Sequence[float]
    slope: float = float("nan")
    intercept: float = float("nan")


@dataclass
class VerificationReport:
    case_id: str
    measured: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)
    error_estimates: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)

    def compare(self, quantity, measured, predicted, tolerance, kind="abs", anchor=""):
        c = Comparison(quantity, measured, predicted, tolerance, kind, anchor)
        self.comparisons.append(c)
        return c

    def failures(self):
        return [c for c in self.comparisons if not c.passed]

    def merge(self, other: "VerificationReport", prefix: str = "") -> "VerificationReport":
        for k, v in other.measured.items():
            self.measured[prefix + k] = v
        for c in other.comparisons:
            self.comparisons.append(Comparison(prefix + c.quantity, c.measured, c.predicted,
                                               c.tolerance, c.kind, c.anchor))
        for k, v in other.error_estimates.items():
            self.error_estimates[prefix + k] = v
        self.fits.extend(other.fits)
        self.notes.extend(other.notes)
        self.runtime += other.runtime
        return self

    def to_dict(self) -> dict:
        return {
            "case": self.case_id,
            "pass": self.passed,
            "measured": {k: _num(v) for k, v in self.measured.items()},
            "comparisons": [
                {"quantity": c.quantity, "measured": _num(c.measured),
                 "predicted": _num(c.predicted), "tolerance": _num(c.tolerance),
                 "comparison": c.kind, "pass": c.passed, "anchor": c.anchor}
                for c in self.comparisons
            ],
            "error_estimates": {k: _num(v) for k, v in self.error_estimates.items()},
            "fits": [{"name": f.name, "slope": _num(f.slope), "intercept": _num(f.intercept),
                      "n": len(f.x)} for f in self.fits],
            "notes": list(self.notes),
        }

    def summary(self) -> str:
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.case_id}"
        lines = [head]
        for c in self.comparisons:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"  {mark} {c.quantity}: measured {c.measured:.6g} vs {c.kind} "
                         f"{c.predicted:.6g} (tol {c.tolerance:.3g})")
        return "\n".join(lines)


def _num(v):
    v = float(v)
    if math.isfinite(v):
        return v
    return str(v)


def _fmt(v: float) -> str:
    return repr(float(v))


def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", s).strip("_") or "fit"


def fit_power_law(x, y, name="fit", log_x=True):
    """Least-squares slope of log y against log x (or x); returns (FitData, relative residual)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or (log_x and np.any(x <= 0)):
        raise ValueError("power-law fit needs positive data")
    lx = np.log(x) if log_x else x
    ly = np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    spread = np.linalg.norm(ly - ly.mean())
    rel = float(np.linalg.norm(resid) / spread) if spread > 0 else 0.0
    return FitData(name, lx.tolist(), ly.tolist(), float(slope), float(intercept)), rel


def emit_report(reports, out_dir, formats: Iterable[str] = ("csv", "json"),
                stem: str = "report") -> list[Path]:
    """Write ``<stem>.json``, ``<stem>.csv`` and one ``.dat`` file per fit.

    The JSON keeps wall-clock data (timestamp, runtimes) under ``generated`` so
    the rest of the document is reproducible byte for byte.
    """
    if isinstance(reports, VerificationReport):
        reports = [reports]
    reports = list(reports)
    formats = set(formats)
    unknown = formats - {"csv", "json"}
    if unknown:
        raise ValueError(f"unknown report formats: {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        doc = {
            "pass": all(r.passed for r in reports),
            "reports": [r.to_dict() for r in reports],
            "generated": {
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "runtime_s": {r.case_id: r.runtime for r in reports},
            },
        }
        p = out / f"{stem}.json"
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        written.append(p)
    if "csv" in formats:
        p = out / f"{stem}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for r in reports:
                for c in r.comparisons:
                    w.writerow([r.case_id, c.quantity, _fmt(c.measured), _fmt(c.predicted),
                                _fmt(c.tolerance), c.kind, int(c.passed), c.anchor])
        written.append(p)
    for r in reports:
        for f in r.fits:
            p = out / f"{_slug(r.case_id)}__{_slug(f.name)}.dat"
            with p.open("w") as fh:
                fh.write(f"# {f.name}: slope {f.slope!r} intercept {f.intercept!r}\n")
                for a, b in zip(f.x, f.y):
                    fh.write(f"{float(a)!r} {float(b)!r}\n")
            written.append(p)
    return written
