import json
import math

import pytest

from kinschauder.report import (CSV_FIELDS, Comparison, FitData, VerificationReport, emit_report,
                                fit_power_law)

GOLDEN_CSV = """\
case,quantity,measured,predicted,tolerance,comparison,pass,anchor
demo,slope,-0.98,-1.0,0.05,abs,1,moment-scaling
demo,mass,1.5,1.0,0.1,rel,0,unit-mass
other,bound,nan,1.0,0.0,le,0,
"""


def _reports():
    a = VerificationReport("demo")
    a.compare("slope", -0.98, -1.0, 0.05, "abs", "moment-scaling")
    a.compare("mass", 1.5, 1.0, 0.1, "rel", "unit-mass")
    a.fits.append(FitData("slope fit", [0.0, 1.0], [0.0, -1.0], -1.0, 0.0))
    b = VerificationReport("other")
    b.compare("bound", math.nan, 1.0, 0.0, "le")
    return [a, b]


@pytest.mark.parametrize("kind, m, p, tol, ok", [
    ("abs", 1.05, 1.0, 0.1, True), ("abs", 1.2, 1.0, 0.1, False),
    ("rel", 2.1, 2.0, 0.1, True), ("rel", -2.0, 2.0, 0.1, False),
    ("le", 1.0, 0.9, 0.1, True), ("le", 1.1, 0.9, 0.1, False),
    ("ge", 0.85, 0.9, 0.1, True), ("ge", 0.7, 0.9, 0.1, False),
    ("abs", math.inf, 1.0, 1e300, False),
])
def test_comparison_kinds(kind, m, p, tol, ok):
    assert Comparison("q", m, p, tol, kind).passed is ok


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        Comparison("q", 1, 1, 0, "approx")


def test_pass_iff_all_comparisons_pass():
    rep = VerificationReport("x")
    assert rep.passed
    rep.compare("a", 1, 1, 0)
    assert rep.passed
    rep.compare("b", 1, 2, 0)
    assert not rep.passed and len(rep.failures()) == 1


def test_merge_prefixes():
    a, b = _reports()
    a.merge(b, prefix="sub:")
    assert a.comparisons[-1].quantity == "sub:bound"


def test_golden_csv(tmp_path):
    emit_report(_reports(), tmp_path, ("csv",), stem="r")
    assert (tmp_path / "r.csv").read_text() == GOLDEN_CSV
    assert GOLDEN_CSV.splitlines()[0] == ",".join(CSV_FIELDS)


def test_empty_report_writes_headers_only(tmp_path):
    written = emit_report([], tmp_path, stem="e")
    assert {p.name for p in written} == {"e.csv", "e.json"}
    assert (tmp_path / "e.csv").read_text() == ",".join(CSV_FIELDS) + "\n"
    doc = json.loads((tmp_path / "e.json").read_text())
    assert doc["reports"] == [] and doc["pass"] is True


def test_json_is_deterministic_outside_generated_block(tmp_path):
    emit_report(_reports(), tmp_path / "a")
    emit_report(_reports(), tmp_path / "b")
    docs = [json.loads((tmp_path / s / "report.json").read_text()) for s in "ab"]
    for d in docs:
        assert "timestamp" in d.pop("generated")
    assert docs[0] == docs[1]
    assert docs[0]["reports"][1]["comparisons"][0]["measured"] == "nan"


def test_fit_files(tmp_path):
    written = emit_report(_reports(), tmp_path, ("json",))
    dat = [p for p in written if p.suffix == ".dat"]
    assert [p.name for p in dat] == ["demo__slope_fit.dat"]
    lines = dat[0].read_text().splitlines()
    assert lines[0].startswith("# slope fit")
    assert lines[1:] == ["0.0 0.0", "1.0 -1.0"]


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report(_reports(), tmp_path, ("xml",))


def test_fit_power_law():
    x = [1.0, 2.0, 4.0, 8.0]
    fit, resid = fit_power_law(x, [3 * v ** -1.5 for v in x])
    assert fit.slope == pytest.approx(-1.5) and resid < 1e-12
    fit, _ = fit_power_law([0.0, 1.0, 2.0], [1.0, math.e ** -2, math.e ** -4], log_x=False)
    assert fit.slope == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0], [1.0, -1.0])
