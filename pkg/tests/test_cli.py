import json
import subprocess
import sys

import pytest

from kinschauder import cli
from kinschauder.fundamental import QuadratureError


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.delenv("KLL_OUT", raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _ini(path, text):
    path.write_text(text)
    return str(path)


def test_gamma_eval_nonpositive_time_prints_zero(out, capsys):
    assert cli.main(["gamma-eval", "--dim", "1", "--point", "-0.5,0.1,0.2"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "0.0"


def test_gamma_eval_value(out, capsys):
    assert cli.main(["--dim", "1", "gamma-eval", "--point", "1,0,0"]) == 0
    val = float(capsys.readouterr().out.splitlines()[0])
    assert val == pytest.approx(3 ** 0.5 / (2 * 3.141592653589793))


def test_gamma_eval_bad_point(out):
    assert cli.main(["gamma-eval", "--dim", "1", "--point", "1,0"]) == 2
    assert cli.main(["gamma-eval", "--dim", "1", "--point", "a,b,c"]) == 2


def test_unknown_subcommand_exits_2(out, capsys):
    assert cli.main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_subcommand_exits_2(out):
    assert cli.main([]) == 2


def test_selftest_exits_zero(out):
    assert cli.main(["selftest"]) == 0
    doc = json.loads((out / "kll_out" / "selftest.json").read_text())
    assert doc["pass"] is True


def test_invalid_config_exits_2(out):
    cfg = _ini(out / "bad.ini", "[run]\ngamma = 0.5\n")
    assert cli.main(["--config", cfg, "hydro"]) == 2
    assert cli.main(["hydro", "--config", str(out / "missing.ini")]) == 2


def test_three_dimensional_solve_needs_expensive(out):
    assert cli.main(["solve-const"]) == 2


def test_strict_failure_exits_1(out):
    cfg = _ini(out / "tight.ini", "[gamma]\ntimes = 0.1, 0.2\ntol = 0.0\nmax_weight = 0\n"
                                  "[run]\nd = 1\n")
    # zero tolerance on a fitted slope cannot hold exactly
    assert cli.main(["gamma-moments", "--config", cfg, "--strict"]) == 1
    assert cli.main(["gamma-moments", "--config", cfg]) == 0


def test_numerical_failure_exits_3(out, monkeypatch):
    def boom(args, cfg):
        raise QuadratureError("did not converge", 1.0)

    monkeypatch.setitem(cli._HANDLERS, "hydro", boom)
    assert cli.main(["hydro"]) == 3


def test_output_precedence(out, monkeypatch):
    monkeypatch.setenv("KLL_OUT", str(out / "env"))
    assert cli.main(["hydro"]) == 0
    assert (out / "env" / "hydro.csv").exists()
    cfg = _ini(out / "o.ini", f"[run]\nout = {out / 'cfg'}\n")
    assert cli.main(["hydro", "--config", cfg]) == 0
    assert (out / "cfg" / "hydro.csv").exists()
    assert cli.main(["hydro", "--config", cfg, "--out", str(out / "flag")]) == 0
    assert (out / "flag" / "hydro.csv").exists()


def test_flags_before_and_after_subcommand(out):
    assert cli.main(["--out", "a", "--seed", "3", "hydro"]) == 0
    assert cli.main(["hydro", "--out", "b", "--seed", "3"]) == 0
    assert (out / "a" / "hydro.csv").read_text() == (out / "b" / "hydro.csv").read_text()


def test_same_seed_same_csv(out):
    for d in ("r1", "r2"):
        assert cli.main(["selftest", "--seed", "5", "--out", d]) == 0
    assert (out / "r1" / "selftest.csv").read_bytes() == (out / "r2" / "selftest.csv").read_bytes()
    docs = [json.loads((out / d / "selftest.json").read_text()) for d in ("r1", "r2")]
    for doc in docs:
        doc.pop("generated")
    assert docs[0] == docs[1]


def test_coeffs_reports_oracle_for_centred_maxwellian(out):
    assert cli.main(["coeffs", "--strict"]) == 0
    doc = json.loads((out / "kll_out" / "coeffs.json").read_text())
    assert any(r["case"].startswith("coefficient-oracles") for r in doc["reports"])


def test_barrier_zero_density_needs_mu_bar(out):
    cfg = _ini(out / "z.ini", "[density]\nname = zero\n")
    assert cli.main(["barrier", "--config", cfg]) == 2


def test_schauder_regularity_family_zero_density(out):
    cfg = _ini(out / "z.ini", "[density]\nname = zero\n[bounds]\nwindow_speeds = 2, 4\n")
    assert cli.main(["schauder", "--family", "regularity", "--config", cfg, "--strict"]) == 0


def test_threads_must_be_positive(out):
    assert cli.main(["hydro", "--threads", "0"]) == 2


def test_module_entry_point(out):
    res = subprocess.run([sys.executable, "-m", "kinschauder", "gamma-eval", "--dim", "1",
                          "--point", "0,0,0"], capture_output=True, text=True, cwd=out)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "0.0"
