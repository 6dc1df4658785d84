import csv
import json
from pathlib import Path

import pytest

from lecam_tails.cli import TWOPOINT_COLUMNS, fmt, main
from lecam_tails.config import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, *args, out="out"):
    d = tmp_path / out
    code = main([*args, "--out", str(d)])
    return code, d


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_validate_null_certificate(tmp_path):
    code, d = run(tmp_path, "validate", "--set", "schedule.lambda=0")
    assert code == 0
    cert = json.loads((d / "validate.json").read_text())["certificate"]
    assert cert["A_min"] == 0.0
    assert (d / "config.resolved.json").exists()


def test_validate_desk(tmp_path):
    code, d = run(tmp_path, "validate", "--config", str(CONFIGS / "desk.json"))
    assert code == 0
    r = rows(d / "certificate.csv")
    assert r[0][:2] == ["n", "A_min"] and len(r) == 2


def test_chi2_null_zero(tmp_path):
    code, d = run(tmp_path, "chi2", "--set", "schedule.lambda=0")
    assert code == 0
    r = rows(d / "chi2.csv")
    col = r[0].index("chi2")
    assert all(float(row[col]) == 0.0 for row in r[1:])


def test_chi2_scan(tmp_path):
    code, d = run(tmp_path, "chi2", "--set", "chi2.n_grid=[100,1000,10000]")
    assert code == 0
    assert len(rows(d / "chi2.csv")) == 4
    assert json.loads((d / "chi2.json").read_text())["ratio"] < 10


def test_sample_then_estimate(tmp_path):
    code, d = run(tmp_path, "sample", "--set", "sample.density=f0", "--set", "sample.size=5000")
    assert code == 0
    text = (d / "samples.csv").read_text()
    assert text.startswith("# density")
    code, e = run(tmp_path, "estimate", "--set", f"estimate.input={d / 'samples.csv'}", out="est")
    assert code == 0
    est = json.loads((e / "estimate.json").read_text())
    assert est["n"] == 5000 and abs(est["alpha_hat"] - 1.0) < 0.2


def test_twopoint_header_and_bit_exact_rerun(tmp_path):
    args = ["twopoint", "--config", str(CONFIGS / "desk.json"),
            "--set", "experiment.replications=100"]
    code, d1 = run(tmp_path, *args, out="a")
    assert code == 0
    code, d2 = run(tmp_path, *args, out="b")
    assert code == 0
    text = (d1 / "twopoint.csv").read_text()
    lines = text.split("\n")
    assert lines[0] == ",".join(TWOPOINT_COLUMNS)
    assert lines[0] == "n,arm,p0_hat,p0_own,p1_hat,joint_hat,bound_rhs,gamma_tilde,two_an,se_p0,se_p1"
    assert len(lines) == 3 and lines[2] == ""
    assert "\r" not in text
    assert text == (d2 / "twopoint.csv").read_text()
    assert (d1 / "twopoint.json").read_text() == (d2 / "twopoint.json").read_text()


def test_config_echo_roundtrip(tmp_path):
    args = ["twopoint", "--set", "experiment.replications=50", "--set", "schedule.n=500"]
    code, d1 = run(tmp_path, *args, out="a")
    assert code == 0
    code, d2 = run(tmp_path, "twopoint", "--config", str(d1 / "config.resolved.json"), out="b")
    assert code == 0
    assert (d1 / "twopoint.csv").read_text() == (d2 / "twopoint.csv").read_text()
    assert (d1 / "config.resolved.json").read_text() == (d2 / "config.resolved.json").read_text()
    resolved = json.loads((d1 / "config.resolved.json").read_text())
    assert resolved["estimator"]["k_fraction_exponent"] == pytest.approx(2 / 3)
    assert resolved["schedule"]["lambda"] == 1.0


def test_scan_kinds(tmp_path):
    code, d = run(tmp_path, "scan", "--set", "scan.n_grid=[100,1000]", out="o")
    assert code == 0 and len(rows(d / "scan.csv")) == 3
    code, d = run(tmp_path, "scan", "--set", "scan.kind=membership",
                  "--set", "scan.n_grid=[100,1000]", out="m")
    assert code == 0 and rows(d / "scan.csv")[0][1] == "A_min"
    code, d = run(tmp_path, "scan", "--set", "scan.kind=separation", "--set", "scan.n_grid=[100,1000]",
                  "--set", "experiment.replications=40", out="s")
    assert code == 0
    r = rows(d / "scan.csv")
    assert r[0][-2:] == ["joint_threshold_hit", "flagged"] and len(r) == 3


def test_unknown_key_exit_1(tmp_path, capsys):
    code, _ = run(tmp_path, "chi2", "--set", "params.bogus=1")
    assert code == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 1


def test_invalid_value_exit_1(tmp_path, capsys):
    code, _ = run(tmp_path, "chi2", "--set", "params.alpha0=-1")
    assert code == 1


def test_bad_subcommand_exit_1(tmp_path):
    assert main(["frobnicate"]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_2(tmp_path, capsys):
    code, _ = run(tmp_path, "validate", "--set", "params.alpha0=0.5", "--set", "params.C0=0.01",
                  "--set", "params.epsilon=0.1", "--set", "params.A=1.0",
                  "--set", "schedule.n=2", "--set", "schedule.nu=0.2")
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "NotADensityError"
    assert err["minimal_valid_n"] > 2


def test_missing_config_exit_3(tmp_path):
    code, _ = run(tmp_path, "chi2", "--config", str(tmp_path / "nope.json"))
    assert code == 3


def test_missing_estimate_input_exit_3(tmp_path):
    code, _ = run(tmp_path, "estimate", "--set", f"estimate.input={tmp_path / 'none.csv'}")
    assert code == 3


def test_unwritable_out_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["chi2", "--out", str(blocker / "sub")]) == 3


def test_fmt_shortest_repr():
    assert fmt(0.1) == "0.1"
    assert fmt(True) == "true"
    assert float(fmt(1 / 3)) == 1 / 3


def test_load_config_defaults():
    cfg = load_config()
    assert cfg.params.alpha0 == 1.0 and cfg.seed.base_seed == 20150805
