import json
import subprocess
import sys

import pytest

from tensorinv.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, main


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


# ---------------------------------------------------------------------------
# verify

def test_verify_henon_heiles(capsys):
    code, rep = run_json(capsys, ["verify", "--system", "henon_heiles"])
    assert code == EXIT_OK and rep["passed"]
    assert all(c["status"] == "pass" for c in rep["checks"])
    assert {"L_X H = 0", "L_X P_tilde = 0"} <= {c["name"] for c in rep["checks"]}


def test_verify_numeric_jacobi(capsys):
    code, rep = run_json(capsys, ["verify", "--system", "henon_heiles", "--numeric-jacobi"])
    assert code == EXIT_OK and rep["numeric_jacobi"]["passed"]


def test_verify_fails_with_impossible_tolerance(capsys):
    code, rep = run_json(capsys, ["verify", "--system", "henon_heiles", "--numeric-jacobi",
                                  "--jacobi-tol", "1e-300"])
    assert code == EXIT_FAIL and rep["passed"] is False


@pytest.mark.parametrize("argv", [
    ["verify", "--system", "lorenz"],
    ["verify", "--system", "kepler", "--param", "mass=2"],
    ["verify", "--param", "novalue"],
    ["bogus"],
    ["report"],
])
def test_usage_errors(capsys, argv):
    assert main(argv) == EXIT_USAGE
    assert capsys.readouterr().out == ""


# ---------------------------------------------------------------------------
# solve

def test_solve_periodic_g2(capsys):
    code, rep = run_json(capsys, ["solve", "--system", "g2_toda", "--periodic"])
    assert code == EXIT_OK
    assert rep["nullity"] == 2 and rep["matches_expected_nullity"]
    assert rep["expected_span"] == {"P": True, "H*P": True}


def test_solve_pinned_free_motion(capsys, tmp_path):
    out = tmp_path / "solve.json"
    code = main(["solve", "--system", "free_motion", "--alpha", "2", "--pin12", "2*(q2*p1-q1*p2)",
                 "--output", str(out)])
    rep = json.loads(out.read_text())
    assert code == EXIT_OK and rep["passed"]
    assert rep["expected_span"]["P_h"]


# ---------------------------------------------------------------------------
# integrate

def integrate_args(tmp_path, tag, steps="50"):
    return ["integrate", "--system", "henon_heiles", "--harmonic", "1", "--b=-1/3",
            "--steps", steps, "--cadence", "10", "--csv", str(tmp_path / f"{tag}.csv"),
            "--output", str(tmp_path / f"{tag}.json")]


def test_integrate_writes_csv_and_summary(tmp_path):
    assert main(integrate_args(tmp_path, "a")) == EXIT_OK
    lines = (tmp_path / "a.csv").read_text().splitlines()
    # the harmonic variant carries no registered invariant forms or integrals
    assert lines[0] == "step,t,y1,y2,y3,y4,energy_drift,canonical_defect"
    assert len(lines) == 1 + 6
    summary = json.loads((tmp_path / "a.json").read_text())
    assert summary["samples"] == 6 and summary["max_canonical_defect"] < 1e-12


def test_integrate_is_byte_identical(tmp_path):
    main(integrate_args(tmp_path, "a"))
    main(integrate_args(tmp_path, "b"))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert b"\r" not in (tmp_path / "a.csv").read_bytes()


def test_integrate_zero_steps_header_only(tmp_path):
    assert main(integrate_args(tmp_path, "z", steps="0")) == EXIT_OK
    assert (tmp_path / "z.csv").read_text().count("\n") == 1


def test_integrate_kepler_collision_reports_event(capsys):
    code, rep = run_json(capsys, ["integrate", "--system", "kepler", "--y0", "1e-7", "0", "0", "0",
                                  "--steps", "10"])
    assert rep["truncated"] and rep["events"][0]["kind"] == "singularity"
    assert rep["events"][0]["step"] == 1
    assert code == EXIT_OK


def test_integrate_divergence_exits_nonzero(capsys):
    code, rep = run_json(capsys, ["integrate", "--system", "kepler", "--method", "implicit_midpoint",
                                  "--h", "2", "--steps", "5", "--y0", "1", "0", "0", "1.4", "--max-iter", "1"])
    assert code == EXIT_FAIL and rep["iterations"]


def test_integrate_bad_method(capsys):
    assert main(["integrate", "--method", "euler"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# Configuration

def test_run_config_round_trip():
    cfg = RunConfig(command="integrate", system="kepler", params={"kappa": "2"})
    cfg.integrator.steps = 7
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


@pytest.mark.parametrize("data", [
    {"colour": "red"},
    {"integrator": {"stepz": 3}},
    {"tolerances": {"energy": 1e-3}},
    {"system": "lorenz"},
])
def test_run_config_rejects_unknown(data):
    with pytest.raises(UsageError):
        RunConfig.from_dict(data)


def test_config_file_overrides_flags(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"integrator": {"steps": 20, "cadence": 5}}))
    args = integrate_args(tmp_path, "c") + ["--config", str(conf)]
    assert main(args) == EXIT_OK
    assert json.loads((tmp_path / "c.json").read_text())["steps"] == 20


def test_config_file_unknown_key(tmp_path):
    conf = tmp_path / "bad.json"
    conf.write_text(json.dumps({"integrator": {"stepz": 20}}))
    assert main(["integrate", "--config", str(conf)]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# report

def test_report_merges_summaries(capsys, tmp_path):
    main(integrate_args(tmp_path, "a"))
    main(integrate_args(tmp_path, "b", steps="20"))
    code, rep = run_json(capsys, ["report", str(tmp_path / "a.json"), str(tmp_path / "b.json")])
    assert code == EXIT_OK
    assert rep["columns"][0] == "source"
    steps = rep["columns"].index("steps")
    assert [row[steps] for row in rep["rows"]] == [50, 20]
    assert "max_energy_drift" in rep["columns"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tensorinv", "verify", "--system", "free_motion"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"]
