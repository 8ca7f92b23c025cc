import csv
import io
import json
import subprocess
import sys

import pytest

from cavbell import cli
from cavbell.protocol import ideal_fidelity


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_fidelity_sweep_csv(capsys):
    code, out, err = run(["fidelity-sweep", "--from", "0", "--to", "1", "--steps", "101", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 101
    assert float(rows[50]["fidelity"]) == ideal_fidelity(0.5)
    assert "resolved config" in err


def test_quiet_suppresses_config_log(capsys):
    code, _, err = run(["fidelity-sweep", "-q"], capsys)
    assert code == 0 and err == ""
    code, _, err = run(["-q", "fidelity-sweep"], capsys)
    assert code == 0 and err == ""


def test_preset_json(capsys):
    code, out, _ = run(["preset", "paris"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["g0"] == 1.48e5 and d["detector_eff"] == 0.4 and d["w0"] == 5.97e-3
    assert d["pulse_area"] == pytest.approx(3.13, abs=0.02)
    assert "D0" in d["assumptions"]


def test_window_json(capsys):
    code, out, _ = run(["window", "--fidelity-floor", "0.95", "--prob-floor", "0.5"], capsys)
    d = json.loads(out)
    assert code == 0 and not d["empty"]
    assert d["x_min"] == pytest.approx(0.5719, abs=1e-4)
    code, out, _ = run(["window", "--fidelity-floor", "0.999", "--prob-floor", "0.5"], capsys)
    assert json.loads(out)["empty"] is True


def test_montecarlo_summary(capsys):
    code, out, _ = run(["montecarlo", "--x", "0.5", "--detector", "0.4", "--trials", "4000", "--seed", "7"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["failure_free_fraction"] == pytest.approx(d["failure_free_exact"], abs=0.03)
    assert d["detection_prob_formula"] == pytest.approx(0.1052, abs=1e-3)


def test_g0tau_alias(capsys):
    _, a, _ = run(["run", "--g0tau", "0.7", "--seed", "3"], capsys)
    _, b, _ = run(["run", "--x", "0.7", "--seed", "3"], capsys)
    assert a == b


def test_geometry_paris(capsys):
    argv = ["geometry", "--w0", "5.97e-3", "--lambda", "5.87e-3", "--v", "500", "--D0", "0.05", "--D1", "0.05",
            "--y0", "2.5e-4", "--z0", "2.5e-4", "--phi", "5e-3", "--theta", "5e-3"]
    code, out, _ = run(argv, capsys)
    d = json.loads(out)
    assert code == 0
    assert 0.15 <= d["epsilon"] <= 0.2 and 0.15 <= d["epsilon_second_order"] <= 0.2
    assert d["tau_a_closed"] == pytest.approx(d["tau_a"], rel=1e-3)


def test_geometry_optical_reports_undefined(capsys):
    argv = ["geometry", "--w0", "20e-6", "--lambda", "852e-9", "--v", "500", "--D0", "0.05", "--D1", "0.05",
            "--y0", "2.5e-4", "--z0", "2.5e-4", "--phi", "5e-3", "--theta", "5e-3"]
    code, out, _ = run(argv, capsys)
    d = json.loads(out)
    assert code == 0 and d["epsilon"] is None and d["epsilon_second_order"] > 1


def test_geometry_needs_distances(capsys):
    code, _, err = run(["geometry", "--w0", "5.97e-3", "--lambda", "5.87e-3", "--v", "500"], capsys)
    assert code == 2 and "D0" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["no-such-command"],
        ["fidelity-sweep", "--bogus"],
        ["fidelity-sweep", "--steps", "1"],
        ["fidelity-sweep", "--from", "abc"],
        ["fidelity-sweep", "--from", "nan"],
        ["montecarlo", "--detector", "1.5"],
        ["montecarlo", "--trials", "0"],
        ["montecarlo", "--seed", "-1"],
        ["montecarlo", "--cutoff", "1"],
        ["montecarlo", "--vary", "x"],
        ["window", "--fidelity-floor", "0.9"],
        ["preset", "london"],
        ["preset", "paris", "--cavity-scale", "-1"],
        [],
    ],
)
def test_usage_errors(argv, capsys):
    code, out, _ = run(argv, capsys)
    assert code == 2 and out == ""


def test_io_error(tmp_path, capsys):
    code, _, err = run(["fidelity-sweep", "--out", str(tmp_path / "missing" / "f.csv")], capsys)
    assert code == 1 and "I/O" in err
    code, _, _ = run(["fidelity-sweep", "--config", str(tmp_path / "absent.cfg")], capsys)
    assert code == 1


def test_out_file(tmp_path, capsys):
    target = tmp_path / "f.csv"
    code, out, _ = run(["fidelity-sweep", "--steps", "3", "--out", str(target)], capsys)
    assert code == 0 and out == ""
    assert target.read_bytes().startswith(b"x,fidelity\n")


def test_config_merges_under_flags(tmp_path, capsys):
    cfg = tmp_path / "mc.cfg"
    cfg.write_text("# experiment\nx = 0.7\ndetector = 0.4\nseed = 5\ntrials = 300\n")
    _, from_cfg, _ = run(["montecarlo", "--config", str(cfg)], capsys)
    _, explicit, _ = run(["montecarlo", "--x", "0.7", "--detector", "0.4", "--seed", "5", "--trials", "300"], capsys)
    assert from_cfg == explicit
    _, override, _ = run(["montecarlo", "--config", str(cfg), "--x", "0.5"], capsys)
    assert json.loads(override)["x"] == 0.5 and json.loads(override)["D"] == 0.4


def test_config_rejects_bad_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(["fidelity-sweep", "--config", str(cfg)], capsys)[0] == 2
    cfg.write_text("detector = 2\n")
    assert run(["montecarlo", "--config", str(cfg)], capsys)[0] == 2


def test_geometry_config_file(tmp_path, capsys):
    cfg = tmp_path / "paris.cfg"
    cfg.write_text("w0 = 5.97e-3\nlambda = 5.87e-3\nv = 500\nD0 = 0.05\nD1 = 0.05\n")
    code, out, _ = run(["geometry", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["epsilon"] == 0.0


def test_help_lists_units(capsys):
    parser = cli.build_parser()
    numeric = (cli.finite, cli.unit_interval)
    for name, sub in parser.subcommands.items():
        for action in sub._actions:
            if action.type in numeric:
                assert any(tag in action.help for tag in ("[", "dimensionless", "in [0, 1]", "photon number")), (name, action.dest)
        with pytest.raises(SystemExit) as info:
            sub.parse_args(["--help"])
        assert info.value.code == 0
        text = capsys.readouterr().out
        for action in sub._actions:
            for flag in action.option_strings:
                assert flag in text


@pytest.mark.parametrize(
    "argv",
    [
        ["montecarlo", "--x", "0.5", "--detector", "0.4", "--trials", "3000", "--seed", "11"],
        ["montecarlo", "--vary", "D", "--from", "0.4", "--to", "1", "--steps", "3", "--trials", "800",
         "--seed", "2", "--format", "csv"],
        ["montecarlo", "--x", "0.5", "--detector", "0.4", "--trials", "500", "--seed", "4", "--policy", "continue-mixed"],
    ],
)
def test_byte_identical_across_workers(argv, capsys):
    outs = {run(argv + ["--workers", w], capsys)[1] for w in ("1", "1", "3")}
    assert len(outs) == 1


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "cavbell.cli", "fidelity-sweep", "--steps", "2", "-q"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "x,fidelity"
