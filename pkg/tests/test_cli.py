import csv
import json
import subprocess
import sys

import pytest

from hormander import cli
from hormander import io as IO


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def test_bracket_command_writes_manifest(tmp_path):
    assert run(tmp_path, "bracket", "--seed", "1") == cli.EXIT_OK
    d = tmp_path / "bracket-1"
    man = json.loads((d / "manifest.json").read_text())
    assert man["status"] == "ok" and man["seed"] == 1 and man["config"]["K"] == 4
    for name, digest in man["files"].items():
        assert IO.sha256(d / name) == digest


def test_inline_fields(tmp_path):
    fields = json.dumps({"drift": "0 ; 0 ; 0", "diffusions": ["1 ; 0 ; -0.5*x2", "0 ; 1 ; 0.5*x1"],
                         "points": [[0, 0, 0], [1, 2, 3]]})
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 5, "fields": json.loads(fields)}))
    assert run(tmp_path, "bracket", "--config", str(cfg)) == cli.EXIT_OK
    rows = list(csv.DictReader(open(next((tmp_path / "bracket-5").glob("*.csv")))))
    assert rows


def test_seed_is_mandatory(tmp_path):
    assert run(tmp_path, "bracket") == cli.EXIT_INPUT
    assert run(tmp_path, "bracket", "--seed", "-1") == cli.EXIT_INPUT


def test_unknown_key_is_rejected(tmp_path):
    assert run(tmp_path, "simulate", "--seed", "1", "pathz=10") == cli.EXIT_INPUT
    assert run(tmp_path, "simulate", "--seed", "1", "kde.width=1") == cli.EXIT_INPUT
    assert run(tmp_path, "simulate", "--seed", "1", "paths") == cli.EXIT_INPUT


def test_bad_values_are_input_errors(tmp_path):
    assert run(tmp_path, "simulate", "--seed", "1", "scenario=\"nope\"") == cli.EXIT_INPUT
    assert run(tmp_path, "simulate", "--seed", "1", "x0=[1, 2, 3]") == cli.EXIT_INPUT
    assert run(tmp_path, "bracket", "--seed", "1", "--threads", "0") == cli.EXIT_INPUT
    man = json.loads((tmp_path / "simulate-1" / "manifest.json").read_text())
    assert man["status"] == "input error" and man["error"]


def test_usage_errors_exit_3(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["nosuchcommand", "--seed", "1"])
    assert e.value.code == cli.EXIT_INPUT


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_explosion_is_numeric_abort(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "geometric", "params": {"x0": 1e308}, "paths": 100, "N": 16}))
    assert run(tmp_path, "simulate", "--seed", "1", "--config", str(cfg)) == cli.EXIT_NUMERIC


def test_simulate_with_kde_is_repeatable(tmp_path):
    args = ("simulate", "--seed", "3", "paths=2000", "N=16", "kde.enabled=true")
    assert run(tmp_path / "a", *args) == cli.EXIT_OK
    assert run(tmp_path / "b", *args, "--threads", "1") == cli.EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a" / "simulate-3").glob("*.csv"))
    assert names
    for n in names:
        assert (tmp_path / "a" / "simulate-3" / n).read_bytes() == (tmp_path / "b" / "simulate-3" / n).read_bytes()


def test_control_demo(tmp_path):
    assert run(tmp_path, "control-demo", "--seed", "0") == cli.EXIT_OK


def test_discrete_small(tmp_path):
    assert run(tmp_path, "discrete", "--seed", "0", "max_degree=2", "refinement=false") == cli.EXIT_OK
    man = json.loads((tmp_path / "discrete-0" / "manifest.json").read_text())
    assert man["status"] == "ok" and man["files"]


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "hormander.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "bracket" in out.stdout


def test_fmt_is_exact():
    assert IO.fmt(0.1) == "0.1" and float(IO.fmt(1 / 3)) == 1 / 3
    assert IO.fmt(float("inf")) == "inf" and IO.fmt(float("nan")) == "nan" and IO.fmt(True) == "true"
