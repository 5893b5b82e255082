import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from discrete_ot.cli import ConfigError, RunConfig, main, parse_measure
from discrete_ot.spaces import FiniteSpace, Interval

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_config_round_trip():
    cfg = RunConfig.from_ini((CONFIGS / "shift_uniform.ini").read_text())
    again = RunConfig.from_ini(cfg.to_ini())
    assert again == cfg
    assert cfg.k_list()[-1] == 256 and cfg.t_star_map()(0.0) == 0.5


def test_parse_measure_mixture():
    m = parse_measure("0.5*delta(-2) + 0.5*uniform(-1,0)", Interval(-2, 0))
    assert m.atoms == ((-2.0, 0.5),)
    assert m.densities == ((-1.0, 0.0, 0.5),)
    with pytest.raises(ConfigError):
        parse_measure("0.5*gauss(0,1)", Interval(0, 1))
    with pytest.raises(ConfigError):
        parse_measure("0.4*uniform(0,1)", Interval(0, 1))


def test_parse_finite_weights():
    cfg = RunConfig.from_ini((CONFIGS / "two_point.ini").read_text())
    mu = cfg.measure("mu")
    assert isinstance(mu.space, FiniteSpace) and mu.weights.tolist() == [0.3, 0.7]


@pytest.mark.parametrize("text", [
    "[problem]\ncost = nonsense\n",
    "[problem]\nmu = uniform(0,2)\n",
    "[bogus]\nx = 1\n",
    "[problem]\nunknown = 1\n",
    "[solver]\nsolver = magic\n",
    "[partition]\nk = 0\n",
    "not an ini file",
])
def test_config_errors_exit_one(tmp_path, text, capsys):
    assert main(["solve", "--config", write(tmp_path, text)]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_exits_one(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.ini")]) == 1


def test_solve_two_point(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["solve", "--config", str(CONFIGS / "two_point.ini"), "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    key, value = lines[0].split()
    assert key == "cost" and float(value) == pytest.approx(1.6, abs=1e-15)
    assert value == "%.17g" % float(value)
    doc = json.loads((out / "plan.json").read_text())
    assert doc["certificate"]["gap"] <= 1e-12
    assert (out / "plan.csv").read_text().startswith("i,j,mass")


def test_solve_with_k_override(capsys):
    assert main(["solve", "--config", str(CONFIGS / "mixed_source.ini"), "--k", "4"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("cost ") and "gap 0" in out


def test_sweep_outputs(tmp_path):
    out = tmp_path / "sweep"
    rc = main(["sweep", "--config", str(CONFIGS / "shift_uniform.ini"), "--k", "2,4,8,256",
               "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader((out / "sweep-value.csv").open()))
    assert rows[0][:6] == ["experiment", "k", "h", "cost", "gap", "bound"]
    assert [r[1] for r in rows[1:]] == ["2", "4", "8", "256"]
    summary = json.loads((out / "sweep-value.json").read_text())
    assert summary["experiment"] == "sweep-value" and "version" in summary
    assert len(summary["records"]) == 4


def test_failed_assertions_exit_three(tmp_path):
    text = (CONFIGS / "shift_uniform.ini").read_text().replace(
        "final_threshold = 0.01", "final_threshold = 1e-12")
    assert main(["sweep", "--config", write(tmp_path, text), "--k", "2,4"]) == 3


def test_map_sweep_via_config(tmp_path):
    text = (CONFIGS / "shift_uniform.ini").read_text().replace(
        "sweep = value", "sweep = map").replace("final_threshold = 0.01", "final_threshold = 0.05")
    assert main(["sweep", "--config", write(tmp_path, text), "--k", "8,16,32", "--jobs", "2"]) == 0


def test_metrics_command(capsys):
    assert main(["metrics", "--config", str(CONFIGS / "shift_uniform.ini"), "--k", "16"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    names = [r[0] for r in rows[1:]]
    assert names[:4] == ["cost", "d_2", "disc_2", "osc_2"]


def test_example_command(tmp_path):
    assert main(["example", "ex33", "--k", "5,10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ex33.csv").exists() and (tmp_path / "ex33.json").exists()
    assert main(["example", "sharpness", "--seed", "1"]) == 0
    assert main(["example", "nope"]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "discrete_ot", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()


@pytest.mark.parametrize("name,cost", [("ex33", 1.0), ("trivial", 0.7), ("two_point", 1.6)])
def test_solve_configs_print_expected_cost(name, cost, capsys, tmp_path):
    assert main(["solve", "--config", str(CONFIGS / f"{name}.ini"), "--out", str(tmp_path)]) == 0
    value = float(capsys.readouterr().out.splitlines()[0].split()[1])
    assert value == pytest.approx(cost, abs=1e-12)


def test_sweep_csv_is_reproducible(tmp_path):
    args = ["sweep", "--config", str(CONFIGS / "shift_uniform.ini"), "--k", "2,4,8", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "sweep-value.csv").read_bytes() == \
        (tmp_path / "b" / "sweep-value.csv").read_bytes()


def test_exit_code_matches_summary(tmp_path):
    main(["example", "ex51", "--k", "8,16", "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "ex51.json").read_text())
    assert all(a["passed"] for r in doc["records"] for a in r["assertions"])
    assert all(r["pass"] for r in doc["records"])
