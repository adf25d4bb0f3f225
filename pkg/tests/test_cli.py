import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bminimal import cli

FAST = {
    "verify": {"task": "verify"},
    "solve1d": {"task": "solve1d", "n": 100, "boundary": [1.0151232831406596, 1.0151232831406596]},
    "solve2d": {"task": "solve2d", "m": [15, 15], "boundary": "-log(cos(x1))"},
    "stability": {"task": "stability", "epsilon": 0.1, "m": 200, "n_grid": 400, "battery_size": 20,
                  "riccati_initial": "jacobi"},
    "flow": {"task": "flow", "n": 60, "t_end": 0.02},
    "variation": {"task": "variation", "ns": [50, 100]},
}

CSV_NAMES = {
    "verify": ["verify.csv"],
    "solve1d": ["solve1d.csv"],
    "solve2d": ["solve2d.csv"],
    "stability": ["eigen.csv", "stability.csv"],
    "flow": ["flow.csv"],
    "variation": ["variation.csv"],
}

HEADERS = {
    "verify.csv": ["n", "h", "el_residual", "geometric_residual", "I"],
    "solve1d.csv": ["x", "y", "residual"],
    "solve2d.csv": ["x1", "x2", "y", "residual"],
    "eigen.csv": ["m", "lambda_min"],
    "stability.csv": ["x", "p", "f", "v", "phi"],
    "flow.csv": ["t", "x", "y"],
    "variation.csv": ["n", "I", "delta1_err", "delta2_err"],
}


def _run(cfg, out):
    return cli.run(dict(cfg), str(out))


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.mark.parametrize("task", list(FAST))
def test_task_outputs(task, tmp_path):
    assert _run(FAST[task], tmp_path) == 0
    result = json.loads((tmp_path / "result.json").read_text())
    assert result["task"] == task and result["exit_code"] == 0
    for name in CSV_NAMES[task]:
        with open(tmp_path / name) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == HEADERS[name]
        assert len(rows) > 1 and all(len(r) == len(rows[0]) for r in rows)


def test_verify_ratios(tmp_path):
    _run(FAST["verify"], tmp_path)
    result = json.loads((tmp_path / "result.json").read_text())
    assert result["ns"] == [100, 200, 400]
    assert all(3.5 <= r <= 4.5 for r in result["el_ratios"] + result["geometric_ratios"])


def test_solve1d_result_fields(tmp_path):
    _run(FAST["solve1d"], tmp_path)
    result = json.loads((tmp_path / "result.json").read_text())
    assert result["solve"]["status"] == "converged"
    assert result["recomputed_residual_sup"] <= 1e-8
    assert result["grim_reaper_sup_error"] <= 5 * result["h"] ** 2


def test_stability_default_start_reports_numerical_failure(tmp_path):
    cfg = dict(FAST["stability"], riccati_initial="neumann")
    assert _run(cfg, tmp_path) == 3
    result = json.loads((tmp_path / "result.json").read_text())
    assert result["riccati_positive"] is False
    assert result["completing_square_residual"] is None
    assert result["lambda_min"] >= -1e-4


def test_stability_jacobi_start(tmp_path):
    _run(FAST["stability"], tmp_path)
    result = json.loads((tmp_path / "result.json").read_text())
    assert result["riccati_positive"] is True
    assert result["battery_min_gap"] >= -1e-8
    assert result["completing_square_residual"] < 1e-3


def test_not_converged_exit_code(tmp_path):
    cfg = dict(FAST["solve1d"], tolerances={"max_iter": 1})
    assert _run(cfg, tmp_path) == 2
    assert json.loads((tmp_path / "result.json").read_text())["solve"]["status"] == "max_iter"


@pytest.mark.parametrize("cfg", [
    {"task": "verify", "B": "y +* 2"},
    {"task": "solve1d", "n": 50, "boundary": [0, 0], "B": "q*y"},
    {"task": "nope"},
    {"task": "flow", "n": 60, "dt": 1.0},
    {"task": "verify", "interval": [-2.0, 2.0]},
    {"task": "flow", "interval": ["a", 1.0]},
    {"task": "solve2d", "boundary": "x1", "B": "2*y"},
    {"task": "stability", "riccati_initial": "other"},
])
def test_config_errors_write_nothing(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert _run(cfg, out) == 1
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


def test_missing_output_dir(capsys):
    assert cli.run({"task": "verify"}) == 1


def test_csv_values_round_trip(tmp_path):
    _run(FAST["solve1d"], tmp_path)
    lines = (tmp_path / "solve1d.csv").read_text().splitlines()[1:]
    for line in lines:
        for tok in line.split(","):
            assert cli.fmt(float(tok)) == tok


@pytest.mark.parametrize("task", list(FAST))
def test_byte_reproducible(task, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run(FAST[task], a)
    _run(FAST[task], b)
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    for name in names:
        assert _read(a / name) == _read(b / name)


def test_main_entry_point(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(FAST["variation"]))
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "bminimal", "--config", str(cfg), "--out", str(out), "--quiet"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "variation.csv").exists()


def test_main_bad_json(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text("{not json")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_output_dir_from_config(tmp_path):
    out = tmp_path / "from_cfg"
    assert cli.run(dict(FAST["variation"], output_dir=str(out))) == 0
    assert np.isfinite(json.loads((out / "result.json").read_text())["I"][0])
