import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ldfv import cli
from ldfv.model import init_params, save_checkpoint


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_vonneumann_upwind(tmp_path):
    out = tmp_path / "vn.csv"
    assert cli.main(["vonneumann", "--alpha", "0,0,0", "--co", "1", "--n-theta", "64", "-o", str(out),
                     "--svg", str(tmp_path / "vn.svg")]) == 0
    rows = list(csv.DictReader(open(out)))
    assert list(rows[0]) == ["theta", "abs_S", "arg_S", "exact_phase"] and len(rows) == 64
    np.testing.assert_allclose([float(r["abs_S"]) for r in rows], 1.0, atol=1e-14)
    assert (tmp_path / "vn_phase.svg").exists()
    assert (tmp_path / "vn.csv.resolved_config.json").exists()


def test_vonneumann_checkpoint(tmp_path):
    save_checkpoint(tmp_path / "ck", init_params(1, 1))
    out = tmp_path / "vn.csv"
    assert cli.main(["vonneumann", "--ckpt", str(tmp_path / "ck"), "--co", "0.4", "-o", str(out)]) == 0
    assert cli.main(["vonneumann", "--co", "0.4", "-o", str(out)]) == 1
    assert cli.main(["vonneumann", "--alpha", "1,2", "--co", "0.4", "-o", str(out)]) == 1


def test_simulate_sod(tmp_path):
    cfg = _write(tmp_path / "c.json", {"equation": {"kind": "euler1d"}, "bc": {"all": "supersonic_outflow"},
                                       "grid": {"counts": [64]}, "ic": {"type": "case", "case": "sod"},
                                       "simulate": {"t_end": 0.05}})
    out = tmp_path / "sim"
    assert cli.main(["simulate", str(cfg), "-o", str(out)]) == 0
    idx = json.loads((out / "index.json").read_text())
    assert idx["times"][0] == 0.0 and idx["times"][-1] == pytest.approx(0.05)
    assert (out / "final.csv").exists() and (out / "resolved_config.json").exists()
    # a zero network gives the same final state
    save_checkpoint(tmp_path / "ck", init_params(3, 1))
    out2 = tmp_path / "sim2"
    assert cli.main(["simulate", str(cfg), "--ckpt", str(tmp_path / "ck"), "-o", str(out2)]) == 0
    assert (out / "final.csv").read_text() == (out2 / "final.csv").read_text()
    # a Burgers checkpoint does not fit Euler data
    save_checkpoint(tmp_path / "ck1", init_params(1, 1))
    assert cli.main(["simulate", str(cfg), "--ckpt", str(tmp_path / "ck1"), "-o", str(tmp_path / "x")]) == 1


def test_bench_sod(tmp_path):
    out = tmp_path / "b"
    assert cli.main(["bench", "sod", "--scale", "8", "-o", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "ok" and rep["l2_density"] > 0
    assert cli.main(["bench", "nope", "-o", str(out)]) == 1


def test_data_train_pipeline(tmp_path):
    cfg = _write(tmp_path / "c.json", {"seed": 3, "dataset": {"nx": 32, "n_ic": 2, "n_steps": 4},
                                       "train": {"epochs": 1, "batch_size": 4}, "model": {"hidden": 8}})
    ds = tmp_path / "d.ldfvds"
    assert cli.main(["gen-data", str(cfg), "-o", str(ds)]) == 0
    resolved = json.loads((tmp_path / "d.ldfvds.resolved_config.json").read_text())
    assert resolved["dataset"]["seed"] == 3
    assert cli.main(["dataset", "inspect", str(ds)]) == 0
    ck = tmp_path / "ck"
    assert cli.main(["train", str(cfg), "--data", str(ds), "-o", str(ck)]) == 0
    assert (ck / "metrics.csv").exists() and (ck / "manifest.json").exists()


def test_converge_exact(tmp_path):
    cfg = _write(tmp_path / "c.json", {"equation": {"kind": "advection"},
                                       "converge": {"grids": [32, 64], "t_end": 0.25, "reference": "exact",
                                                    "dt_rule": "h2"}})
    out = tmp_path / "conv.csv"
    assert cli.main(["converge", str(cfg), "-o", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert float(rows[1]["eoc"]) > 1.7


def test_exit_codes(tmp_path):
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["simulate", str(tmp_path / "missing.json"), "-o", str(tmp_path / "o")]) == 1
    bad = _write(tmp_path / "bad.json", {"scheme": {"cfl": "fast"}})
    assert cli.main(["simulate", str(bad), "-o", str(tmp_path / "o")]) == 1
    assert cli.main(["--threads", "0", "vonneumann", "--alpha", "0,0,0", "--co", "1", "-o",
                     str(tmp_path / "v.csv")]) == 1
    # admissibility loss during a bench run is a runtime failure
    cfg = _write(tmp_path / "v.json", {"equation": {"kind": "euler1d"}, "bc": {"all": "supersonic_outflow"},
                                       "grid": {"counts": [32]},
                                       "ic": {"type": "riemann", "left": [1, -5, 0.01], "right": [1, 5, 0.01]},
                                       "scheme": {"cfl": 1.0}, "simulate": {"t_end": 0.1}})
    assert cli.main(["simulate", str(cfg), "-o", str(tmp_path / "vac")]) == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ldfv.cli", "vonneumann", "--alpha", "0,-1,1", "--co", "0.4",
                        "-o", str(tmp_path / "v.csv")], capture_output=True, text=True)
    assert r.returncode == 0 and "max |S|" in r.stdout
