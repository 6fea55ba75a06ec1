"""Config parsing, CSV round trips, the CLI surface and its exit codes."""

import json
import math
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from imdelab.config import (parse_value, load_config, dump_config,
                            ExperimentConfig)
from imdelab.experiments import write_rows, read_rows, attach_orders
from imdelab.cli import main
from imdelab.errors import ConfigError

SRC = os.path.join(os.path.dirname(__file__), "..", "src")

BASE_CONFIG = """
# damped oscillator, tiny smoke run
problem.name = damped-oscillator
model.kind = odenet
method.tableau = euler
method.h = 0.02
method.s = 2
data.kind = domain
data.t = 0.04
data.count = 120
data.seed = 1
net.widths = 2,8,2
net.activation = sigmoid
train.updates = 40
train.batch = 60
train.lr = exp-decay:1e-2,1e-3
train.seed = 3
eval.mc_samples = 2000
eval.mesh_per_unit = 100
"""


def _write(tmp_path, text=BASE_CONFIG, name="exp.cfg"):
    path = os.path.join(tmp_path, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def test_parse_value_types():
    assert parse_value("3") == 3
    assert parse_value("0.25") == 0.25
    assert parse_value("euler") == "euler"
    assert parse_value("2,64,2") == [2, 64, 2]
    assert parse_value("1e-3") == 1e-3


def test_config_roundtrip(tmp_path):
    path = _write(tmp_path)
    cfg = ExperimentConfig.from_file(path)
    assert cfg.problem_name == "damped-oscillator"
    assert cfg.h == 0.02 and cfg.s == 2 and cfg.data_step == 0.04
    assert cfg.widths == (2, 8, 2)
    back = os.path.join(tmp_path, "back.cfg")
    dump_config(back, cfg.to_mapping())
    cfg2 = ExperimentConfig.from_mapping(load_config(back))
    assert cfg2 == cfg


def test_config_enforces_step_consistency(tmp_path):
    bad = BASE_CONFIG.replace("data.t = 0.04", "data.t = 0.05")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(_write(tmp_path, bad))


def test_config_custom_tableau(tmp_path):
    text = BASE_CONFIG.replace(
        "method.tableau = euler",
        "method.tableau = custom\nmethod.a = 0,0,0.5,0\nmethod.b = 0,1\n"
        "method.order = 2")
    cfg = ExperimentConfig.from_file(_write(tmp_path, text))
    assert cfg.custom_tableau.stages == 2
    assert cfg.custom_tableau.order == 2


def test_csv_roundtrip(tmp_path):
    rows = [{
        "run_id": "r1", "model": "odenet", "method": "euler",
        "T": 0.04, "S": 2, "h": 0.02, "train_loss": 1.5e-7,
        "test_loss": math.nan, "E_net_vs_f": 0.31, "E_net_vs_imdeK": 0.011,
        "order": math.nan,
    }]
    path = os.path.join(tmp_path, "rows.csv")
    write_rows(path, rows)
    back = read_rows(path)
    assert len(back) == 1
    r = back[0]
    assert r["run_id"] == "r1" and r["S"] == 2
    assert r["train_loss"] == 1.5e-7 and math.isnan(r["test_loss"])


def test_attach_orders_pairs_halved_steps():
    rows = [{"T": 0.04, "E_net_vs_f": 0.547, "order": math.nan},
            {"T": 0.02, "E_net_vs_f": 0.277, "order": math.nan},
            {"T": 0.01, "E_net_vs_f": 0.139, "order": math.nan}]
    attach_orders(rows)
    assert rows[0]["order"] == pytest.approx(math.log2(0.547 / 0.277))
    assert rows[1]["order"] == pytest.approx(0.9948, abs=5e-4)
    assert math.isnan(rows[2]["order"])


def test_cli_imde_json_rows(capsys):
    rc = main(["imde", "--problem", "pendulum", "--method", "euler",
               "--k", "1", "--point", "0,1", "--h", "0.02"])
    assert rc == 0
    lines = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
    assert lines[0]["k"] == 0
    assert lines[1]["k"] == 1
    assert lines[1]["f_k"] == pytest.approx([0.0, -5 * math.sin(1.0)])
    assert "f_h_K" in lines[2]
    assert "hamiltonicity_defect" in lines[3]


def test_cli_imde_k0_prints_field_value(capsys):
    rc = main(["imde", "--problem", "pendulum", "--method", "euler",
               "--k", "0", "--point", "0,1"])
    assert rc == 0
    lines = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
    assert lines[0]["f_k"] == pytest.approx([-10 * math.sin(1.0), 0.0])


def test_cli_imde_midpoint_flags_vanishing_row(capsys):
    rc = main(["imde", "--problem", "pendulum", "--method", "midpoint",
               "--k", "1", "--point", "0,1"])
    assert rc == 0
    lines = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
    assert lines[1]["note"] == "vanishes (order-2 method)"


def test_cli_exit_codes():
    assert main(["imde", "--problem", "no-such", "--method", "euler"]) == 2
    assert main(["imde", "--problem", "pendulum", "--method", "bogus"]) == 2
    # computation failure: implicit fixed point diverges for huge h
    assert main(["imde", "--problem", "pendulum", "--method", "implicit-euler",
                 "--k", "1", "--h", "50"]) in (0, 3)
    with pytest.raises(SystemExit) as exc:
        main(["imde"])  # missing required --problem
    assert exc.value.code == 2


def test_cli_problems_lists_names(capsys):
    assert main(["problems", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("pendulum", "lorenz", "damped-oscillator"):
        assert name in out


def test_cli_train_writes_artifacts(tmp_path):
    cfg = _write(str(tmp_path))
    out = os.path.join(str(tmp_path), "run")
    rc = main(["train", "--config", cfg, "--out", out])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "checkpoint.json"))
    assert os.path.exists(os.path.join(out, "losses.csv"))
    assert os.path.exists(os.path.join(out, "report.csv"))
    svg = os.path.join(out, "phase.svg")
    assert os.path.exists(svg)
    ET.parse(svg)  # valid XML
    rows = read_rows(os.path.join(out, "report.csv"))
    assert rows[0]["model"] == "odenet"


def test_cli_train_zero_updates_checkpoints_initial_net(tmp_path):
    text = BASE_CONFIG.replace("train.updates = 40", "train.updates = 0")
    cfg = _write(str(tmp_path), text)
    out = os.path.join(str(tmp_path), "run0")
    assert main(["train", "--config", cfg, "--out", out]) == 0
    from imdelab.nn import load_checkpoint, Mlp
    net, _ = load_checkpoint(os.path.join(out, "checkpoint.json"))
    fresh = Mlp.init((2, 8, 2), "sigmoid", seed=3)
    for a, b in zip(net.param_arrays(), fresh.param_arrays()):
        assert np.array_equal(a, b)


def test_cli_train_deterministic_rows(tmp_path):
    cfg = _write(str(tmp_path))
    rows = []
    for sub in ("a", "b"):
        out = os.path.join(str(tmp_path), sub)
        assert main(["train", "--config", cfg, "--out", out]) == 0
        rows.append(read_rows(os.path.join(out, "report.csv"))[0])
    for key in rows[0]:
        a, b = rows[0][key], rows[1][key]
        if isinstance(a, float) and math.isnan(a):
            assert math.isnan(b)
        else:
            assert a == b, key


def test_cli_evaluate_roundtrip(tmp_path):
    cfg = _write(str(tmp_path))
    out = os.path.join(str(tmp_path), "run")
    assert main(["train", "--config", cfg, "--out", out]) == 0
    rc = main(["evaluate", "--checkpoint", os.path.join(out, "checkpoint.json"),
               "--config", cfg])
    assert rc == 0


def test_config_custom_field_prefix_notation(tmp_path):
    # override the pendulum field from the config, in prefix text
    text = BASE_CONFIG.replace(
        "problem.name = damped-oscillator",
        "problem.name = pendulum\n"
        "problem.field = * * -1 / g l sin y2 ; y1\n"
        "problem.x0 = 0,1")
    cfg = ExperimentConfig.from_file(_write(str(tmp_path), text))
    prob = cfg.resolve_problem()
    assert prob.field.name == "custom"
    assert prob.x0 == (0.0, 1.0)
    import math
    base = (-10 * math.sin(1.0), 0.0)
    got = prob.field((0.0, 1.0))
    assert abs(got[0] - base[0]) <= 1e-12 and abs(got[1] - base[1]) <= 1e-12


def test_loss_curve_roundtrip(tmp_path):
    from imdelab.experiments import write_loss_curve, read_loss_curve
    curve = [(0, 1.5), (100, 0.25), (200, 1e-8)]
    path = os.path.join(str(tmp_path), "losses.csv")
    write_loss_curve(path, curve)
    assert read_loss_curve(path) == curve


def test_failed_cell_is_marked_and_grid_continues(tmp_path):
    from imdelab.experiments import run_cells
    import copy
    cfg = ExperimentConfig.from_file(_write(str(tmp_path)))
    bad = copy.deepcopy(cfg)
    bad.problem_name = "pendulum"     # step mismatch: dataset targets NaN-free
    bad.widths = (5, 4, 5)            # dimension mismatch -> cell fails
    bad.run_id = "bad"
    good = copy.deepcopy(cfg)
    good.run_id = "good"
    rows = run_cells([bad, good])
    assert "FAILED" in rows[0]["run_id"]
    assert math.isnan(rows[0]["train_loss"])
    assert rows[1]["run_id"] == "good"
    assert math.isfinite(rows[1]["train_loss"])


def test_cli_train_nonfinite_loss_writes_failure_marker(tmp_path):
    text = BASE_CONFIG.replace("train.lr = exp-decay:1e-2,1e-3",
                               "train.lr = constant:1e+25")
    cfg = _write(str(tmp_path), text, name="diverge.cfg")
    out = os.path.join(str(tmp_path), "boom")
    rc = main(["train", "--config", cfg, "--out", out])
    if rc == 3:  # diverged as intended
        assert os.path.exists(os.path.join(out, "FAILED"))
    else:       # bounded activations can keep even absurd steps finite
        assert rc == 0


def test_run_cells_parallel_matches_sequential(tmp_path, monkeypatch):
    from imdelab.experiments import run_cells
    cfg = ExperimentConfig.from_file(_write(str(tmp_path)))
    cells = []
    for i, seed in enumerate((1, 2)):
        import copy
        c = copy.deepcopy(cfg)
        c.seed = seed
        c.run_id = f"cell{i}"
        cells.append(c)
    monkeypatch.setenv("IMDELAB_THREADS", "2")
    par = run_cells(cells)
    monkeypatch.setenv("IMDELAB_THREADS", "1")
    seq = run_cells(cells)
    assert [r["run_id"] for r in par] == ["cell0", "cell1"]
    for a, b in zip(par, seq):
        assert a["train_loss"] == b["train_loss"]
        assert a["E_net_vs_f"] == b["E_net_vs_f"]


def test_cli_train_seed_override(tmp_path):
    cfg = _write(str(tmp_path))
    outs = []
    for sub, seed in (("s3", "3"), ("s4", "4")):
        out = os.path.join(str(tmp_path), sub)
        assert main(["train", "--config", cfg, "--out", out,
                     "--seed", seed]) == 0
        outs.append(read_rows(os.path.join(out, "report.csv"))[0])
    assert outs[0]["train_loss"] != outs[1]["train_loss"]


def test_cli_entrypoint_subprocess():
    env = dict(os.environ, PYTHONPATH=SRC)
    out = subprocess.run([sys.executable, "-m", "imdelab", "problems", "list"],
                         env=env, capture_output=True, text=True)
    assert out.returncode == 0
    assert "pendulum" in out.stdout
    bad = subprocess.run([sys.executable, "-m", "imdelab", "nonsense"],
                         env=env, capture_output=True, text=True)
    assert bad.returncode == 2
