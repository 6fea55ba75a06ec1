"""Experiment orchestration: single runs, table grids, CSV artifacts.

`run_experiment` owns the full pipeline for one configuration: dataset,
training, error metrics against the true field and against the truncated
IMDE, plus checkpoint / loss-curve / phase-plot artifacts.  The table
builders reproduce the quantitative grids at `desk` scale (minutes of CPU,
halved widths, fewer updates) or `paper` scale (the original budgets).

Grid cells are independent and individually seeded; IMDELAB_THREADS > 1
runs them in worker processes, merged deterministically by cell index.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ExperimentConfig
from .discovery import (make_dataset, train, evaluate_loss, error_metric,
                        FlowProbe, DomainProbe, convergence_order)
from .imde import closed_form_field, ImdeField
from .nn import LrSchedule, hamiltonian_field_from_net, save_checkpoint
from .integrators import TABLEAUS
from .svgplot import line_plot

__all__ = ["RESULT_COLUMNS", "run_experiment", "run_cells", "table_cells",
           "reproduce_table", "write_rows", "read_rows", "attach_orders",
           "max_workers"]

RESULT_COLUMNS = ["run_id", "model", "method", "T", "S", "h",
                  "train_loss", "test_loss", "E_net_vs_f", "E_net_vs_imdeK",
                  "order"]

_CLOSED_FORM_IDS = ("euler", "implicit-euler", "midpoint", "explicit-midpoint")


def max_workers():
    try:
        return max(1, int(os.environ.get("IMDELAB_THREADS", "1")))
    except ValueError:
        return 1


def _dataset_box(cfg, prob):
    if cfg.data_box:
        return prob.extra_boxes[cfg.data_box]
    return prob.box


def build_dataset(cfg, prob, count=None, seed=None):
    count = cfg.data_count if count is None else count
    seed = cfg.data_seed if seed is None else seed
    if cfg.data_kind == "flow":
        return make_dataset(prob.field, "flow", cfg.data_step, count,
                            x0=prob.x0)
    return make_dataset(prob.field, "domain", cfg.data_step, count,
                        box=_dataset_box(cfg, prob), seed=seed)


def learned_field(cfg, net):
    """The trained model as a tuple-of-components field."""
    if cfg.model.startswith("hnn"):
        return hamiltonian_field_from_net(net)
    return net.field()


def imde_target_field(cfg, prob):
    """The truncated IMDE the trained model is expected to approximate."""
    h = cfg.h
    if cfg.model == "hnn-symplectic-euler":
        return lambda y: closed_form_field("symplectic-euler",
                                           prob.hamiltonian, y, h)
    method = cfg.method
    if cfg.model == "lmnet":
        from .integrators import LMM_SCHEMES
        from .imde import lmm_truncated_eval
        scheme = LMM_SCHEMES[method]
        return lambda y: lmm_truncated_eval(scheme, prob.field, y, h, cfg.imde_k)
    if method in _CLOSED_FORM_IDS and cfg.imde_k == 3:
        return lambda y: closed_form_field(method, prob.field, y, h)
    tab = cfg.custom_tableau or TABLEAUS[method]
    if tab.order > cfg.imde_k:
        return prob.field  # coefficients 1..K vanish for high-order methods
    imf = ImdeField(prob.field, tab, K=cfg.imde_k)
    return imf.truncated_field(h)


def _probe(cfg, prob):
    if cfg.data_kind == "flow":
        total = cfg.data_step * cfg.data_count
        return FlowProbe(prob.field, prob.x0, total,
                         mesh_per_unit=cfg.mesh_per_unit)
    return DomainProbe(_dataset_box(cfg, prob), samples=cfg.mc_samples,
                       seed=cfg.data_seed)


def _rk4_curve(field, x0, total, n_steps):
    tab = TABLEAUS["rk4"]
    from .integrators import rk_step
    dt = total / n_steps
    pts = [tuple(float(c) for c in x0)]
    for _ in range(n_steps):
        pts.append(rk_step(tab, field, pts[-1], dt))
    return np.array(pts)


def run_experiment(cfg, outdir=None):
    """Train one configuration and measure it; returns a result row."""
    prob = cfg.resolve_problem()
    data = build_dataset(cfg, prob)
    tc = cfg.train_config()
    net, curve, adam = train(tc, data)
    train_loss = curve[-1][1]

    test_loss = math.nan
    if cfg.data_kind == "domain":
        test_data = build_dataset(cfg, prob, count=100,
                                  seed=cfg.data_seed + 1000)
        test_loss = evaluate_loss(tc, net, test_data)

    g_net = learned_field(cfg, net)
    g_imde = imde_target_field(cfg, prob)
    probe = _probe(cfg, prob)
    e_f = error_metric(g_net, prob.field, probe)
    e_imde = error_metric(g_net, g_imde, probe)

    row = {
        "run_id": cfg.run_id or f"{cfg.problem_name}-{cfg.model}-{cfg.method}"
                                f"-T{cfg.data_step:g}-S{cfg.s}",
        "model": cfg.model,
        "method": cfg.method,
        "T": cfg.data_step,
        "S": cfg.s,
        "h": cfg.h,
        "train_loss": train_loss,
        "test_loss": test_loss,
        "E_net_vs_f": e_f,
        "E_net_vs_imdeK": e_imde,
        "order": math.nan,
    }
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        save_checkpoint(os.path.join(outdir, "checkpoint.json"), net, adam)
        write_loss_curve(os.path.join(outdir, "losses.csv"), curve)
        _phase_plot(os.path.join(outdir, "phase.svg"), cfg, prob,
                    g_net, g_imde)
        write_rows(os.path.join(outdir, "report.csv"), [row])
    return row, net, curve


def _phase_plot(path, cfg, prob, g_net, g_imde):
    total = min(prob.flow_time, 10.0)
    n = max(200, int(total * 100))
    series = []
    for label, fld in (("true field", prob.field),
                       ("truncated IMDE", g_imde),
                       ("learned", g_net)):
        try:
            pts = _rk4_curve(fld, prob.x0, total, n)
        except Exception:
            continue
        series.append({"x": pts[:, 0], "y": pts[:, 1], "label": label})
    line_plot(path, series, title=f"{prob.name}: phase portraits",
              xlabel="component 1", ylabel="component 2")


# -- CSV -------------------------------------------------------------------------

def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt_cell(r.get(k)) for k in RESULT_COLUMNS})


def _fmt_cell(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v


def read_rows(path):
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = dict(rec)
            for k in ("T", "h", "train_loss", "test_loss",
                      "E_net_vs_f", "E_net_vs_imdeK", "order"):
                row[k] = float(rec[k])
            row["S"] = int(rec["S"])
            out.append(row)
    return out


def write_loss_curve(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss"])
        w.writerows(curve)


def read_loss_curve(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        return [(int(step), float(loss)) for step, loss in rd]


def attach_orders(rows, column="E_net_vs_f"):
    """Fill the order column: order at step T pairs E(T) with E(T/2)."""
    by_t = {round(r["T"], 12): r for r in rows}
    for r in rows:
        half = round(r["T"] / 2, 12)
        if half in by_t:
            r["order"] = convergence_order(r[column], by_t[half][column])
    return rows


# -- table grids -----------------------------------------------------------------

def _scaled(scale, desk, paper):
    return desk if scale == "desk" else paper


def table_cells(table_id, scale="desk"):
    """Experiment configs for the quantitative tables."""
    if table_id == "table2-euler":
        return _table2_cells("damped-oscillator", "euler", scale)
    if table_id == "table2-midpoint":
        return _table2_cells("lorenz", "midpoint", scale)
    if table_id == "table3":
        return _table3_cells(scale)
    raise ValueError(f"unknown table id {table_id!r}")


def _table2_cells(problem_name, method, scale):
    cells = []
    updates = _scaled(scale, 50000, 500000)
    width = _scaled(scale, 64, 128)
    if problem_name == "damped-oscillator":
        steps = (0.02, 0.04, 0.08) if scale == "desk" \
            else (0.01, 0.02, 0.04, 0.08)
        for t_step in steps:
            cells.append(ExperimentConfig(
                problem_name=problem_name, problem_params={},
                model="odenet", method=method, h=t_step / 2, s=2,
                widths=(2, width, 2), activation="sigmoid",
                schedule=LrSchedule("exp-decay", 1e-2, 1e-5, updates),
                updates=updates, batch=2000, seed=0,
                data_kind="domain", data_step=t_step,
                data_count=_scaled(scale, 10000, 10000), data_seed=1,
                mc_samples=_scaled(scale, 100000, 1000000),
                scale=scale,
                run_id=f"table2-euler-T{t_step:g}"))
        return cells
    steps = (0.02, 0.04, 0.08)
    for t_step in steps:
        count = int(round(10.0 / t_step))
        cells.append(ExperimentConfig(
            problem_name=problem_name, problem_params={},
            model="odenet", method=method, h=t_step / 2, s=2,
            widths=(3, width, 3), activation="sigmoid",
            schedule=LrSchedule("exp-decay", 1e-2, 1e-5, updates),
            updates=updates, batch=min(500, count), seed=0,
            data_kind="flow", data_step=t_step, data_count=count,
            data_seed=1, scale=scale,
            run_id=f"table2-midpoint-T{t_step:g}"))
    return cells


def _table3_cells(scale):
    updates = _scaled(scale, 100000, 500000)
    width = _scaled(scale, 64, 128)
    count = _scaled(scale, 1024, 6000)
    cells = []
    for model, method in (("hnn-explicit", "euler"),
                          ("hnn-symplectic-euler", "symplectic-euler")):
        for box in ("space1", "space2"):
            cells.append(ExperimentConfig(
                problem_name="pendulum-hnn", problem_params={},
                model=model, method=method, h=0.1, s=1,
                widths=(2, width, width, 1), activation="tanh",
                schedule=LrSchedule("exp-decay", 1e-2, 1e-5, updates),
                updates=updates, batch=_scaled(scale, 0, 0), seed=0,
                data_kind="domain", data_step=0.1, data_count=count,
                data_seed=2, data_box=box, scale=scale,
                run_id=f"table3-{model}-{box}"))
    return cells


def _failed_row(cfg, exc):
    return {
        "run_id": f"{cfg.run_id or 'cell'} FAILED: {exc}",
        "model": cfg.model, "method": cfg.method,
        "T": cfg.data_step, "S": cfg.s, "h": cfg.h,
        "train_loss": math.nan, "test_loss": math.nan,
        "E_net_vs_f": math.nan, "E_net_vs_imdeK": math.nan,
        "order": math.nan,
    }


def _run_cell(args):
    idx, cfg, outdir = args
    sub = os.path.join(outdir, cfg.run_id) if outdir else None
    try:
        row, _, _ = run_experiment(cfg, outdir=sub)
    except Exception as exc:  # mark the cell, keep the grid going
        import sys
        print(f"cell {cfg.run_id or idx} failed: {exc}", file=sys.stderr)
        row = _failed_row(cfg, exc)
    return idx, row


def run_cells(cells, outdir=None):
    """Run grid cells, in parallel when IMDELAB_THREADS > 1, merging rows
    deterministically by cell index."""
    jobs = [(i, cfg, outdir) for i, cfg in enumerate(cells)]
    workers = min(max_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    results.sort(key=lambda pair: pair[0])
    return [row for _, row in results]


def reproduce_table(table_id, scale="desk", outdir=None):
    cells = table_cells(table_id, scale)
    rows = run_cells(cells, outdir=outdir)
    if table_id.startswith("table2"):
        attach_orders(rows)
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        write_rows(os.path.join(outdir, f"{table_id}-{scale}.csv"), rows)
    return rows
