"""Command-line interface.

Subcommands:
    imde        -- print IMDE coefficient rows and the truncation as JSON
    train       -- run one training experiment from a config file
    evaluate    -- re-measure an existing checkpoint
    reproduce   -- run a quantitative table grid (desk or paper scale)
    problems    -- list the benchmark problems

Exit codes: 0 success, 2 usage error, 3 numeric/computation failure.
"""

import argparse
import json
import math
import os
import sys

from .errors import (ImdelabError, UnknownProblem, BadParams, ConfigError,
                     UnknownMethodId)
from .problems import problem, list_problems
from .integrators import TABLEAUS, LMM_SCHEMES
from .imde import (ImdeField, lmm_imde_coefficient, lmm_truncated_eval,
                   hamiltonicity_defect)
from .nn import hamiltonian_field_from_net, load_checkpoint
from .config import ExperimentConfig, load_config
from .experiments import (run_experiment, reproduce_table, write_rows,
                          RESULT_COLUMNS, learned_field, imde_target_field,
                          _probe, build_dataset)
from .discovery import error_metric, evaluate_loss

# declared orders of the named multistep schemes, for the vanish annotation
_LMM_ORDERS = {"ab2": 2, "ab3": 3, "trapezoidal": 2, "implicit-euler": 1}


def _parse_point(text):
    return tuple(float(v) for v in text.split(","))


def _parse_params(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise SystemExit(2)
        key, val = item.split("=", 1)
        out[key] = float(val)
    return out


def cmd_imde(args):
    prob = problem(args.problem, **_parse_params(args.param))
    x = _parse_point(args.point) if args.point else prob.x0
    if len(x) != prob.dim:
        print(f"point must have dimension {prob.dim}", file=sys.stderr)
        return 2
    h = args.h
    k_max = args.k
    emit = lambda obj: print(json.dumps(obj))

    if args.method in LMM_SCHEMES:
        scheme = LMM_SCHEMES[args.method]
        order = _LMM_ORDERS.get(args.method, 1)
        coeffs = [lmm_imde_coefficient(scheme, prob.field, x, k)
                  for k in range(k_max + 1)]
        trunc = lmm_truncated_eval(scheme, prob.field, x, h, k_max)
        trunc_field = lambda y: lmm_truncated_eval(scheme, prob.field, y, h, k_max)
    else:
        if args.method == "symplectic-euler":
            if prob.hamiltonian is None:
                print(f"problem {prob.name!r} has no Hamiltonian",
                      file=sys.stderr)
                return 2
            base_field = hamiltonian_field_from_net(prob.hamiltonian)
            order = 1
        else:
            if args.method not in TABLEAUS:
                print(f"unknown method {args.method!r}", file=sys.stderr)
                return 2
            base_field = prob.field
            order = TABLEAUS[args.method].order
        imf = ImdeField(base_field, args.method, K=k_max)
        coeffs = [imf.coefficient(x, k) for k in range(k_max + 1)]
        trunc = imf.truncated(x, h)
        trunc_field = imf.truncated_field(h)

    scale = max(1.0, max(abs(float(c)) for c in coeffs[0]))
    for k, ck in enumerate(coeffs):
        row = {"k": k, "f_k": [float(c) for c in ck]}
        if 1 <= k < order and max(abs(float(c)) for c in ck) <= 1e-9 * scale:
            row["note"] = f"vanishes (order-{order} method)"
        emit(row)
    emit({"K": k_max, "h": h, "f_h_K": [float(c) for c in trunc]})
    if prob.dim % 2 == 0:
        defect = hamiltonicity_defect(trunc_field, [x])
        emit({"hamiltonicity_defect": defect})
    return 0


def cmd_train(args):
    mapping = load_config(args.config)
    if args.seed is not None:
        mapping["train.seed"] = args.seed
    if args.scale:
        mapping["scale"] = args.scale
    cfg = ExperimentConfig.from_mapping(mapping)
    outdir = args.out or os.path.join("runs", cfg.run_id or "run")
    try:
        row, _, _ = run_experiment(cfg, outdir=outdir)
    except ImdelabError as exc:
        # flag whatever partial artifacts exist, then fail with exit 3
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "FAILED"), "w") as fh:
            fh.write(f"{type(exc).__name__}: {exc}\n")
        raise
    print(json.dumps(row))
    return 0


def cmd_evaluate(args):
    cfg = ExperimentConfig.from_file(args.config)
    net, _ = load_checkpoint(args.checkpoint)
    prob = cfg.resolve_problem()
    data = build_dataset(cfg, prob)
    tc = cfg.train_config()
    row = {
        "run_id": cfg.run_id or "evaluate",
        "model": cfg.model, "method": cfg.method,
        "T": cfg.data_step, "S": cfg.s, "h": cfg.h,
        "train_loss": evaluate_loss(tc, net, data),
        "test_loss": math.nan,
        "E_net_vs_f": error_metric(learned_field(cfg, net), prob.field,
                                   _probe(cfg, prob)),
        "E_net_vs_imdeK": error_metric(learned_field(cfg, net),
                                       imde_target_field(cfg, prob),
                                       _probe(cfg, prob)),
        "order": math.nan,
    }
    if args.out:
        write_rows(args.out, [row])
    print(json.dumps(row))
    return 0


def cmd_reproduce(args):
    rows = reproduce_table(args.table, scale=args.scale, outdir=args.out)
    print(",".join(RESULT_COLUMNS))
    for r in rows:
        print(",".join(str(r.get(c)) for c in RESULT_COLUMNS))
    return 0


def cmd_problems(args):
    for row in list_problems():
        print(f"{row['name']:18s} dim={row['dim']} x0={row['x0']} "
              f"T={row['data_step']} box={row['box']}")
        print(f"{'':18s} {row['equations']}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="imdelab",
                                description="inverse modified differential "
                                            "equation laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("imde", help="print IMDE coefficients at a point")
    pi.add_argument("--problem", required=True)
    pi.add_argument("--method", default="euler")
    pi.add_argument("--k", type=int, default=3)
    pi.add_argument("--point", default="")
    pi.add_argument("--h", type=float, default=0.02)
    pi.add_argument("--param", action="append",
                    help="problem parameter override, e.g. g=10")
    pi.set_defaults(func=cmd_imde)

    pt = sub.add_parser("train", help="run one experiment from a config file")
    pt.add_argument("--config", required=True)
    pt.add_argument("--seed", type=int)
    pt.add_argument("--scale", choices=("desk", "paper"))
    pt.add_argument("--out")
    pt.set_defaults(func=cmd_train)

    pe = sub.add_parser("evaluate", help="re-measure a saved checkpoint")
    pe.add_argument("--checkpoint", required=True)
    pe.add_argument("--config", required=True)
    pe.add_argument("--out")
    pe.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("reproduce", help="run a quantitative table grid")
    pr.add_argument("--table", required=True,
                    choices=("table2-euler", "table2-midpoint", "table3"))
    pr.add_argument("--scale", default="desk", choices=("desk", "paper"))
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_reproduce)

    pp = sub.add_parser("problems", help="list benchmark problems")
    pp.add_argument("action", nargs="?", default="list", choices=("list",))
    pp.set_defaults(func=cmd_problems)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnknownProblem, BadParams, ConfigError, UnknownMethodId) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ImdelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
