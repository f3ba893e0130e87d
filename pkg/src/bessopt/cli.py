"""
Command-line entry points.

Every command that produces a run writes its CSV to ``--out`` and a JSON
summary next to it (same name, ``.json`` suffix); the summary is also
printed to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import sim
from .baselines import run_greedy, run_mpc
from .degradation import gap_bound, thresholds
from .offline import solve_offline
from .online import run_policy
from .rainflow import rainflow_cycles


def _emit(summary, path=None):
    text = json.dumps(summary, indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    print(text)


def _run_summary(res, config):
    out = {"policy": res.policy, "steps": len(res.schedule), "penalty": res.penalty,
           "degradation": res.degradation, "total": res.total,
           "capacity_payment": config.market.capacity_payment, "wall_time": res.wall_time}
    out.update({k: v for k, v in res.info.items() if isinstance(v, (int, float, bool, str))})
    return out


def _write_run(res, trace, config, out):
    out = Path(out)
    sim.write_run_csv(res, trace, config.battery, config.market, out)
    _emit(_run_summary(res, config), out.with_suffix(".json"))


def cmd_gen_signal(args):
    trace = sim.generate_signal(args.steps, args.seed)
    sim.save_trace(trace, args.out)
    _emit({"steps": args.steps, "seed": args.seed, "generator": "PCG64", "out": str(args.out)})


def cmd_rainflow(args):
    dec = rainflow_cycles(sim.load_soc(args.soc))
    summary = {
        "u": dec.u.tolist(), "v": dec.v.tolist(), "w": dec.w.tolist(),
        "junctions": sorted(dec.junctions),
        "charge_index_map": {str(t): e for t, e in sorted(dec.charge_index_map.items())},
        "discharge_index_map": {str(t): e for t, e in sorted(dec.discharge_index_map.items())},
    }
    _emit(summary, args.out)


def cmd_solve_offline(args):
    config = sim.load_config(args.config)
    trace = sim.load_trace(args.trace)
    rep = solve_offline(config.battery, config.market, config.tau, config.x0, trace, config.solver)
    res = rep.as_run(config.battery, config.tau, config.x0)
    _write_run(res, trace, config, args.out)


def cmd_run_online(args):
    config = sim.load_config(args.config)
    trace = sim.load_trace(args.trace)
    bat, mk, tau, x0 = config.battery, config.market, config.tau, config.x0
    if args.policy == "threshold":
        res = run_policy(bat, mk, tau, x0, trace)
    elif args.policy == "greedy":
        res = run_greedy(bat, tau, x0, trace, market=mk)
    else:
        window = args.window if args.window is not None else config.mpc_window
        res = run_mpc(bat, mk, tau, x0, trace, window, config.solver)
    _write_run(res, trace, config, args.out)


def cmd_gap_bound(args):
    config = sim.load_config(args.config)
    th = thresholds(config.market, config.battery)
    _emit({"u_hat": th.u_hat, "v_hat": th.v_hat, "w_hat": th.w_hat,
           "gap_bound": gap_bound(config.market, config.battery)})


def cmd_benchmark(args):
    config = sim.load_config(args.config)
    out = Path(args.out)
    config = replace(config, output=str(out))
    summary = sim.run_experiment(config, keep_runs=True)
    sim.save_results(summary, out, config.battery, config.market)
    _emit({k: v for k, v in summary.items() if k not in ("runs", "trials", "config")})


def build_parser():
    parser = argparse.ArgumentParser(prog="bessopt", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-signal", help="generate a random instruction trace")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_signal)

    p = sub.add_parser("rainflow", help="count cycles of a SoC profile")
    p.add_argument("--soc", required=True, help="CSV with header t,x")
    p.add_argument("--out", required=True, help="JSON output")
    p.set_defaults(func=cmd_rainflow)

    p = sub.add_parser("solve-offline", help="solve the full-information problem")
    p.add_argument("--config", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve_offline)

    p = sub.add_parser("run-online", help="roll out an online controller")
    p.add_argument("--policy", choices=("threshold", "greedy", "mpc"), required=True)
    p.add_argument("--window", type=int, default=None, help="MPC look-ahead in steps")
    p.add_argument("--config", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_online)

    p = sub.add_parser("gap-bound", help="thresholds and worst-case optimality gap")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_gap_bound)

    p = sub.add_parser("benchmark", help="run a configured experiment ensemble")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
