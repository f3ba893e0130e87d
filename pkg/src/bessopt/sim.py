"""
Experiment harness: instruction traces, configuration files, ensembles of
policy runs and result export.

Random traces use numpy's PCG64 generator.  Trial ``i`` of an experiment
seeded with ``s`` draws from ``PCG64(s ^ i)``, so any single trial can be
regenerated on its own.  Samples are standard normal and clipped (not
resampled) to ``[-1, 1]``.

Trace files are CSV with a ``t,r`` header, ``t`` a 1-based step index and
``r`` the normalized instruction.  A raw regulation export is converted by
dividing each value by the assigned regulation capacity.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import ThroughputModel, run_greedy, run_mpc, solve_offline_throughput
from .degradation import StressModel, gap_bound, thresholds
from .model import (BatteryParams, MarketParams, RegulationTrace, check_feasible,
                    degradation_of_profile)
from .offline import SolverConfig, solve_offline
from .online import run_policy
from .rainflow import cycle_endpoints

POLICIES = ("offline", "threshold", "greedy", "mpc", "throughput")


def trial_seed(seed, trial):
    return int(seed) ^ int(trial)


def generate_signal(T, seed, distribution="normal"):
    """I.i.d. instruction trace of length ``T``, deterministic per seed."""
    if T < 1:
        raise ValueError("T must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    if distribution == "normal":
        raw = rng.standard_normal(T)
    elif distribution == "uniform":
        raw = rng.uniform(-1.0, 1.0, T)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return RegulationTrace(np.clip(raw, -1.0, 1.0))


def save_trace(trace, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "r"])
        for t, r in enumerate(trace.r, start=1):
            out.writerow([t, repr(float(r))])


def load_trace(path):
    """Read a ``t,r`` CSV trace.

    Raises
    ------
    ValueError
        On a bad header, a malformed row, a value outside ``[-1, 1]`` or a
        file with no data rows.  Row numbers count data rows from 1.
    """
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "r"]:
            raise ValueError(f"{path}: expected header 't,r', got {header}")
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: row {row_no}: expected 2 columns, got {len(row)}")
            try:
                int(row[0])
                r = float(row[1])
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: cannot parse {row}") from None
            if not (math.isfinite(r) and -1.0 <= r <= 1.0):
                raise ValueError(f"{path}: row {row_no}: value {r} outside [-1, 1]")
            values.append(r)
    if not values:
        raise ValueError(f"{path}: empty trace")
    return RegulationTrace(np.array(values))


def load_soc(path):
    """SoC points from a CSV with a ``t,x`` header (first row is ``x_0``)."""
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x"]:
            raise ValueError(f"{path}: expected header 't,x', got {header}")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                values.append(float(row[1]))
            except (IndexError, ValueError):
                raise ValueError(f"{path}: row {row_no}: cannot parse {row}") from None
    if not values:
        raise ValueError(f"{path}: empty SoC profile")
    return np.array(values)


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an ensemble of policy runs.

    ``trace_path`` replaces the generated traces with one file-backed trace
    (and a single trial).  ``mpc_window`` and ``lambda_e`` only matter when
    the ``mpc`` and ``throughput`` policies are selected.
    """

    battery: BatteryParams = field(default_factory=BatteryParams)
    market: MarketParams = field(default_factory=MarketParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    x0: float = 0.5
    steps: int = 100
    seed: int = 0
    distribution: str = "normal"
    trace_path: str | None = None
    policies: tuple = ("offline", "threshold")
    trials: int = 1
    mpc_window: int = 60
    lambda_e: float = 62.5
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.policies:
            raise ValueError("select at least one policy")
        unknown = set(self.policies) - set(POLICIES)
        if unknown:
            raise ValueError(f"unknown policies {sorted(unknown)}; choose from {POLICIES}")
        if self.mpc_window < 1:
            raise ValueError("mpc_window must be at least 1")

    @property
    def tau(self):
        return self.market.tau


def _build(cls, data, section):
    data = dict(data or {})
    names = {f.name for f in fields(cls)}
    extra = set(data) - names
    if extra:
        raise ValueError(f"unknown keys in '{section}': {sorted(extra)}")
    return data


def config_from_dict(data):
    """Build an :class:`ExperimentConfig` from the nested JSON layout.

    Sections are ``battery``, ``market``, ``solver`` and ``experiment``.
    Missing fields take the defaults documented on each dataclass.
    """
    unknown = set(data) - {"battery", "market", "solver", "experiment"}
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")
    bat = _build(BatteryParams, data.get("battery"), "battery")
    if "stress" in bat:
        bat["stress"] = StressModel(**bat["stress"])
    battery = BatteryParams(**bat)
    market = MarketParams(**_build(MarketParams, data.get("market"), "market"))
    sol = _build(SolverConfig, data.get("solver"), "solver")
    if "barrier_weights" in sol:
        sol["barrier_weights"] = tuple(float(v) for v in sol["barrier_weights"])
    solver = SolverConfig(**sol)
    exp = dict(data.get("experiment") or {})
    allowed = {f.name for f in fields(ExperimentConfig)} - {"battery", "market", "solver"}
    extra = set(exp) - allowed
    if extra:
        raise ValueError(f"unknown keys in 'experiment': {sorted(extra)}")
    if "policies" in exp:
        exp["policies"] = tuple(exp["policies"])
    return ExperimentConfig(battery=battery, market=market, solver=solver, **exp)


def config_to_dict(config):
    exp = {f.name: getattr(config, f.name) for f in fields(config)
           if f.name not in ("battery", "market", "solver")}
    exp["policies"] = list(config.policies)
    solver = asdict(config.solver)
    solver["barrier_weights"] = list(solver["barrier_weights"])
    return {"battery": asdict(config.battery), "market": asdict(config.market),
            "solver": solver, "experiment": exp}


def load_config(path):
    with open(path) as fh:
        return config_from_dict(json.load(fh))


# ---------------------------------------------------------------- running

def run_one(policy, config, trace):
    """Run a single policy on one trace and return its :class:`RunResult`."""
    bat, mk, tau, x0 = config.battery, config.market, config.tau, config.x0
    if policy == "offline":
        return solve_offline(bat, mk, tau, x0, trace, config.solver).as_run(bat, tau, x0)
    if policy == "threshold":
        return run_policy(bat, mk, tau, x0, trace)
    if policy == "greedy":
        return run_greedy(bat, tau, x0, trace, market=mk)
    if policy == "mpc":
        return run_mpc(bat, mk, tau, x0, trace, config.mpc_window, config.solver)
    if policy == "throughput":
        model = ThroughputModel(config.lambda_e)
        rep = solve_offline_throughput(bat, mk, tau, x0, trace, model)
        run = rep.as_run(bat, tau, x0, policy="throughput")
        # score it with the same rainflow aging as every other policy
        run.info["throughput_cost"] = run.degradation
        run.degradation = degradation_of_profile(bat, run.soc)
        return run
    raise ValueError(f"unknown policy {policy!r}")


def _traces(config):
    if config.trace_path is not None:
        return [load_trace(config.trace_path)]
    return [generate_signal(config.steps, trial_seed(config.seed, i), config.distribution)
            for i in range(config.trials)]


def run_experiment(config, keep_runs=False):
    """Run every selected policy on every trial trace and aggregate.

    Returns
    -------
    dict
        ``config`` echo, per-policy means, per-trial totals and, when both
        ``offline`` and ``threshold`` ran, the observed gaps next to the
        theoretical bound.  With ``keep_runs`` the raw ``(trial, policy,
        RunResult, trace)`` tuples are added under ``"runs"``.
    """
    traces = _traces(config)
    per_trial, runs = [], []
    for i, trace in enumerate(traces):
        record = {"trial": i, "seed": trial_seed(config.seed, i), "steps": len(trace)}
        results = {}
        for policy in config.policies:
            try:
                res = run_one(policy, config, trace)
            except Exception as exc:
                raise RuntimeError(f"trial {i}, policy {policy}: {exc}") from exc
            report = check_feasible(config.battery, config.tau, config.x0, res.schedule)
            if not report.ok:
                v = report.violations[0]
                raise RuntimeError(f"trial {i}, policy {policy}: infeasible ({v.kind} at step {v.t})")
            results[policy] = res
            runs.append((i, policy, res, trace))
        if "offline" in results:
            for policy, res in results.items():
                if policy != "offline":
                    res.gap_to_offline = res.total - results["offline"].total
        record["results"] = {p: _run_summary(r) for p, r in results.items()}
        per_trial.append(record)

    summary = {"config": config_to_dict(config), "trials": per_trial, "policies": {}}
    for policy in config.policies:
        rows = [t["results"][policy] for t in per_trial]
        summary["policies"][policy] = {
            key: float(np.mean([r[key] for r in rows]))
            for key in ("total", "penalty", "degradation", "wall_time")
        }
    summary["capacity_payment"] = config.market.capacity_payment
    th = thresholds(config.market, config.battery)
    summary["thresholds"] = {"u_hat": th.u_hat, "v_hat": th.v_hat, "w_hat": th.w_hat}
    summary["gap_bound"] = gap_bound(config.market, config.battery)
    if {"offline", "threshold"} <= set(config.policies):
        gaps = [t["results"]["threshold"]["gap_to_offline"] for t in per_trial]
        summary["max_gap"] = float(max(gaps))
        summary["min_gap"] = float(min(gaps))
    if keep_runs:
        summary["runs"] = runs
    return summary


def _run_summary(res):
    out = {"total": res.total, "penalty": res.penalty, "degradation": res.degradation,
           "wall_time": res.wall_time}
    if res.gap_to_offline is not None:
        out["gap_to_offline"] = res.gap_to_offline
    return out


# ---------------------------------------------------------------- export

def cumulative_costs(res, trace, battery, market):
    """Running penalty and running degradation after each step, in $."""
    g = res.schedule.grid_power() - trace.kw(battery)
    per_step = market.tau * (market.theta * np.maximum(-g, 0.0)
                             + market.pi * np.maximum(g, 0.0)) / 1000.0
    points = res.soc.points()
    model = battery.stress
    scale = battery.capacity * battery.cell_price
    deg = np.empty(len(trace))
    for t in range(1, len(points)):
        p = points[:t + 1]
        full, residue = cycle_endpoints(p)
        loss = float(np.sum(model(np.abs(p[full[:, 1]] - p[full[:, 0]])))) if len(full) else 0.0
        if len(residue) > 1:
            loss += 0.5 * float(np.sum(model(np.abs(np.diff(p[residue])))))
        deg[t - 1] = loss * scale
    return np.cumsum(per_step), deg


def write_run_csv(res, trace, battery, market, path):
    cum_pen, cum_deg = cumulative_costs(res, trace, battery, market)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "r", "c", "d", "x", "cum_penalty", "cum_degradation"])
        for t in range(len(trace)):
            out.writerow([t + 1, repr(float(trace.r[t])), repr(float(res.schedule.c[t])),
                          repr(float(res.schedule.d[t])), repr(float(res.soc.x[t])),
                          repr(float(cum_pen[t])), repr(float(cum_deg[t]))])


def save_results(summary, out_dir, battery=None, market=None):
    """Write ``summary.json`` and, for kept runs, one CSV per run into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = summary.get("runs", [])
    body = {k: v for k, v in summary.items() if k != "runs"}
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written = [out_dir / "summary.json"]
    if runs and (battery is None or market is None):
        raise ValueError("battery and market are needed to export run CSVs")
    for trial, policy, res, trace in runs:
        path = out_dir / f"trial{trial:03d}_{policy}.csv"
        write_run_csv(res, trace, battery, market, path)
        written.append(path)
    return written
