"""
Comparison controllers: a greedy signal follower, a perfect-forecast MPC
and an offline optimizer that prices aging by energy throughput.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import (DispatchSchedule, RunResult, SoCProfile, degradation_of_profile,
                    mismatch_penalty, soc_from_dispatch)
from .offline import SolveReport, SolverConfig, _market_tau, solve_offline


@dataclass(frozen=True)
class ThroughputModel:
    """Linear aging: every MWh moved in or out costs ``lambda_e`` dollars."""

    lambda_e: float = 62.5

    def __post_init__(self):
        if self.lambda_e < 0:
            raise ValueError("lambda_e must be nonnegative")


def throughput_cost(sched, model, tau):
    """Aging cost in $ under the throughput model."""
    return model.lambda_e * tau * float(np.sum(sched.c) + np.sum(sched.d)) / 1000.0


def _result(policy, battery, market, tau, x0, trace, c, d, start, **info):
    sched = DispatchSchedule(c, d)
    soc = soc_from_dispatch(battery, tau, x0, sched)
    return RunResult(
        policy=policy,
        schedule=sched,
        soc=soc,
        penalty=mismatch_penalty(sched, trace, _market_tau(market, tau), battery),
        degradation=degradation_of_profile(battery, soc),
        wall_time=time.perf_counter() - start,
        info=info,
    )


def run_greedy(battery, tau, x0, trace, market=None):
    """Follow the instruction as closely as power and SoC limits allow.

    The actions never depend on prices; ``market`` is only used to price the
    result and defaults to zero penalties.
    """
    start = time.perf_counter()
    if not battery.soc_min <= x0 <= battery.soc_max:
        raise ValueError(f"x0={x0} outside [{battery.soc_min}, {battery.soc_max}]")
    market = market if market is not None else _zero_market(tau)
    r = trace.kw(battery)
    T = len(r)
    c, d = np.zeros(T), np.zeros(T)
    gain, loss = battery.charge_gain(tau), battery.discharge_loss(tau)
    x = float(x0)
    for t in range(T):
        if r[t] > 0:
            c[t] = max(0.0, min(r[t], battery.power, (battery.soc_max - x) / gain))
        elif r[t] < 0:
            d[t] = max(0.0, min(-r[t], battery.power, (x - battery.soc_min) / loss))
        x = min(battery.soc_max, max(battery.soc_min, x + gain * c[t] - loss * d[t]))
    return _result("greedy", battery, market, tau, x0, trace, c, d, start)


def _zero_market(tau):
    from .model import MarketParams
    return MarketParams(theta=0.0, pi=0.0, tau=tau)


def run_mpc(battery, market, tau, x0, trace, window, config=None):
    """Receding-horizon control with a perfect forecast of the next ``window`` steps.

    Each step solves the offline problem over the window only, with no
    terminal value on the SoC, and applies the first action.  Consecutive
    solves are warm started from the shifted previous plan.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    start = time.perf_counter()
    config = config or SolverConfig()
    r = trace.kw(battery)
    T = len(r)
    c, d = np.zeros(T), np.zeros(T)
    gain, loss = battery.charge_gain(tau), battery.discharge_loss(tau)
    x = float(x0)
    plan = None
    for t in range(T):
        sub = trace.window(t, min(T, t + window))
        warm = None
        if plan is not None:
            warm = _shift_plan(plan, sub, battery)
        try:
            rep = solve_offline(battery, market, tau, x, sub, config, y0=warm)
        except ValueError as exc:
            raise ValueError(f"MPC solve failed at step {t + 1}: {exc}") from exc
        c[t], d[t] = rep.schedule.c[0], rep.schedule.d[0]
        plan = rep.schedule
        x = min(battery.soc_max, max(battery.soc_min, x + gain * c[t] - loss * d[t]))
    return _result("mpc", battery, market, tau, x0, trace, c, d, start, window=window)


def _shift_plan(plan, sub, battery):
    # previous plan minus its first step, padded with zero for the new tail
    g = np.append(plan.c[1:] - plan.d[1:], 0.0)[:len(sub)]
    r = sub.kw(battery)
    return np.abs(g[r != 0])


def solve_offline_throughput(battery, market, tau, x0, trace, model=None):
    """Minimize mismatch penalty plus throughput cost over the whole trace.

    This is a linear program in the clipped powers.  Steps whose penalty price
    does not exceed ``lambda_e`` are fixed at zero, so ties resolve to idling.
    """
    model = model or ThroughputModel()
    start = time.perf_counter()
    if not battery.soc_min <= x0 <= battery.soc_max:
        raise ValueError(f"x0={x0} outside [{battery.soc_min}, {battery.soc_max}]")
    r = trace.kw(battery)
    T = len(r)
    charge = r > 0
    price = np.where(charge, market.theta, market.pi)
    ub = np.minimum(np.abs(r), battery.power)
    ub = np.where(price > model.lambda_e, ub, 0.0)
    # objective per kW: lambda_e - price (times tau/1000); constant penalty dropped
    cost = (model.lambda_e - price) * tau / 1000.0
    k = np.where(charge, battery.charge_gain(tau), -battery.discharge_loss(tau))
    lower = np.tril(np.ones((T, T))) * k
    A = np.vstack([lower, -lower])
    b = np.concatenate([np.full(T, battery.soc_max - x0), np.full(T, x0 - battery.soc_min)])
    res = linprog(cost, A_ub=A, b_ub=b, bounds=list(zip(np.zeros(T), ub)), method="highs")
    if res.status != 0:
        raise RuntimeError(f"throughput LP failed: {res.message}")
    y = np.clip(res.x, 0.0, ub)
    y[np.abs(y) < 1e-9 * battery.power] = 0.0
    sched = DispatchSchedule(np.where(charge, y, 0.0), np.where(charge, 0.0, y))
    penalty = mismatch_penalty(sched, trace, _market_tau(market, tau), battery)
    aging = throughput_cost(sched, model, tau)
    return SolveReport(sched, penalty + aging, penalty, aging, [penalty + aging], res.nit,
                       True, time.perf_counter() - start)
