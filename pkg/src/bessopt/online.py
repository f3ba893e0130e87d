"""
Online threshold controller.

The controller tracks the highest and lowest SoC seen so far and keeps the
battery inside a band of width ``u_hat`` anchored at those watermarks.  Inside
the band it follows the instruction; at the band edge it stops.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .degradation import thresholds
from .model import (DispatchSchedule, RunResult, SoCProfile, degradation_of_profile,
                    mismatch_penalty)


@dataclass(frozen=True)
class ControllerState:
    u_hat: float
    x_max: float
    x_min: float
    upper: float
    lower: float


def _bounds(battery, u_hat, x_max, x_min):
    upper = min(battery.soc_max, x_min + u_hat)
    lower = max(battery.soc_min, x_max - u_hat)
    return upper, lower


def init_controller(battery, market, x0, u_hat=None):
    """Fresh controller state with both watermarks at ``x0``."""
    if not battery.soc_min <= x0 <= battery.soc_max:
        raise ValueError(f"x0={x0} outside [{battery.soc_min}, {battery.soc_max}]")
    if u_hat is None:
        u_hat = thresholds(market, battery).u_hat
    upper, lower = _bounds(battery, u_hat, x0, x0)
    return ControllerState(u_hat, x0, x0, upper, lower)


def step(state, battery, tau, x_t, r_t):
    """One control decision.

    Watermarks and band are refreshed from the observed SoC first, then the
    instruction ``r_t`` (kW, charging positive) is followed as far as the band
    allows.

    Returns
    -------
    c_t, d_t : float
        Charge and discharge power in kW.
    state : ControllerState
    """
    x_max = max(state.x_max, x_t)
    x_min = min(state.x_min, x_t)
    upper, lower = _bounds(battery, state.u_hat, x_max, x_min)
    state = replace(state, x_max=x_max, x_min=x_min, upper=upper, lower=lower)
    if r_t >= 0:
        room = battery.capacity / (tau * battery.eta_c) * (upper - x_t)
        return max(0.0, min(room, r_t, battery.power)), 0.0, state
    room = battery.capacity * battery.eta_d / tau * (x_t - lower)
    return 0.0, max(0.0, min(room, -r_t, battery.power)), state


def run_policy(battery, market, tau, x0, trace, u_hat=None):
    """Closed-loop rollout of the threshold controller over a whole trace."""
    start = time.perf_counter()
    state = init_controller(battery, market, x0, u_hat)
    r = trace.kw(battery)
    T = len(r)
    c, d, x = np.zeros(T), np.zeros(T), np.zeros(T)
    gain, loss = battery.charge_gain(tau), battery.discharge_loss(tau)
    x_t = float(x0)
    for t in range(T):
        c[t], d[t], state = step(state, battery, tau, x_t, r[t])
        x_t = x_t + gain * c[t] - loss * d[t]
        x[t] = x_t
    sched = DispatchSchedule(c, d)
    soc = SoCProfile(float(x0), x)
    return RunResult(
        policy="threshold",
        schedule=sched,
        soc=soc,
        penalty=mismatch_penalty(sched, trace, _with_tau(market, tau), battery),
        degradation=degradation_of_profile(battery, soc),
        wall_time=time.perf_counter() - start,
        info={"u_hat": state.u_hat},
    )


def _with_tau(market, tau):
    return market if market.tau == tau else replace(market, tau=tau)
