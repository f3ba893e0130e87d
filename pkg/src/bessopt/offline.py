"""
Offline dispatch with full knowledge of the instruction trace.

The SoC limits are relaxed with logarithmic barriers and the problem is
minimized by projected subgradient descent (the power bounds form a box and
are enforced by clipping) for an increasing sequence of barrier weights.  Degradation subgradients are computed analytically from the
rainflow decomposition: every cycle depth is the difference of two profile
points, so the chain rule runs through those points and then through the SoC
recursion (a reverse cumulative sum).

A brute-force grid search for tiny instances is included as a test oracle.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import (DispatchSchedule, RunResult, SoCProfile, degradation_of_profile,
                    mismatch_penalty, soc_from_dispatch)
from .rainflow import ATOL, _endpoints_kernel, cycle_endpoints


@dataclass(frozen=True)
class SolverConfig:
    """Barrier schedule and step rule for :func:`solve_offline`.

    ``step_base`` is the base step length ``a`` in kW (``None`` means a tenth
    of the power rating); iteration ``k`` of a stage moves a distance
    ``a / sqrt(k)``.  ``interior_margin`` is the initial power, in kW, placed
    on each instructed step.
    """

    barrier_weights: tuple = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)
    step_base: float | None = None
    max_iters: int = 20000
    tol: float = 1e-6
    patience: int = 200
    interior_margin: float = 1.0

    def __post_init__(self):
        lam = np.asarray(self.barrier_weights, dtype=float)
        if lam.size == 0 or np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
            raise ValueError("barrier weights must be positive and strictly increasing")
        if self.step_base is not None and self.step_base <= 0:
            raise ValueError("step_base must be positive")
        if self.tol <= 0 or self.max_iters < 1 or self.patience < 1:
            raise ValueError("tol, max_iters and patience must be positive")
        if self.interior_margin <= 0:
            raise ValueError("interior_margin must be positive")


@dataclass
class SolveReport:
    schedule: DispatchSchedule
    objective: float
    penalty: float
    degradation: float
    best_objective_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0

    def as_run(self, battery, tau, x0, policy="offline"):
        return RunResult(policy, self.schedule, soc_from_dispatch(battery, tau, x0, self.schedule),
                         self.penalty, self.degradation, wall_time=self.wall_time,
                         info={"iterations": self.iterations, "converged": self.converged})


def degradation_gradient(points, battery):
    """Rainflow degradation cost of a profile and its gradient in $ per unit SoC.

    ``points`` holds ``x_0 .. x_T``; the returned gradient has the same
    length.  Where the rainflow structure is locally constant this is the
    exact gradient; elsewhere it is the limit from one side, which is still a
    subgradient of the convex cost.
    """
    model = battery.stress
    scale = battery.capacity * battery.cell_price
    grad = np.zeros(len(points))
    full, residue = cycle_endpoints(points)
    cost = 0.0
    if len(full):
        i, j = full[:, 0], full[:, 1]
        _accumulate(points, i, j, 1.0, model, grad)
        cost += model(np.abs(points[j] - points[i])).sum()
    if len(residue) > 1:
        i, j = residue[:-1], residue[1:]
        _accumulate(points, i, j, 0.5, model, grad)
        cost += 0.5 * model(np.abs(points[j] - points[i])).sum()
    return scale * cost, scale * grad


def _accumulate(points, i, j, weight, model, grad):
    diff = points[j] - points[i]
    slope = weight * np.sign(diff) * model.derivative(np.abs(diff))
    np.add.at(grad, j, slope)
    np.add.at(grad, i, -slope)


def _suffix_sum(a):
    return np.cumsum(a[::-1])[::-1]


def subgradient(battery, market, tau, sched, trace, barrier_weight=None, x0=None):
    """Subgradient of the barrier-relaxed objective with respect to ``(c, d)``.

    The barrier ``-(1/lambda) * sum(log(...))`` covers ``0 < c, d < P`` and
    ``soc_min < x < soc_max``; pass ``barrier_weight=None`` for the plain
    penalty-plus-degradation objective.  ``x0`` is required with a barrier.
    Where the signal is matched exactly the penalty contributes zero, which
    lies inside its subdifferential.

    Returns
    -------
    gc, gd : ndarray
        In $ per kW.
    """
    c, d = np.asarray(sched.c, float), np.asarray(sched.d, float)
    r = trace.kw(battery)
    if len(r) != len(c):
        raise ValueError("schedule and trace lengths differ")
    gain, loss = battery.charge_gain(tau), battery.discharge_loss(tau)
    base = 0.0 if x0 is None else x0
    points = np.concatenate([[base], base + np.cumsum(gain * c - loss * d)])

    err = c - d - r
    unit = tau / 1000.0
    pen = np.where(err < 0, -market.theta * unit, np.where(err > 0, market.pi * unit, 0.0))
    _, gx = degradation_gradient(points, battery)
    if barrier_weight is not None:
        if x0 is None:
            raise ValueError("barrier gradient needs x0")
        x = points[1:]
        P = battery.power
        if (np.any(c <= 0) or np.any(c >= P) or np.any(d <= 0) or np.any(d >= P)
                or np.any(x <= battery.soc_min) or np.any(x >= battery.soc_max)):
            raise ValueError("schedule is not strictly interior; barrier undefined")
        inv = 1.0 / barrier_weight
        gx = gx.copy()
        gx[1:] += inv * (1.0 / (battery.soc_max - x) - 1.0 / (x - battery.soc_min))
        bc = inv * (1.0 / (P - c) - 1.0 / c)
        bd = inv * (1.0 / (P - d) - 1.0 / d)
    else:
        bc = bd = 0.0
    tail = _suffix_sum(gx[1:])
    gc = pen + gain * tail + bc
    gd = -pen - loss * tail + bd
    return gc, gd


@njit(cache=True)
def _stress(u, kind, alpha, beta):
    if kind == 0:
        return alpha * u ** beta
    return alpha * math.expm1(beta * u)


@njit(cache=True)
def _stress_slope(u, kind, alpha, beta):
    if kind == 0:
        return alpha * beta * u ** (beta - 1.0)
    return alpha * beta * math.exp(beta * u)


@njit(cache=True)
def _relaxed_kernel(y, active, k, price, rkw, x0, T, lo, hi, inv_lam,
                    kind, alpha, beta, scale):
    # penalty, degradation, SoC barrier value and gradient w.r.t. y;
    # inv_lam = 0 drops the barrier
    x = np.full(T + 1, x0)
    for i in range(len(active)):
        x[active[i] + 1] = k[i] * y[i]
    for t in range(1, T + 1):
        x[t] += x[t - 1]
    penalty = 0.0
    for i in range(len(y)):
        penalty += price[i] * (rkw[i] - y[i])
    full, residue = _endpoints_kernel(x, ATOL)
    gx = np.zeros(T + 1)
    deg = 0.0
    for n in range(full.shape[0]):
        i, j = full[n, 0], full[n, 1]
        diff = x[j] - x[i]
        depth = abs(diff)
        deg += _stress(depth, kind, alpha, beta)
        s = _stress_slope(depth, kind, alpha, beta)
        if diff < 0:
            s = -s
        gx[j] += s
        gx[i] -= s
    for n in range(len(residue) - 1):
        i, j = residue[n], residue[n + 1]
        diff = x[j] - x[i]
        depth = abs(diff)
        deg += 0.5 * _stress(depth, kind, alpha, beta)
        s = 0.5 * _stress_slope(depth, kind, alpha, beta)
        if diff < 0:
            s = -s
        gx[j] += s
        gx[i] -= s
    barrier = 0.0
    for t in range(T + 1):
        gx[t] *= scale
    if inv_lam > 0.0:
        acc = 0.0
        for t in range(1, T + 1):
            acc += math.log(hi - x[t]) + math.log(x[t] - lo)
            gx[t] += inv_lam * (1.0 / (hi - x[t]) - 1.0 / (x[t] - lo))
        barrier = -inv_lam * acc
    # reverse cumulative sum maps SoC gradients onto step powers
    tail = np.zeros(T + 1)
    run = 0.0
    for t in range(T, 0, -1):
        run += gx[t]
        tail[t] = run
    grad = np.empty(len(y))
    for i in range(len(y)):
        grad[i] = -price[i] + k[i] * tail[active[i] + 1]
    return penalty, scale * deg, barrier, grad


@njit(cache=True)
def _soc_interior(y, k, x0, lo, hi):
    x = x0
    for i in range(len(y)):
        x += k[i] * y[i]
        if x <= lo or x >= hi:
            return False
    return True


@njit(cache=True)
def _stage_kernel(y, inv_lam, a, max_iters, tol, patience, best_true, best_y, hist, n_hist,
                  active, k, price, rkw, ub, x0, T, lo, hi, kind, alpha, beta, scale):
    # one barrier stage of projected subgradient descent; y is updated in place
    pen, deg, bar, grad = _relaxed_kernel(y, active, k, price, rkw, x0, T, lo, hi, inv_lam,
                                          kind, alpha, beta, scale)
    stage_best = pen + deg + bar
    stage_y = y.copy()
    ref = stage_best
    last_gain = 0
    stalled = False
    n = len(y)
    direction = np.empty(n)
    trial = np.empty(n)
    for it in range(1, max_iters + 1):
        norm2 = 0.0
        for i in range(n):
            g = grad[i]
            if (y[i] <= 0.0 and g > 0.0) or (y[i] >= ub[i] and g < 0.0):
                g = 0.0
            direction[i] = g
            norm2 += g * g
        if norm2 == 0.0:
            stalled = True
            break
        step = a / math.sqrt(it) / math.sqrt(norm2)
        moved = False
        for _ in range(60):
            for i in range(n):
                trial[i] = min(max(y[i] - step * direction[i], 0.0), ub[i])
            if _soc_interior(trial, k, x0, lo, hi):
                moved = True
                break
            step *= 0.5
        if not moved:
            break
        y[:] = trial
        pen, deg, bar, grad = _relaxed_kernel(y, active, k, price, rkw, x0, T, lo, hi, inv_lam,
                                              kind, alpha, beta, scale)
        true = pen + deg
        if true < best_true:
            best_true = true
            best_y[:] = y
        hist[n_hist] = best_true
        n_hist += 1
        if true + bar < stage_best:
            stage_best = true + bar
            stage_y[:] = y
        if ref - stage_best > tol * max(abs(ref), 1e-12):
            ref = stage_best
            last_gain = it
        elif it - last_gain >= patience:
            stalled = True
            break
    y[:] = stage_y
    return best_true, n_hist, stalled


class _Relaxed:
    """Problem restricted to following the instruction partially.

    Each instructed step gets one variable ``y_t`` in ``[0, min(|r_t|, P)]``:
    charge power when ``r_t > 0``, discharge power when ``r_t < 0``.
    Over-responding never pays, so nothing is lost by the restriction, and
    complementarity holds by construction.
    """

    def __init__(self, battery, market, tau, x0, trace, soc_slack=1e-9):
        self.battery, self.x0 = battery, float(x0)
        r = trace.kw(battery)
        self.T = len(r)
        self.active = np.flatnonzero(r != 0).astype(np.int64)
        ra = r[self.active]
        self.charge = ra > 0
        self.ub = np.minimum(np.abs(ra), battery.power)
        self.rkw = np.abs(ra)
        self.k = np.where(self.charge, battery.charge_gain(tau), -battery.discharge_loss(tau))
        self.price = np.where(self.charge, market.theta, market.pi) * tau / 1000.0
        self.lo = battery.soc_min - soc_slack
        self.hi = battery.soc_max + soc_slack
        st = battery.stress
        self._model = (0 if st.kind == "power_law" else 1, st.alpha, st.beta,
                       battery.capacity * battery.cell_price)

    def points(self, y):
        delta = np.zeros(self.T)
        delta[self.active] = self.k * y
        return np.concatenate([[self.x0], self.x0 + np.cumsum(delta)])

    def interior(self, y):
        return _soc_interior(y, self.k, self.x0, self.lo, self.hi)

    def evaluate(self, y, lam):
        """Penalty, degradation, barrier-relaxed objective and its gradient."""
        inv = 0.0 if lam is None else 1.0 / lam
        pen, deg, bar, grad = _relaxed_kernel(
            y, self.active, self.k, self.price, self.rkw, self.x0, self.T,
            self.lo, self.hi, inv, *self._model)
        return pen, deg, pen + deg + bar, grad

    def true_cost(self, y):
        pen, deg, _, _ = self.evaluate(y, None)
        return pen, deg

    def run_stage(self, y, lam, a, config, best_true, best_y, hist, n_hist):
        return _stage_kernel(y, 1.0 / lam, a, config.max_iters, config.tol, config.patience,
                             best_true, best_y, hist, n_hist, self.active, self.k, self.price,
                             self.rkw, self.ub, self.x0, self.T, self.lo, self.hi, *self._model)

    def schedule(self, y):
        c, d = np.zeros(self.T), np.zeros(self.T)
        y = self._repair(y)
        c[self.active] = np.where(self.charge, y, 0.0)
        d[self.active] = np.where(self.charge, 0.0, y)
        return DispatchSchedule(c, d)

    def _repair(self, y):
        # the barrier admits SoC a hair outside the limits; trim to exact bounds
        out = np.clip(y, 0.0, self.ub)
        x = self.x0
        for i in range(len(out)):
            nxt = x + self.k[i] * out[i]
            if nxt > self.battery.soc_max:
                out[i] = max(0.0, (self.battery.soc_max - x) / self.k[i])
            elif nxt < self.battery.soc_min:
                out[i] = max(0.0, (self.battery.soc_min - x) / self.k[i])
            x = x + self.k[i] * out[i]
        return out

    def initial(self, margin):
        y = np.minimum(margin, 0.5 * self.ub)
        for _ in range(200):
            if self.interior(y):
                return y
            x = self.points(y)[1:]
            bad = (x >= self.hi) | (x <= self.lo)
            first = int(np.argmax(bad))
            # shrink every step up to the first violation
            y = np.where(self.active <= first, 0.5 * y, y)
        raise ValueError("could not find a strictly feasible starting point")


def solve_offline(battery, market, tau, x0, trace, config=None, y0=None):
    """Minimize penalty plus rainflow degradation over the whole trace.

    Parameters
    ----------
    battery : BatteryParams
    market : MarketParams
    tau : float
        Control interval in hours.
    x0 : float
        Initial SoC.
    trace : RegulationTrace
    config : SolverConfig, optional
    y0 : ndarray, optional
        Warm start: power on each instructed step.  It is clipped to the
        power bounds and ignored if it breaks the SoC limits.

    Returns
    -------
    SolveReport
    """
    config = config or SolverConfig()
    if len(trace) < 1:
        raise ValueError("empty trace")
    if not battery.soc_min <= x0 <= battery.soc_max:
        raise ValueError(f"x0={x0} outside [{battery.soc_min}, {battery.soc_max}]")
    start = time.perf_counter()
    prob = _Relaxed(battery, market, tau, x0, trace)
    if prob.active.size == 0:
        sched = DispatchSchedule.zeros(len(trace))
        return SolveReport(sched, 0.0, 0.0, 0.0, [0.0], 0, True, time.perf_counter() - start)

    y = None
    if y0 is not None:
        y = np.clip(np.asarray(y0, float), 0.0, prob.ub)
        if y.shape != prob.ub.shape or not prob.interior(y):
            y = None
    if y is None:
        y = prob.initial(config.interior_margin)
    a = 0.1 * battery.power if config.step_base is None else config.step_base

    # power bounds are handled by projection, only the SoC limits carry a barrier
    pen, deg = prob.true_cost(y)
    best_true, best_y = pen + deg, y.copy()
    hist = np.empty(len(config.barrier_weights) * config.max_iters + 1)
    hist[0] = best_true
    n_hist = 1
    converged = False
    for lam in config.barrier_weights:
        best_true, n_hist, converged = prob.run_stage(y, lam, a, config, best_true, best_y,
                                                      hist, n_hist)

    sched = prob.schedule(best_y)
    penalty = mismatch_penalty(sched, trace, _market_tau(market, tau), battery)
    degradation = degradation_of_profile(battery, soc_from_dispatch(battery, tau, x0, sched))
    return SolveReport(sched, penalty + degradation, penalty, degradation, hist[:n_hist].tolist(),
                       n_hist - 1, bool(converged), time.perf_counter() - start)


def _market_tau(market, tau):
    from dataclasses import replace
    return market if market.tau == tau else replace(market, tau=tau)


def brute_force_oracle(battery, market, tau, x0, trace, grid_levels=21):
    """Exact minimum over a grid of per-step grid powers.

    Each step offers ``grid_levels`` powers evenly spaced from idle to the
    clipped instruction ``min(|r_t|, P)`` in the instructed direction, plus
    ``grid_levels - 1`` levels up to ``P`` in the opposite direction, so a
    step has ``2 * grid_levels - 1`` options and both idling and exact
    following are always on the grid.  Each grid action is executed the way
    the battery would execute it, clipped so the SoC stays in its band, which
    puts schedules that stop exactly at a SoC limit on the grid as well.

    Returns
    -------
    objective : float
    schedule : DispatchSchedule
    """
    T = len(trace)
    if T > 4 or grid_levels > 41:
        raise ValueError("brute force limited to T <= 4 and grid_levels <= 41")
    if not battery.soc_min <= x0 <= battery.soc_max:
        raise ValueError(f"x0 = {x0} outside the SoC band")
    r = trace.kw(battery)
    per_step = []
    for r_t in r:
        sign = 1.0 if r_t >= 0 else -1.0
        follow = np.linspace(0.0, min(abs(r_t), battery.power), grid_levels)
        oppose = np.linspace(0.0, battery.power, grid_levels)[1:]
        per_step.append(np.concatenate([sign * follow, -sign * oppose]))
    grid = np.array(list(itertools.product(*per_step)), dtype=float)
    gain, loss = battery.charge_gain(tau), battery.discharge_loss(tau)
    c, d = np.maximum(grid, 0.0), np.maximum(-grid, 0.0)
    x = np.empty_like(grid)
    level = np.full(len(grid), float(x0))
    for t in range(T):
        c[:, t] = np.minimum(c[:, t], np.maximum(battery.soc_max - level, 0.0) / gain)
        d[:, t] = np.minimum(d[:, t], np.maximum(level - battery.soc_min, 0.0) / loss)
        level = np.clip(level + gain * c[:, t] - loss * d[:, t], battery.soc_min, battery.soc_max)
        x[:, t] = level
    grid = c - d
    err = grid - r
    m = _market_tau(market, tau)
    penalty = m.tau * (m.theta * np.maximum(-err, 0.0).sum(axis=1)
                       + m.pi * np.maximum(err, 0.0).sum(axis=1)) / 1000.0
    points = np.hstack([np.full((len(grid), 1), float(x0)), x])
    st = battery.stress
    deg = _grid_degradation(points, 0 if st.kind == "power_law" else 1, st.alpha, st.beta,
                            battery.capacity * battery.cell_price)
    total = penalty + deg
    best = int(np.argmin(total))
    return float(total[best]), DispatchSchedule(c[best], d[best])


@njit(cache=True)
def _grid_degradation(points, kind, alpha, beta, scale):
    out = np.empty(points.shape[0])
    for n in range(points.shape[0]):
        p = points[n]
        full, residue = _endpoints_kernel(p, 1e-12)
        acc = 0.0
        for m in range(full.shape[0]):
            acc += _stress(abs(p[full[m, 1]] - p[full[m, 0]]), kind, alpha, beta)
        for m in range(len(residue) - 1):
            acc += 0.5 * _stress(abs(p[residue[m + 1]] - p[residue[m]]), kind, alpha, beta)
        out[n] = acc * scale
    return out
