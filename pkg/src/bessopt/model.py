"""
Battery, market and dispatch data types, SoC propagation and cost evaluation.

Units: powers in kW, energy in kWh, the control interval ``tau`` in hours,
penalty prices in $/MWh and the cell price in $/kWh.  Regulation traces are
stored normalized to ``[-1, 1]``; a positive value is a charging instruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .degradation import StressModel, degradation_cost, power_law
from .rainflow import rainflow_cycles

SOC_ATOL = 1e-9
POWER_ATOL = 1e-9


@dataclass(frozen=True)
class BatteryParams:
    """Physical and economic description of a battery.

    ``eta_c`` is the charging efficiency in ``(0, 1]`` and ``eta_d`` the
    discharging one, written as a factor ``>= 1`` (a 95 % efficient discharge
    is ``eta_d = 1/0.95``).
    """

    capacity: float = 250.0
    power: float = 1000.0
    eta_c: float = 1.0
    eta_d: float = 1.0
    soc_min: float = 0.0
    soc_max: float = 1.0
    cell_price: float = 300.0
    stress: StressModel = field(default_factory=power_law)

    def __post_init__(self):
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ValueError(f"need 0 <= soc_min < soc_max <= 1, got {self.soc_min}, {self.soc_max}")
        if self.capacity <= 0 or self.power <= 0:
            raise ValueError("capacity and power must be positive")
        if not 0.0 < self.eta_c <= 1.0:
            raise ValueError(f"eta_c must be in (0, 1], got {self.eta_c}")
        if self.eta_d < 1.0:
            raise ValueError(f"eta_d must be >= 1, got {self.eta_d}")
        if self.cell_price < 0:
            raise ValueError("cell_price must be nonnegative")

    @classmethod
    def symmetric(cls, round_trip=1.0, **kwargs):
        """Battery whose round-trip efficiency is split evenly between directions."""
        eta = float(np.sqrt(round_trip))
        return cls(eta_c=eta, eta_d=1.0 / eta, **kwargs)

    def charge_gain(self, tau):
        """SoC gained per kW of charging held for one interval."""
        return tau * self.eta_c / self.capacity

    def discharge_loss(self, tau):
        """SoC lost per kW of discharging held for one interval."""
        return tau / (self.eta_d * self.capacity)


def table2_battery(**overrides):
    """The 1 MW / 0.25 MWh lithium-ion battery used in the case studies."""
    params = dict(capacity=250.0, power=1000.0, eta_c=0.95, eta_d=1 / 0.95,
                  soc_min=0.0, soc_max=1.0, cell_price=300.0)
    params.update(overrides)
    return BatteryParams(**params)


@dataclass(frozen=True)
class MarketParams:
    """Pay-for-performance settlement terms.

    ``theta`` prices deficient demand or surplus injection (the battery ends
    up below the instructed grid power), ``pi`` prices the opposite error.
    The capacity payment is decision independent and never optimized.
    """

    theta: float = 50.0
    pi: float = 50.0
    capacity_payment: float = 0.0
    tau: float = 1.0 / 60.0

    def __post_init__(self):
        if self.theta < 0 or self.pi < 0:
            raise ValueError("penalty prices must be nonnegative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class RegulationTrace:
    """Normalized instruction signal; ``scale`` maps it to kW."""

    r: np.ndarray
    scale: float | None = None

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        if r.ndim != 1 or r.size < 1:
            raise ValueError("trace must be a nonempty 1-d sequence")
        if np.any(np.abs(r) > 1.0) or not np.all(np.isfinite(r)):
            bad = int(np.argmax(~(np.abs(r) <= 1.0)))
            raise ValueError(f"trace value {r[bad]} at step {bad} outside [-1, 1]")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    def __len__(self):
        return len(self.r)

    def kw(self, battery):
        scale = battery.power if self.scale is None else self.scale
        return self.r * scale

    def window(self, start, stop):
        return RegulationTrace(self.r[start:stop], self.scale)


@dataclass(frozen=True)
class DispatchSchedule:
    """Charge and discharge powers (kW), one entry per control step."""

    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if c.shape != d.shape or c.ndim != 1:
            raise ValueError("c and d must be 1-d arrays of equal length")
        if np.any(c < -POWER_ATOL) or np.any(d < -POWER_ATOL):
            raise ValueError("charge and discharge powers must be nonnegative")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.c)

    @classmethod
    def zeros(cls, T):
        return cls(np.zeros(T), np.zeros(T))

    @classmethod
    def from_grid_power(cls, g):
        """Split signed grid power (charging positive) into ``c`` and ``d``."""
        g = np.asarray(g, dtype=float)
        return cls(np.maximum(g, 0.0), np.maximum(-g, 0.0))

    def grid_power(self):
        return self.c - self.d


@dataclass(frozen=True)
class SoCProfile:
    x0: float
    x: np.ndarray

    def points(self):
        return np.concatenate([[self.x0], self.x])

    def __len__(self):
        return len(self.x)


@dataclass
class RunResult:
    """One rollout or solve: schedule, SoC path and cost breakdown in $."""

    policy: str
    schedule: DispatchSchedule
    soc: SoCProfile
    penalty: float
    degradation: float
    gap_to_offline: float | None = None
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.penalty + self.degradation


def soc_from_dispatch(battery, tau, x0, sched):
    """Propagate the SoC recursion.  No feasibility checks are made."""
    delta = battery.charge_gain(tau) * sched.c - battery.discharge_loss(tau) * sched.d
    return SoCProfile(float(x0), x0 + np.cumsum(delta))


@dataclass(frozen=True)
class Violation:
    kind: str
    t: int
    value: float


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def first(self, kind=None):
        for v in self.violations:
            if kind is None or v.kind == kind:
                return v
        return None


def check_feasible(battery, tau, x0, sched, atol=SOC_ATOL):
    """Report every SoC, power and simultaneous charge/discharge violation.

    Steps are reported 1-based, matching the SoC recursion.
    """
    found = []
    soc = soc_from_dispatch(battery, tau, x0, sched)
    for t, x in enumerate(soc.x, start=1):
        if x > battery.soc_max + atol:
            found.append(Violation("soc_max", t, float(x)))
        if x < battery.soc_min - atol:
            found.append(Violation("soc_min", t, float(x)))
    ptol = POWER_ATOL * battery.power
    for name, arr in (("charge_power", sched.c), ("discharge_power", sched.d)):
        for t in np.flatnonzero((arr > battery.power + ptol) | (arr < -ptol)):
            found.append(Violation(name, int(t) + 1, float(arr[t])))
    for t in np.flatnonzero((sched.c > ptol) & (sched.d > ptol)):
        found.append(Violation("simultaneous", int(t) + 1, float(min(sched.c[t], sched.d[t]))))
    found.sort(key=lambda v: (v.t, v.kind))
    return FeasibilityReport(tuple(found))


def mismatch_penalty(sched, trace, market, battery):
    """Penalty in $ for deviating from the instructed grid power.

    Grid power is ``c - d`` (charging positive).  Falling below the
    instruction costs ``theta``, exceeding it costs ``pi``; both in $/MWh.
    """
    if len(sched) != len(trace):
        raise ValueError(f"schedule has {len(sched)} steps but trace has {len(trace)}")
    err = sched.grid_power() - trace.kw(battery)
    below = np.maximum(-err, 0.0).sum()
    above = np.maximum(err, 0.0).sum()
    return market.tau * (market.theta * below + market.pi * above) / 1000.0


def degradation_of_profile(battery, profile):
    dec = rainflow_cycles(profile)
    return degradation_cost(dec, battery.stress, battery.capacity, battery.cell_price)


def total_objective(sched, trace, market, battery, x0=None):
    """Penalty, degradation and their sum for a schedule, in $.

    Power bounds and complementarity are always checked; SoC bounds only when
    ``x0`` is given, since cycle depths do not depend on the starting level.
    """
    tau = market.tau
    report = check_feasible(battery, tau, 0.0 if x0 is None else x0, sched,
                            atol=np.inf if x0 is None else SOC_ATOL)
    if not report.ok:
        v = report.violations[0]
        raise ValueError(f"infeasible schedule: {v.kind} at step {v.t} ({v.value:.6g})")
    penalty = mismatch_penalty(sched, trace, market, battery)
    degradation = degradation_of_profile(battery, soc_from_dispatch(battery, tau, 0.0, sched))
    return {"penalty": penalty, "degradation": degradation, "total": penalty + degradation}
