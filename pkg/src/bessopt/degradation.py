"""
Cycle-depth stress functions, cycle aging cost and the per-cycle value
functions that drive the threshold policy.

Penalty prices arrive in $/MWh and are converted to $/kWh here, so every
value function and gap constant is reported in $.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PAPER_ALPHA = 5.24e-4
PAPER_BETA = 2.03


@dataclass(frozen=True)
class StressModel:
    """Life fraction consumed by one full cycle of a given depth.

    ``kind="power_law"`` is ``alpha * u**beta``.  ``kind="exponential"`` is
    ``alpha * (exp(beta * u) - 1)``, shifted so a zero-depth cycle is free.
    """

    kind: str = "power_law"
    alpha: float = PAPER_ALPHA
    beta: float = PAPER_BETA

    def __post_init__(self):
        if self.kind not in ("power_law", "exponential"):
            raise ValueError(f"unknown stress model kind {self.kind!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.beta <= 1:
            raise ValueError("beta must exceed 1 for a strictly convex stress function")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "power_law":
            return self.alpha * np.power(u, self.beta)
        return self.alpha * np.expm1(self.beta * u)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "power_law":
            return self.alpha * self.beta * np.power(u, self.beta - 1.0)
        return self.alpha * self.beta * np.exp(self.beta * u)

    def derivative_inverse(self, y):
        """Depth at which the marginal stress equals ``y``, clamped to ``[0, 1]``."""
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise ValueError("marginal stress must be positive")
        ab = self.alpha * self.beta
        if self.kind == "power_law":
            u = np.power(y / ab, 1.0 / (self.beta - 1.0))
        else:
            u = np.log(y / ab) / self.beta
        u = np.clip(u, 0.0, 1.0)
        return float(u) if u.ndim == 0 else u


def power_law(alpha=PAPER_ALPHA, beta=PAPER_BETA):
    return StressModel("power_law", alpha, beta)


def _check_depth(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError(f"cycle depth must lie in [0, 1], got {u}")
    return u


def stress(model, u):
    """Life fraction lost to one full cycle of depth ``u``."""
    out = model(_check_depth(u))
    return float(out) if np.ndim(out) == 0 else out


def stress_derivative(model, u):
    out = model.derivative(_check_depth(u))
    return float(out) if np.ndim(out) == 0 else out


def stress_derivative_inverse(model, y):
    return model.derivative_inverse(y)


def life_loss(dec, model):
    """Total life fraction lost: full cycles count whole, residue halves count half."""
    loss = model(dec.u).sum() + 0.5 * model(dec.v).sum() + 0.5 * model(dec.w).sum()
    return float(loss)


def degradation_cost(dec, model, capacity, cell_price):
    """Cell replacement value consumed by the cycles in ``dec``, in $."""
    return life_loss(dec, model) * capacity * cell_price


@dataclass(frozen=True)
class CycleValues:
    """Net cost in $ of a single cycle, by depth.

    Each function charges the degradation of the cycle and credits the penalty
    avoided by the energy it moves, so their minimizers are the depths worth
    following the signal for.
    """

    capacity: float
    cell_price: float
    model: StressModel
    charge_price: float
    discharge_price: float

    def full(self, u):
        E, B = self.capacity, self.cell_price
        return E * B * self.model(u) - E * (self.charge_price + self.discharge_price) * np.asarray(u)

    def charge(self, v):
        E, B = self.capacity, self.cell_price
        return 0.5 * E * B * self.model(v) - E * self.charge_price * np.asarray(v)

    def discharge(self, w):
        E, B = self.capacity, self.cell_price
        return 0.5 * E * B * self.model(w) - E * self.discharge_price * np.asarray(w)


def _effective_prices(market, battery):
    # $/kWh of SoC energy: charging v needs E*v/eta_c from the grid,
    # discharging w delivers E*w*eta_d to it
    charge = market.theta / battery.eta_c / 1000.0
    discharge = market.pi * battery.eta_d / 1000.0
    return charge, discharge


def cycle_value_functions(market, battery):
    charge, discharge = _effective_prices(market, battery)
    return CycleValues(battery.capacity, battery.cell_price, battery.stress, charge, discharge)


@dataclass(frozen=True)
class Thresholds:
    u_hat: float
    v_hat: float
    w_hat: float


def _minimizer(model, marginal, cell_price):
    if marginal <= 0:
        return 0.0
    return model.derivative_inverse(marginal / cell_price)


def thresholds(market, battery):
    """Unconstrained minimizers of the full, charging and discharging cycle costs."""
    if battery.cell_price <= 0:
        raise ValueError("thresholds need a positive cell price")
    charge, discharge = _effective_prices(market, battery)
    B, model = battery.cell_price, battery.stress
    return Thresholds(
        u_hat=_minimizer(model, charge + discharge, B),
        v_hat=_minimizer(model, 2.0 * charge, B),
        w_hat=_minimizer(model, 2.0 * discharge, B),
    )


def gap_bound(market, battery, rtol=1e-12):
    """Worst-case excess cost in $ of the threshold policy over the offline optimum."""
    charge, discharge = _effective_prices(market, battery)
    if math.isclose(charge, discharge, rel_tol=rtol, abs_tol=0.0):
        return 0.0
    th = thresholds(market, battery)
    J = cycle_value_functions(market, battery)
    u, v, w = th.u_hat, th.v_hat, th.w_hat
    if discharge > charge:
        eps = J.discharge(u) + 2 * J.charge(u) - J.discharge(w) - 2 * J.charge(v)
    else:
        eps = 2 * J.discharge(u) + J.charge(u) - 2 * J.discharge(w) - J.charge(v)
    return float(eps)
