"""
From stress curve to cycle-depth thresholds
===========================================

Each cycle of depth ``u`` wears the cells by ``Phi(u)``.  Set against the
mismatch penalty, that wear gives an optimal depth ``u_hat`` for full cycles
and ``v_hat``, ``w_hat`` for half cycles.  The online controller only needs
these numbers.
"""

import numpy as np

from bessopt import (BatteryParams, MarketParams, cycle_value_functions, gap_bound, power_law,
                     stress, stress_derivative, stress_derivative_inverse, table2_battery,
                     thresholds)

model = power_law()
depths = np.array([0.1, 0.25, 0.5, 1.0])
print("Phi(u)  :", stress(model, depths))
print("Phi'(u) :", stress_derivative(model, depths))
print("inverse :", stress_derivative_inverse(model, stress_derivative(model, depths)))

# %%
# Thresholds grow with the penalty prices: when mismatch is expensive the
# battery should be willing to cycle deeper.

bat = table2_battery()
for price in (25, 50, 100, 200, 500):
    th = thresholds(MarketParams(theta=price, pi=price), bat)
    print(f"theta = pi = {price:4d} $/MWh -> u_hat = {th.u_hat:.3f}")

# %%
# The thresholds are minimizers of the per-cycle value functions, which we
# can check on a grid.

mk = MarketParams(theta=50, pi=50)
values = cycle_value_functions(mk, bat)
grid = np.linspace(0, 1, 100_001)
print("grid argmin of the full-cycle value:", grid[np.argmin(values.full(grid))],
      " u_hat:", thresholds(mk, bat).u_hat)

# %%
# Worst-case gap of the threshold policy
# --------------------------------------
# When the two penalty prices balance the efficiencies, every cycle type
# has the same optimal depth and the policy loses nothing.  Otherwise the
# half cycles are mis-sized and the loss is bounded by ``gap_bound``.

sym = BatteryParams.symmetric(0.85, capacity=250, power=1000, cell_price=300)
for theta, pi in ((50, 50), (80, 20), (20, 80)):
    print(theta, pi, "eps =", round(gap_bound(MarketParams(theta=theta, pi=pi), sym), 4))
