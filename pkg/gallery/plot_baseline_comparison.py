"""
Comparing against greedy, MPC and a throughput aging model
==========================================================

Greedy following ignores aging.  MPC sees a limited window of future
instructions.  A throughput aging model prices every kWh the same no matter
how deep the cycle is.  Here each of them is scored with the same rainflow
aging cost.
"""

from bessopt import (MarketParams, ThroughputModel, degradation_of_profile, generate_signal,
                     run_greedy, run_mpc, run_policy, solve_offline, solve_offline_throughput,
                     table2_battery)

bat = table2_battery()
tau = 1 / 60
trace = generate_signal(120, seed=5)

for price in (50, 500):
    mk = MarketParams(theta=price, pi=price, tau=tau)
    costs = {
        "threshold": run_policy(bat, mk, tau, 0.5, trace).total,
        "mpc (30)": run_mpc(bat, mk, tau, 0.5, trace, window=30).total,
        "greedy": run_greedy(bat, tau, 0.5, trace, market=mk).total,
        "offline": solve_offline(bat, mk, tau, 0.5, trace).objective,
    }
    print(f"price {price}: " + ", ".join(f"{k} {v:.2f}" for k, v in costs.items()))

# %%
# The throughput model has one price per kWh moved, ``lambda_e``.  Below it
# the battery stays idle.  Above it the battery follows every instruction,
# however deep the resulting cycles.

model = ThroughputModel(lambda_e=62.5)
for price in (50, 100):
    mk = MarketParams(theta=price, pi=price, tau=tau)
    rep = solve_offline_throughput(bat, mk, tau, 0.5, trace, model)
    run = rep.as_run(bat, tau, 0.5)
    moved = tau * (rep.schedule.c.sum() + rep.schedule.d.sum())
    print(f"price {price}: moves {moved:.1f} kWh, rainflow aging "
          f"{degradation_of_profile(bat, run.soc):.3f} $")
