"""
Battery dispatch for pay-for-performance frequency regulation with
rainflow-based cycle aging.
"""

from .baselines import (ThroughputModel, run_greedy, run_mpc, solve_offline_throughput,
                        throughput_cost)
from .degradation import (CycleValues, StressModel, Thresholds, cycle_value_functions,
                          degradation_cost, gap_bound, life_loss, power_law, stress,
                          stress_derivative, stress_derivative_inverse, thresholds)
from .model import (BatteryParams, DispatchSchedule, FeasibilityReport, MarketParams,
                    RegulationTrace, RunResult, SoCProfile, Violation, check_feasible,
                    degradation_of_profile, mismatch_penalty, soc_from_dispatch,
                    table2_battery, total_objective)
from .offline import (SolveReport, SolverConfig, brute_force_oracle, degradation_gradient,
                      solve_offline, subgradient)
from .online import ControllerState, init_controller, run_policy, step
from .rainflow import (CycleDecomposition, cycle_endpoints, extract_extrema, rainflow_cycles,
                       rainflow_from_dispatch, rainflow_half_cycles)
from .sim import (ExperimentConfig, config_from_dict, generate_signal, load_config, load_trace,
                  run_experiment, save_results, save_trace)

__version__ = "0.1.0"
