import numpy as np
import pytest
from hypothesis import given, strategies as st

from bessopt import (DispatchSchedule, MarketParams, RegulationTrace, SolverConfig,
                     ThroughputModel, rainflow_cycles, run_greedy, run_mpc, run_policy,
                     solve_offline, solve_offline_throughput, table2_battery, throughput_cost)

TAU = 1 / 60


def test_lambda_e_from_case_study():
    # quoted amortization: 300,000 $ over 4.8e3 MWh of lifetime throughput
    assert 300_000 / 4.8e3 == pytest.approx(62.5)
    assert ThroughputModel().lambda_e == 62.5


def test_throughput_cost_units():
    assert throughput_cost(DispatchSchedule.zeros(3), ThroughputModel(), TAU) == 0.0
    # 1000 kW for one hour, split over charge and discharge
    sched = DispatchSchedule([500.0, 0.0], [0.0, 500.0])
    assert throughput_cost(sched, ThroughputModel(), 1.0) == pytest.approx(62.5)
    with pytest.raises(ValueError):
        ThroughputModel(-1)


def test_greedy_follows_when_possible():
    bat = table2_battery()
    trace = RegulationTrace(0.3 * np.sin(np.linspace(0, 12, 100)))
    run = run_greedy(bat, TAU, 0.5, trace, market=MarketParams())
    assert run.penalty == 0.0
    others = [run_policy(bat, MarketParams(), TAU, 0.5, trace),
              solve_offline(bat, MarketParams(), TAU, 0.5, trace).as_run(bat, TAU, 0.5)]
    assert all(run.degradation >= o.degradation - 1e-9 for o in others)


def test_greedy_saturates():
    bat = table2_battery()
    run = run_greedy(bat, TAU, 0.5, RegulationTrace(np.ones(30)))
    assert run.soc.x[-1] == pytest.approx(bat.soc_max)
    assert run.soc.x.max() <= bat.soc_max


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=60), st.floats(0, 500), st.floats(0, 500))
def test_greedy_ignores_prices(r, theta, pi):
    bat, trace = table2_battery(), RegulationTrace(r)
    a = run_greedy(bat, TAU, 0.5, trace, market=MarketParams(theta=theta, pi=pi))
    b = run_greedy(bat, TAU, 0.5, trace)
    np.testing.assert_array_equal(a.schedule.c, b.schedule.c)
    np.testing.assert_array_equal(a.schedule.d, b.schedule.d)


def test_mpc_full_window_is_the_offline_problem(rng):
    bat, mk = table2_battery(), MarketParams(theta=30, pi=30)
    trace = RegulationTrace(np.clip(rng.standard_normal(6), -1, 1))
    off = solve_offline(bat, mk, TAU, 0.5, trace)
    mpc = run_mpc(bat, mk, TAU, 0.5, trace, window=len(trace))
    assert mpc.total == pytest.approx(off.objective, rel=1e-3, abs=1e-4)


def test_mpc_one_step_cheap_prices_barely_move():
    # with theta = pi = 0.01 $/MWh, one step of following costs more aging than it saves
    bat = table2_battery()
    mk = MarketParams(theta=0.01, pi=0.01)
    trace = RegulationTrace(np.full(5, 0.8))
    run = run_mpc(bat, mk, TAU, 0.5, trace, window=1)
    assert run.schedule.c.max() < 0.02 * bat.power


def test_mpc_window_validation():
    with pytest.raises(ValueError):
        run_mpc(table2_battery(), MarketParams(), TAU, 0.5, RegulationTrace([0.1]), window=0)


def test_throughput_follows_at_high_prices():
    bat = table2_battery()
    trace = RegulationTrace(0.4 * np.sin(np.linspace(0, 9, 60)))
    rep = solve_offline_throughput(bat, MarketParams(theta=100, pi=100), TAU, 0.5, trace)
    np.testing.assert_allclose(rep.schedule.c - rep.schedule.d, trace.kw(bat), atol=1e-6)
    assert rep.penalty == pytest.approx(0.0, abs=1e-9)


def test_throughput_idles_at_low_prices_and_at_the_tie():
    bat = table2_battery()
    trace = RegulationTrace(0.4 * np.sin(np.linspace(0, 9, 60)))
    for price in (50.0, 62.5):
        rep = solve_offline_throughput(bat, MarketParams(theta=price, pi=price), TAU, 0.5, trace)
        assert not rep.schedule.c.any() and not rep.schedule.d.any()


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=40), st.floats(0, 200), st.floats(0, 200),
       st.floats(0.05, 0.95))
def test_throughput_solution_is_bang_bang_when_unconstrained(r, theta, pi, x0):
    bat = table2_battery(capacity=1e6)  # SoC limits never bind
    trace = RegulationTrace(r)
    rep = solve_offline_throughput(bat, MarketParams(theta=theta, pi=pi), TAU, x0, trace)
    y = np.abs(rep.schedule.c - rep.schedule.d)
    target = np.abs(trace.kw(bat))
    assert np.all((np.abs(y) <= 1e-6) | (np.abs(y - target) <= 1e-6))


def test_rainflow_model_avoids_deepest_cycles():
    bat = table2_battery()
    trace = RegulationTrace(0.6 * np.sign(np.sin(np.linspace(0, 6, 60))))
    mk = MarketParams(theta=100, pi=100)
    lin = solve_offline_throughput(bat, mk, TAU, 0.5, trace)
    rf = solve_offline(bat, mk, TAU, 0.5, trace)
    deep = lambda s: rainflow_cycles(s.as_run(bat, TAU, 0.5).soc).max_depth()
    assert deep(rf) < deep(lin)
