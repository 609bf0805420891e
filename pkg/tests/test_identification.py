import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bisect_real_roots, plant_cubic
from pendctl.control import PidGains
from pendctl.dynamics import PendulumState, PhysicalParams
from pendctl.harness import Scenario
from pendctl.identification import (
    PAPER_POLES,
    GainSpace,
    IdentProblem,
    IdentResult,
    TuneObjective,
    TuningError,
    identify,
    nelder_mead,
    pole_residual,
    tune_gains,
)
from pendctl.linear_analysis import plant_transfer_function
from pendctl.presets import paper_matched_record


def test_residual_of_default_plant_against_target_poles(default_params):
    oracle = bisect_real_roots(plant_cubic(0.5, 0.2, 0.3, 0.006, 9.8, 0.1), -20, 20)
    hand = sum((a - b) ** 2 for a, b in zip(oracle, sorted(PAPER_POLES, reverse=True)))
    r = pole_residual(default_params, PAPER_POLES)
    assert r == pytest.approx(hand, rel=1e-10)
    assert r == pytest.approx(6.5444, abs=1e-4)


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_nelder_mead_finds_rosenbrock_minimum():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], [-2, -2], [2, 2], xtol=1e-12, max_evals=5000)
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-6)
    assert res.converged


def test_nelder_mead_respects_bounds_and_finds_boundary_optimum():
    seen = []

    def f(x):
        seen.append(np.array(x))
        return (x[0] - 5.0) ** 2 + (x[1] + 1.0) ** 2

    res = nelder_mead(f, [0.5, 0.5], [0, 0], [2, 1], xtol=1e-10)
    assert all(np.all(v >= [0, 0]) and np.all(v <= [2, 1]) for v in seen)
    assert res.x == pytest.approx([2.0, 0.0], abs=1e-6)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(5, 200))
@settings(max_examples=50, deadline=None)
def test_nelder_mead_history_monotone_and_budget(cx, cy, budget):
    res = nelder_mead(lambda x: (x[0] - cx) ** 2 + abs(x[1] - cy), [0.1, 0.1], [-4, -4], [4, 4],
                      max_evals=budget)
    assert res.evaluations <= budget
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_nelder_mead_stops_at_target():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], [-2, -2], [2, 2], ftarget=1e-2)
    assert res.fun <= 1e-2 and res.converged
    with pytest.raises(ValueError):
        nelder_mead(rosenbrock, [0, 0], [0, 0], [1, 0])


def test_identify_reaches_target_poles(default_params):
    res = identify(IdentProblem(), default_params, seed=0)
    assert res.residual < 1e-6 and res.converged
    got = sorted(z.real for z in res.poles())
    assert got == pytest.approx(sorted(PAPER_POLES), abs=1e-3)
    p = res.params
    assert p.pendulum_inertia == pytest.approx(p.bob_mass * p.arm_length**2 / 3)


def test_shipped_preset_matches_a_fresh_identification(default_params):
    fresh = identify(IdentProblem(), default_params, seed=0).params.to_dict()
    shipped = paper_matched_record()["params"]
    assert shipped == pytest.approx(fresh, rel=1e-9)


def test_round_trip_from_perturbed_start():
    rng = np.random.default_rng(7)
    truth = PhysicalParams(cart_mass=1.2, bob_mass=0.3, arm_length=0.6, pendulum_inertia=0.3 * 0.36 / 3,
                           viscous_friction=0.4)
    targets = [z.real for z in plant_transfer_function(truth).poles()]
    start = truth.replace(**{k: getattr(truth, k) * rng.uniform(0.8, 1.2)
                             for k in ("cart_mass", "bob_mass", "arm_length", "viscous_friction")})
    res = identify(IdentProblem(target_poles=targets), start, seed=1)
    assert res.residual < 1e-8
    assert sorted(z.real for z in res.poles()) == pytest.approx(sorted(targets), abs=1e-4)


def test_identify_is_deterministic(default_params):
    a = identify(IdentProblem(), default_params, seed=3).to_dict()
    b = identify(IdentProblem(), default_params, seed=3).to_dict()
    assert a == b


def test_result_rechecks_residual(default_params):
    with pytest.raises(ValueError, match="does not match"):
        IdentResult(default_params, 0.0, 0, True, PAPER_POLES)


def test_problem_validation(default_params):
    with pytest.raises(ValueError):
        IdentProblem(target_poles=())
    with pytest.raises(ValueError):
        IdentProblem(free_params={"cart_mass": (1.0, 1.0)})
    with pytest.raises(ValueError):
        IdentProblem(free_params={"drag_cd": (0.0, 1.0)})
    with pytest.raises(ValueError):
        IdentProblem(free_params={"pendulum_inertia": (0.0, 1.0)})
    with pytest.raises(ValueError):
        identify(IdentProblem(free_params={"cart_mass": (1.0, 2.0)}), default_params)


def objective(params=None, duration=3.0):
    sc = Scenario(params=params or PhysicalParams(), initial=PendulumState(theta=0.1), duration=duration)
    return TuneObjective(sc)


def test_zero_budget_returns_start():
    start = PidGains(50.0, 0.0, 4.0)
    res = tune_gains(objective(), GainSpace(), start=start, budget=0)
    assert res.gains == start and res.evaluations == 0
    assert res.metrics == objective().metrics(start)


def test_tuner_improves_on_start_within_budget():
    obj = objective()
    start = PidGains(30.0, 0.0, 1.0)
    res = tune_gains(obj, GainSpace(), start=start, budget=40, seed=0)
    assert res.evaluations <= 40
    assert res.cost < obj.cost(obj.metrics(start))
    assert res.metrics.overshoot_pct < 2.0


def test_tuner_is_deterministic():
    a = tune_gains(objective(), GainSpace(), budget=25, seed=4).to_dict()
    b = tune_gains(objective(), GainSpace(), budget=25, seed=4).to_dict()
    assert a == b


def test_tuner_reports_failure_when_nothing_settles():
    with pytest.raises(TuningError) as info:
        tune_gains(objective(), GainSpace(kp=(0.0, 1.0), kd=(0.0, 0.1)), budget=15)
    assert info.value.args


def test_objective_cost_penalizes_overshoot_and_unsettled():
    obj = objective()
    from pendctl.harness import StepMetrics

    base = obj.cost(StepMetrics(1.0, 1.0, 0.0, 0.0))
    assert obj.cost(StepMetrics(1.0, 3.0, 0.0, 0.0)) > base + 1.0
    assert obj.cost(StepMetrics(None, 0.0, 0.0, 0.0)) == pytest.approx(6.0)
    assert obj.cost(StepMetrics(None, math.nan, math.nan, math.nan, True)) >= 1e6


def test_gain_space_validation():
    with pytest.raises(ValueError):
        GainSpace(kp=(5.0, 1.0))
    with pytest.raises(ValueError):
        GainSpace(ki=(-1.0, 1.0))
    assert GainSpace().free() == ["kp", "kd"]
    assert GainSpace().is_pd
