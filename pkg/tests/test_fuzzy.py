import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mamdani_bruteforce, tri
from pendctl.fuzzy import (
    FuzzyError,
    FuzzyInferenceSystem,
    FuzzyRule,
    LinguisticVariable,
    MembershipFunction,
    build_direct_controller,
    build_gain_scheduler,
    evaluate,
    export_surface,
    membership,
    uniform_partition,
)
from pendctl.reporting import table_csv

NAMES = ("NB", "NS", "ZE", "PS", "PB")


def oracle_direct(theta, theta_dot, tmax=0.3, rmax=1.0, fmax=10.0):
    def terms(hi):
        step = hi / 2
        return {n: tri(c - step, c, c + step) for n, c in zip(NAMES, (-hi, -step, 0.0, step, hi))}

    ins = {"theta": terms(tmax), "theta_dot": terms(rmax)}
    rules = []
    for i, a in enumerate(NAMES):
        for j, b in enumerate(NAMES):
            k = -max(-2, min(2, i + j - 4))
            rules.append(([("theta", a), ("theta_dot", b)], NAMES[k + 2]))
    clipped = {"theta": max(-tmax, min(tmax, theta)), "theta_dot": max(-rmax, min(rmax, theta_dot))}
    return mamdani_bruteforce(rules, ins, clipped, terms(fmax), -fmax, fmax)


@pytest.fixture(scope="module")
def direct():
    return build_direct_controller()


@pytest.mark.parametrize(
    "point", [(0.1, 0.0), (-0.07, 0.3), (0.25, -0.9), (0.0, 0.0), (0.31, 1.4), (0.12, 0.5)]
)
def test_direct_controller_matches_bruteforce_inference(direct, point):
    th, thd = point
    got = direct.evaluate({"theta": th, "theta_dot": thd})["force"]
    assert got == pytest.approx(oracle_direct(th, thd), abs=1e-9)


def test_direct_controller_restores_tilt(direct):
    f = evaluate(direct, {"theta": 0.1, "theta_dot": 0.0})["force"]
    g = evaluate(direct, {"theta": -0.1, "theta_dot": 0.0})["force"]
    assert f < 0
    assert g == pytest.approx(-f, abs=1e-9)
    assert f == pytest.approx(oracle_direct(0.1, 0.0), abs=1e-9)


def odd_symmetry_error(header, rows, n_inputs=2):
    table = {tuple(round(v, 12) for v in r[:n_inputs]): r[n_inputs] for r in rows}
    worst = 0.0
    for key, value in table.items():
        mirror = tuple(round(-v, 12) + 0.0 for v in key)
        worst = max(worst, abs(value + table[mirror]))
    return worst


def test_surface_is_odd_and_csv_agrees(direct):
    header, rows = export_surface(direct, 21)
    assert header == ["theta", "theta_dot", "force"]
    assert len(rows) == 21 * 21
    in_memory = odd_symmetry_error(header, rows)
    assert in_memory < 1e-6 * 10.0
    text = table_csv(header, rows)
    parsed = [[float(v) for v in line.split(",")] for line in text.splitlines()[1:]]
    assert odd_symmetry_error(header, parsed) == in_memory


@given(st.floats(-0.5, 0.5), st.floats(-2.0, 2.0))
@settings(max_examples=100, deadline=None)
def test_direct_output_bounded_and_odd(th, thd):
    fis = build_direct_controller()
    f = fis.evaluate({"theta": th, "theta_dot": thd})["force"]
    assert -10.0 <= f <= 10.0
    assert fis.evaluate({"theta": -th, "theta_dot": -thd})["force"] == pytest.approx(-f, abs=1e-9)


def test_every_grid_point_fires_a_rule(direct):
    for th in np.linspace(-0.3, 0.3, 41):
        for thd in np.linspace(-1.0, 1.0, 41):
            assert max(direct.firing_strengths({"theta": th, "theta_dot": thd})) > 0


def test_scheduler_gains_rise_with_error_magnitude():
    fis = build_gain_scheduler()
    errors = np.linspace(0.0, 0.3, 61)
    kp = [fis.evaluate({"error": e})["kp"] for e in errors]
    kd = [fis.evaluate({"error": e})["kd"] for e in errors]
    assert all(b >= a - 1e-9 for a, b in zip(kp, kp[1:]))
    assert all(b >= a - 1e-9 for a, b in zip(kd, kd[1:]))
    assert 20 <= kp[0] < kp[-1] <= 60
    for e in errors:
        assert fis.evaluate({"error": -e}) == pytest.approx(fis.evaluate({"error": e}))


def test_membership_shapes():
    tri_mf = MembershipFunction.triangular(0.0, 1.0, 3.0)
    assert membership(tri_mf, 1.0) == 1.0
    assert membership(tri_mf, 0.5) == 0.5
    assert membership(tri_mf, 2.0) == 0.5
    assert membership(tri_mf, -1.0) == 0.0 and membership(tri_mf, 3.0) == 0.0
    trap = MembershipFunction.trapezoidal(0.0, 1.0, 2.0, 4.0)
    assert [trap(x) for x in (0.5, 1.5, 3.0, 5.0)] == [0.5, 1.0, 0.5, 0.0]
    shoulder = MembershipFunction.trapezoidal(-1.0, -1.0, 0.0, 1.0)
    assert shoulder(-1.0) == 1.0


@given(
    st.lists(st.floats(-5, 5), min_size=4, max_size=4).map(sorted),
    st.lists(st.floats(-8, 8), min_size=1, max_size=20),
)
@settings(max_examples=100, deadline=None)
def test_membership_in_unit_interval_and_vectorized(pts, xs):
    mf = MembershipFunction.trapezoidal(*pts)
    scalar = [mf(x) for x in xs]
    assert all(0.0 <= v <= 1.0 for v in scalar)
    assert np.allclose(mf(np.array(xs)), scalar)


def test_validation_errors():
    with pytest.raises(FuzzyError):
        MembershipFunction.triangular(1.0, 0.0, 2.0)
    with pytest.raises(FuzzyError):
        MembershipFunction("gaussian", (0.0, 1.0))
    with pytest.raises(FuzzyError, match="uncovered"):
        LinguisticVariable("x", (0, 10), {"a": MembershipFunction.triangular(0, 1, 2)})
    with pytest.raises(FuzzyError):
        LinguisticVariable("x", (1, 1), {"a": MembershipFunction.triangular(0, 1, 2)})
    v = uniform_partition("x", -1, 1)
    y = uniform_partition("y", -1, 1)
    with pytest.raises(FuzzyError, match="unknown"):
        FuzzyInferenceSystem((v,), (y,), (FuzzyRule((("x", "HUGE"),), ("y", "ZE")),))
    with pytest.raises(FuzzyError, match="empty"):
        FuzzyInferenceSystem((v,), (y,), ())
    fis = FuzzyInferenceSystem((v,), (y,), (FuzzyRule((("x", "PB"),), ("y", "PB")),))
    with pytest.raises(FuzzyError, match="no rule fired"):
        fis.evaluate({"x": -1.0})
    with pytest.raises(FuzzyError, match="missing"):
        fis.evaluate({})
    with pytest.raises(FuzzyError):
        fis.evaluate({"x": math.nan})


def test_serialization_round_trip(direct):
    clone = FuzzyInferenceSystem.from_dict(direct.to_dict())
    for point in ({"theta": 0.1, "theta_dot": -0.2}, {"theta": -0.29, "theta_dot": 0.8}):
        assert clone.evaluate(point) == direct.evaluate(point)
