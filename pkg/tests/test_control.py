import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pendctl.control import (
    ActuatorLimits,
    ControlError,
    ControllerState,
    PidGains,
    make_pd,
    pid_step,
    reset,
)

WIDE = ActuatorLimits(1e9)


def run(g, errors, dt, lim=WIDE, filter_n=10.0):
    st_ = reset()
    out = []
    for e in errors:
        u, st_ = pid_step(g, st_, e, dt, lim, filter_n)
        out.append(u)
    return out, st_


def test_trapezoidal_integral_of_constant_error():
    out, st_ = run(PidGains(0.0, 1.0, 0.0), [1.0] * 10, 0.1)
    # hand sum: 0.05 + 9 * 0.1
    assert out[-1] == pytest.approx(0.95, abs=1e-12)
    assert st_.integral_accum == pytest.approx(0.95, abs=1e-12)


def test_proportional_term_and_first_call_has_no_derivative_kick():
    u, st_ = pid_step(PidGains(2.0, 0.0, 5.0), reset(), 0.3, 0.01, WIDE)
    assert u == pytest.approx(0.6)
    assert st_.deriv_filter_state == 0.0 and st_.initialized


def test_unfiltered_derivative_is_backward_difference():
    out, _ = run(make_pd(0.0, 1.0), [0.0, 0.5, 1.5], 0.1, filter_n=0.0)
    assert out == pytest.approx([0.0, 5.0, 10.0])


def test_derivative_filter_is_first_order_lag():
    # constant slope 1: filtered derivative approaches 1 with pole N/(N+1)
    errors = [0.01 * k for k in range(200)]
    out, _ = run(make_pd(0.0, 1.0), errors, 0.01, filter_n=10.0)
    a = 1.0 / 11.0
    assert out[1] == pytest.approx(a)
    assert out[2] == pytest.approx(a + a * (1 - a))
    assert out[-1] == pytest.approx(1.0, rel=1e-6)


@given(
    st.floats(0, 100), st.floats(0, 100), st.floats(0, 10),
    st.lists(st.floats(-10, 10), min_size=1, max_size=60), st.floats(0.1, 20),
)
@settings(max_examples=200, deadline=None)
def test_output_saturated_and_integral_clamped(kp, ki, kd, errors, u_max):
    g = PidGains(kp, ki, kd)
    lim = ActuatorLimits(u_max)
    st_ = reset()
    for e in errors:
        u, st_ = pid_step(g, st_, e, 0.01, lim)
        assert abs(u) <= u_max
        assert math.isfinite(st_.integral_accum)
        if ki > 0:
            assert abs(st_.integral_accum) <= u_max / ki * (1 + 1e-12)


def test_anti_windup_freezes_integral_while_saturated():
    lim = ActuatorLimits(1.0)
    g = PidGains(10.0, 5.0, 0.0)
    out, st_ = run(g, [1.0] * 100, 0.01, lim)
    assert all(u == 1.0 for u in out)
    assert st_.integral_accum == 0.0
    # error reverses: nothing wound up, so the trapezoid step is all that remains
    u, st2 = pid_step(g, st_, -0.05, 0.01, lim)
    assert st2.integral_accum == pytest.approx(0.5 * (1.0 - 0.05) * 0.01)
    assert u == pytest.approx(-0.5 + 5.0 * st2.integral_accum)
    u, st3 = pid_step(g, st2, -0.05, 0.01, lim)
    assert st3.integral_accum == pytest.approx(st2.integral_accum - 0.05 * 0.01)


def test_pid_step_is_pure():
    g = PidGains(3.0, 2.0, 1.0)
    s = ControllerState(0.1, 0.2, 0.3, True)
    assert pid_step(g, s, 0.5, 0.01, WIDE) == pid_step(g, s, 0.5, 0.01, WIDE)
    assert s == ControllerState(0.1, 0.2, 0.3, True)


def test_invalid_inputs():
    with pytest.raises(ControlError):
        PidGains(-1.0)
    with pytest.raises(ControlError):
        PidGains(math.nan)
    with pytest.raises(ControlError):
        ActuatorLimits(0.0)
    with pytest.raises(ControlError):
        pid_step(PidGains(1.0), reset(), 0.1, 0.0, WIDE)
    with pytest.raises(ControlError):
        pid_step(PidGains(1.0), reset(), math.inf, 0.01, WIDE)
    with pytest.raises(ControlError, match="unknown"):
        PidGains.from_dict({"kp": 1.0, "gain": 2.0})


def test_gains_round_trip():
    g = PidGains(1.5, 0.25, 0.125)
    assert PidGains.from_dict(g.to_dict()) == g
    assert make_pd(4.0, 2.0) == PidGains(4.0, 0.0, 2.0)
