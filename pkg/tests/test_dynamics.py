import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import physical_params
from oracles import cart_pendulum_accels
from pendctl.dynamics import (
    DynamicsError,
    PendulumState,
    PhysicalParams,
    accel_linear,
    accel_nonlinear,
    coulomb_equivalent_b,
    drag_torque,
    friction_force,
    make_derivative,
    rk4,
    rk4_step,
    total_energy,
)


def test_unit_force_from_rest_matches_linear_solve(default_params):
    xdd, thdd = accel_linear(default_params, PendulumState(), 1.0)
    ref = cart_pendulum_accels(0.5, 0.2, 0.3, 0.006, 9.8, 0.1, 0.0, 0.0, 1.0)
    assert xdd == pytest.approx(ref[0], rel=1e-12)
    assert thdd == pytest.approx(ref[1], rel=1e-12)
    # frozen values
    assert xdd == pytest.approx(1.8182, abs=1e-4)
    assert thdd == pytest.approx(4.5455, abs=1e-4)
    assert default_params.determinant == pytest.approx(0.0132)


def test_small_tilt_accelerations_share_sign(default_params):
    xdd, thdd = accel_linear(default_params, PendulumState(theta=0.01), 0.0)
    assert xdd > 0 and thdd > 0


@given(physical_params())
@settings(max_examples=50, deadline=None)
def test_linear_model_matches_mass_matrix_oracle(p):
    s = PendulumState(0.3, -0.4, 0.02, 0.1)
    xdd, thdd = accel_linear(p, s, 0.7)
    ref = cart_pendulum_accels(p.cart_mass, p.bob_mass, p.arm_length, p.pendulum_inertia,
                               p.gravity, p.viscous_friction, s.x_dot, s.theta, 0.7)
    assert xdd == pytest.approx(ref[0], rel=1e-9, abs=1e-12)
    assert thdd == pytest.approx(ref[1], rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("theta", np.linspace(-0.05, 0.05, 21))
def test_nonlinear_agrees_with_linear_near_upright(default_params, theta):
    s = PendulumState(theta=float(theta))
    for u in (0.0, 1.0, -2.0):
        lin = np.array(accel_linear(default_params, s, u))
        non = np.array(accel_nonlinear(default_params, s, u))
        if np.all(lin == 0):
            assert np.allclose(non, 0)
            continue
        assert np.max(np.abs(non - lin)) / np.max(np.abs(lin)) < 0.01


def test_drag_opposes_rotation(default_params):
    assert drag_torque(default_params, 2.0) < 0 < drag_torque(default_params, -2.0)
    s = PendulumState(theta_dot=3.0)
    with_drag = accel_nonlinear(default_params, s, 0.0, drag=True)[1]
    without = accel_nonlinear(default_params, s, 0.0)[1]
    assert with_drag < without


def test_pivot_torque_at_motor_speed(default_params):
    # 170 rpm is about 17.8 rad/s; the motor is rated near 0.2 N m
    _, torque = friction_force(default_params, PendulumState(theta_dot=17.8))
    assert torque == pytest.approx(-0.178, rel=1e-9)
    assert abs(torque) == pytest.approx(0.2, rel=0.2)


def test_coulomb_equivalent_b(default_params):
    assert coulomb_equivalent_b(default_params, 0.01) == pytest.approx(0.76 * 0.7 * 9.8 * 0.01)
    assert coulomb_equivalent_b(default_params, 0.01, mu=0.2) == pytest.approx(0.2 * 0.7 * 9.8 * 0.01)


def test_pivot_friction_flag_slows_rotation(default_params):
    s = (0.0, 0.0, 0.0, 1.0)
    off = make_derivative(default_params, "nonlinear")(s, 0.0)[3]
    on = make_derivative(default_params, "nonlinear", pivot_friction=True)(s, 0.0)[3]
    assert on < off


@pytest.mark.parametrize(
    "changes",
    [{"cart_mass": 0.0}, {"bob_mass": -1.0}, {"arm_length": math.nan}, {"viscous_friction": -0.1},
     {"gravity": math.inf}, {"pendulum_inertia": -1e-3}],
)
def test_invalid_params_rejected(changes):
    with pytest.raises(DynamicsError):
        PhysicalParams().replace(**changes)


def test_params_json_round_trip_and_unknown_keys(default_params):
    assert PhysicalParams.from_json(default_params.to_json()) == default_params
    with pytest.raises(DynamicsError, match="unknown"):
        PhysicalParams.from_dict({"cart_mass": 1.0, "mass": 2.0})


def test_step_rejects_bad_dt_and_inputs(default_params):
    s = PendulumState(theta=0.1)
    for dt in (0.0, -1e-3, 0.051):
        with pytest.raises(DynamicsError):
            rk4_step(default_params, s, 0.0, dt)
    with pytest.raises(DynamicsError):
        rk4_step(default_params, s, math.nan, 1e-3)
    with pytest.raises(DynamicsError):
        rk4_step(default_params, PendulumState(theta=math.inf), 0.0, 1e-3)
    with pytest.raises(DynamicsError):
        make_derivative(default_params, "quadratic")


def test_equilibrium_is_fixed_point(default_params):
    for model in ("linear", "nonlinear"):
        assert rk4_step(default_params, PendulumState(), 0.0, 0.01, model) == PendulumState()


def _integrate(f, s, dt, t_end):
    for _ in range(int(round(t_end / dt))):
        s = rk4(f, s, 0.0, dt)
    return np.array(s)


def observed_rk4_order(p):
    f = make_derivative(p, "nonlinear")
    s0 = (0.0, 0.0, math.pi - 0.5, 0.0)  # hanging swing keeps the error in the asymptotic range
    dt = 0.005
    ref = _integrate(f, s0, dt / 10, 2.0)
    e1 = np.max(np.abs(_integrate(f, s0, dt, 2.0) - ref))
    e2 = np.max(np.abs(_integrate(f, s0, dt / 2, 2.0) - ref))
    return math.log2(e1 / e2)


def test_rk4_is_fourth_order(default_params):
    assert 3.7 <= observed_rk4_order(default_params) <= 4.3


def energy_drift(p, seconds=10.0, dt=0.001):
    frictionless = p.replace(viscous_friction=0.0)
    f = make_derivative(frictionless, "nonlinear")
    s = (0.0, 0.0, math.pi - 0.3, 0.0)  # hanging, swinging
    e0 = total_energy(frictionless, PendulumState(*s))
    worst = 0.0
    for _ in range(int(round(seconds / dt))):
        s = rk4(f, s, 0.0, dt)
        worst = max(worst, abs(total_energy(frictionless, PendulumState(*s)) - e0))
    return worst / abs(e0)


def test_frictionless_energy_drift(default_params):
    assert energy_drift(default_params) < 1e-6


def test_friction_dissipates_energy(default_params):
    f = make_derivative(default_params, "nonlinear")
    s = (0.0, 0.5, math.pi - 0.3, 0.0)
    energies = []
    for _ in range(2000):
        s = rk4(f, s, 0.0, 0.001)
        energies.append(total_energy(default_params, PendulumState(*s)))
    assert energies[-1] < energies[0]
