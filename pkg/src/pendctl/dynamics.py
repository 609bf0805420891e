"""Cart-pendulum plant: parameters, friction terms, equations of motion, RK4.

Angles are measured from the upright equilibrium. The coupled linear pair is

    (I + m l^2) theta_dd - m g l theta = m l x_dd
    (M + m) x_dd + b x_d - m l theta_dd = u

and the nonlinear model reduces to it for small theta.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple

DT_MAX = 0.05

LINEAR = "linear"
NONLINEAR = "nonlinear"
MODELS = (LINEAR, NONLINEAR)


class DynamicsError(ValueError):
    """Invalid parameters, non-finite input, or an integration blow-up."""


@dataclass(frozen=True)
class PhysicalParams:
    cart_mass: float = 0.5  # M, kg
    bob_mass: float = 0.2  # m, kg
    arm_length: float = 0.3  # l, m (pivot to bob centre)
    pendulum_inertia: float = 0.006  # I, kg m^2 about the centre of mass
    gravity: float = 9.8  # m/s^2
    viscous_friction: float = 0.1  # b, N s/m
    motor_friction_alpha: float = 0.01  # N m s/rad
    wheel_ground_mu: float = 0.76
    gear_mu: float = 0.2
    drag_cd: float = 0.8

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DynamicsError(f"{f.name} must be a finite number, got {v!r}")
        for name in ("cart_mass", "bob_mass", "arm_length", "gravity"):
            if getattr(self, name) <= 0:
                raise DynamicsError(f"{name} must be > 0")
        for name in ("pendulum_inertia", "viscous_friction", "motor_friction_alpha",
                     "wheel_ground_mu", "gear_mu", "drag_cd"):
            if getattr(self, name) < 0:
                raise DynamicsError(f"{name} must be >= 0")
        if self.determinant <= 0:
            raise DynamicsError(f"coupling determinant {self.determinant} must be > 0")

    @property
    def total_mass(self) -> float:
        return self.cart_mass + self.bob_mass

    @property
    def pivot_inertia(self) -> float:
        """I + m l^2."""
        return self.pendulum_inertia + self.bob_mass * self.arm_length**2

    @property
    def determinant(self) -> float:
        """(M + m)(I + m l^2) - m^2 l^2."""
        ml = self.bob_mass * self.arm_length
        return self.total_mass * self.pivot_inertia - ml * ml

    def replace(self, **changes) -> "PhysicalParams":
        return PhysicalParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalParams":
        if not isinstance(data, dict):
            raise DynamicsError("physical parameters must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DynamicsError(f"unknown parameter keys: {', '.join(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PhysicalParams":
        return cls.from_dict(json.loads(text))


class PendulumState(NamedTuple):
    x: float = 0.0
    x_dot: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0


def _check_finite(s, u) -> None:
    if not all(math.isfinite(v) for v in s):
        raise DynamicsError(f"non-finite state {tuple(s)}")
    if not math.isfinite(u):
        raise DynamicsError(f"non-finite force {u}")


def friction_force(p: PhysicalParams, s: PendulumState) -> tuple[float, float]:
    """Viscous cart friction force and viscous pivot torque, (-b x_d, -alpha theta_d)."""
    return -p.viscous_friction * s.x_dot, -p.motor_friction_alpha * s.theta_dot


def drag_torque(p: PhysicalParams, theta_dot: float) -> float:
    """Quadratic pivot drag -0.5 Cd l theta_d |theta_d|."""
    return -0.5 * p.drag_cd * p.arm_length * theta_dot * abs(theta_dot)


def coulomb_equivalent_b(p: PhysicalParams, k: float, mu: float | None = None) -> float:
    """Viscous coefficient mu (M+m) g k standing in for wheel-ground Coulomb friction.

    `k` (s/m) is the reciprocal of the speed at which the viscous force equals
    the Coulomb force.
    """
    if mu is None:
        mu = p.wheel_ground_mu
    return mu * p.total_mass * p.gravity * k


def make_derivative(
    p: PhysicalParams,
    model: str = LINEAR,
    drag: bool = False,
    pivot_friction: bool = False,
) -> Callable[[tuple, float], tuple]:
    """Return f(state, u) -> (x_d, x_dd, theta_d, theta_dd) with constants folded in.

    Drag only applies to the nonlinear model. Pivot friction adds -alpha theta_d
    as a pivot torque in either model.
    """
    if model not in MODELS:
        raise DynamicsError(f"unknown model {model!r}")
    mt = p.total_mass
    ml = p.bob_mass * p.arm_length
    mgl = ml * p.gravity
    j = p.pivot_inertia
    b = p.viscous_friction
    alpha = p.motor_friction_alpha if pivot_friction else 0.0
    half_cd_l = 0.5 * p.drag_cd * p.arm_length if drag else 0.0

    if model == LINEAR:
        inv_d = 1.0 / p.determinant

        def f(s, u):
            _, xd, th, thd = s
            fc = u - b * xd
            tq = mgl * th - alpha * thd
            return (
                xd,
                (j * fc + ml * tq) * inv_d,
                thd,
                (ml * fc + mt * tq) * inv_d,
            )

        return f

    ml2 = ml * ml

    def f(s, u):
        _, xd, th, thd = s
        sn = math.sin(th)
        c = math.cos(th)
        fc = u - b * xd - ml * thd * thd * sn
        tq = mgl * sn - alpha * thd - half_cd_l * thd * abs(thd)
        inv_d = 1.0 / (mt * j - ml2 * c * c)
        mlc = ml * c
        return (
            xd,
            (j * fc + mlc * tq) * inv_d,
            thd,
            (mlc * fc + mt * tq) * inv_d,
        )

    return f


def accel_linear(p: PhysicalParams, s: PendulumState, u: float) -> tuple[float, float]:
    """Cart and pendulum accelerations of the linearized plant."""
    _check_finite(s, u)
    d = make_derivative(p, LINEAR)(s, u)
    return d[1], d[3]


def accel_nonlinear(
    p: PhysicalParams, s: PendulumState, u: float, drag: bool = False
) -> tuple[float, float]:
    """Cart and pendulum accelerations of the full nonlinear plant."""
    _check_finite(s, u)
    d = make_derivative(p, NONLINEAR, drag=drag)(s, u)
    return d[1], d[3]


def rk4(f: Callable[[tuple, float], tuple], s: tuple, u: float, dt: float) -> tuple:
    """One classical RK4 step of `f` with `u` held over the step. No checks."""
    h2 = 0.5 * dt
    k1 = f(s, u)
    k2 = f(tuple(a + h2 * k for a, k in zip(s, k1)), u)
    k3 = f(tuple(a + h2 * k for a, k in zip(s, k2)), u)
    k4 = f(tuple(a + dt * k for a, k in zip(s, k3)), u)
    h6 = dt / 6.0
    return tuple(
        a + h6 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        for a, q1, q2, q3, q4 in zip(s, k1, k2, k3, k4)
    )


def rk4_step(
    p: PhysicalParams,
    s: PendulumState,
    u: float,
    dt: float,
    model: str = LINEAR,
    drag: bool = False,
    pivot_friction: bool = False,
) -> PendulumState:
    if not (0.0 < dt <= DT_MAX):
        raise DynamicsError(f"dt={dt} outside (0, {DT_MAX}]")
    _check_finite(s, u)
    out = rk4(make_derivative(p, model, drag, pivot_friction), tuple(s), u, dt)
    if not all(math.isfinite(v) for v in out):
        raise DynamicsError(f"integration blew up: {out}")
    return PendulumState(*out)


def total_energy(p: PhysicalParams, s: PendulumState) -> float:
    """Kinetic plus gravitational energy of the nonlinear model (zero at the pivot height)."""
    ml = p.bob_mass * p.arm_length
    kinetic = (
        0.5 * p.total_mass * s.x_dot**2
        - ml * math.cos(s.theta) * s.x_dot * s.theta_dot
        + 0.5 * p.pivot_inertia * s.theta_dot**2
    )
    return kinetic + ml * p.gravity * math.cos(s.theta)
