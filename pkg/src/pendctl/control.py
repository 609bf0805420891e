"""Discrete PID / PD control with saturation, clamping anti-windup and a filtered derivative.

The controller state is an explicit immutable value threaded through
`pid_step`, so many loops can run side by side without hidden state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_FILTER_N = 10.0


class ControlError(ValueError):
    pass


@dataclass(frozen=True)
class PidGains:
    kp: float  # N/rad
    ki: float = 0.0  # N/(rad s)
    kd: float = 0.0  # N s/rad

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ControlError(f"{name} must be finite and >= 0, got {v}")

    def to_dict(self) -> dict:
        return {"kp": self.kp, "ki": self.ki, "kd": self.kd}

    @classmethod
    def from_dict(cls, d: dict) -> "PidGains":
        unknown = set(d) - {"kp", "ki", "kd"}
        if unknown:
            raise ControlError(f"unknown gain keys: {sorted(unknown)}")
        return cls(float(d.get("kp", 0.0)), float(d.get("ki", 0.0)), float(d.get("kd", 0.0)))


def make_pd(kp: float, kd: float) -> PidGains:
    """PID gains with the integral path removed."""
    return PidGains(kp, 0.0, kd)


@dataclass(frozen=True)
class ActuatorLimits:
    u_max: float = 10.0  # N, symmetric

    def __post_init__(self):
        if not (self.u_max > 0 and math.isfinite(self.u_max)):
            raise ControlError(f"u_max must be finite and > 0, got {self.u_max}")


@dataclass(frozen=True)
class ControllerState:
    integral_accum: float = 0.0  # rad s
    prev_error: float = 0.0  # rad
    deriv_filter_state: float = 0.0  # rad/s
    initialized: bool = False


def reset(st: ControllerState | None = None) -> ControllerState:
    return ControllerState()


def pid_step(
    g: PidGains,
    st: ControllerState,
    error: float,
    dt: float,
    lim: ActuatorLimits,
    filter_n: float = DEFAULT_FILTER_N,
) -> tuple[float, ControllerState]:
    """One controller update; returns the saturated force and the next state.

    The integral uses the trapezoidal rule (the first call integrates from a
    zero previous error) and is frozen while the output is saturated in the
    direction the error would push it. The derivative is a backward difference
    through a first-order low-pass with time constant filter_n * dt; the first
    call emits zero derivative. filter_n = 0 disables the filter.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise ControlError(f"dt must be finite and > 0, got {dt}")
    if not math.isfinite(error):
        raise ControlError(f"non-finite error {error}")

    if st.initialized:
        raw = (error - st.prev_error) / dt
        a = dt / (filter_n * dt + dt)
        deriv = st.deriv_filter_state + a * (raw - st.deriv_filter_state)
        prev = st.prev_error
    else:
        deriv = 0.0
        prev = 0.0

    u_max = lim.u_max
    integral = st.integral_accum
    if g.ki > 0.0:
        candidate = integral + 0.5 * (error + prev) * dt
        bound = u_max / g.ki
        candidate = min(bound, max(-bound, candidate))
        u_try = g.kp * error + g.ki * candidate + g.kd * deriv
        if abs(u_try) <= u_max or (u_try > 0) != (error > 0) or error == 0.0:
            integral = candidate

    u = g.kp * error + g.ki * integral + g.kd * deriv
    u = min(u_max, max(-u_max, u))
    return u, ControllerState(integral, error, deriv, True)
