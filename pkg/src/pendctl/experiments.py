"""Standard closed-loop experiments on the identified plant.

These fix the scenarios, search spaces and budgets used by the CLI defaults
and the acceptance suite, so both run exactly the same thing.
"""

from __future__ import annotations

from .control import ActuatorLimits, PidGains
from .dynamics import PendulumState, PhysicalParams
from .fuzzy import build_direct_controller
from .harness import ControllerSpec, Disturbance, Scenario
from .identification import DEFAULT_TUNE_BUDGET, GainSpace, TuneObjective, TuneResult, tune_gains

INITIAL_TILT = 0.1  # rad
KP_BOUNDS = (0.0, 100.0)
KD_BOUNDS = (0.0, 10.0)
KI_MAX = 100.0


def tuning_scenario(params: PhysicalParams, duration: float = 5.0) -> Scenario:
    """Release from a 0.1 rad tilt with the controller holding theta at zero."""
    return Scenario(params=params, initial=PendulumState(theta=INITIAL_TILT), duration=duration,
                    dt=0.001, limits=ActuatorLimits(10.0))


def integral_floor(params: PhysicalParams) -> float:
    """Smallest ki for which the PID loop has no positive real pole: b g.

    Below it the constant term of the closed-loop characteristic polynomial
    stays negative, exactly as with PD.
    """
    return params.viscous_friction * params.gravity


def pd_space() -> GainSpace:
    return GainSpace(kp=KP_BOUNDS, ki=(0.0, 0.0), kd=KD_BOUNDS)


def pid_space(params: PhysicalParams) -> GainSpace:
    return GainSpace(kp=KP_BOUNDS, ki=(integral_floor(params), KI_MAX), kd=KD_BOUNDS)


def tune(params: PhysicalParams, mode: str, budget: int = DEFAULT_TUNE_BUDGET, seed: int = 0) -> TuneResult:
    space = pd_space() if mode == "pd" else pid_space(params)
    if mode not in ("pd", "pid"):
        raise ValueError(f"mode must be 'pd' or 'pid', got {mode!r}")
    return tune_gains(TuneObjective(tuning_scenario(params)), space, budget=budget, seed=seed)


def impulse_hold_scenario(params: PhysicalParams, gains: PidGains, duration: float = 25.0) -> Scenario:
    """Tilted release, then a 2 N x 10 ms push on the cart at t = 1 s."""
    return Scenario(
        params=params,
        controller=ControllerSpec.pd(gains) if gains.ki == 0 else ControllerSpec.pid(gains),
        initial=PendulumState(theta=INITIAL_TILT),
        disturbance=Disturbance("impulse", 2.0, 1.0, 0.01),
        duration=duration,
        dt=0.001,
    )


def fuzzy_recovery_scenario(params: PhysicalParams | None = None, duration: float = 10.0) -> Scenario:
    limits = ActuatorLimits(10.0)
    return Scenario(
        params=params or PhysicalParams(),
        controller=ControllerSpec.fuzzy_direct(build_direct_controller(f_max=limits.u_max)),
        limits=limits,
        initial=PendulumState(theta=INITIAL_TILT),
        duration=duration,
        dt=0.001,
    )
