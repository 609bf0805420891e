"""Closed-loop simulation, disturbance injection, trajectories and step metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .control import ActuatorLimits, ControllerState, PidGains, pid_step
from .dynamics import LINEAR, MODELS, PendulumState, PhysicalParams, make_derivative, rk4
from .fuzzy import FuzzyInferenceSystem

CSV_HEADER = ("t", "x", "x_dot", "theta", "theta_dot", "u", "d")
DEFAULT_WINDOW_START = 0.05


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Disturbance:
    kind: str = "none"  # "none" | "impulse"
    amplitude: float = 0.0  # N
    start_time: float = 0.0  # s
    width: float = 0.01  # s

    def __post_init__(self):
        if self.kind not in ("none", "impulse"):
            raise ScenarioError(f"unknown disturbance kind {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ScenarioError("disturbance amplitude must be finite")
        if self.kind == "impulse" and not self.width > 0:
            raise ScenarioError("impulse width must be > 0")


def impulse_force(d: Disturbance, t: float) -> float:
    """Rectangular pulse: amplitude on [start, start + width), zero elsewhere."""
    if d.kind == "impulse" and d.start_time <= t < d.start_time + d.width:
        return d.amplitude
    return 0.0


CONTROLLER_KINDS = ("none", "pid", "pd", "fuzzy_direct", "fuzzy_scheduled_pid")


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = "none"
    gains: PidGains | None = None
    fis: FuzzyInferenceSystem | None = None

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ScenarioError(f"unknown controller kind {self.kind!r}")
        if self.kind in ("pid", "pd", "fuzzy_scheduled_pid") and self.gains is None:
            raise ScenarioError(f"{self.kind} controller needs gains")
        if self.kind == "pd" and self.gains.ki != 0.0:
            raise ScenarioError("pd controller must have ki = 0")
        if self.kind.startswith("fuzzy") and self.fis is None:
            raise ScenarioError(f"{self.kind} controller needs a fuzzy system")

    @classmethod
    def pid(cls, gains: PidGains) -> "ControllerSpec":
        return cls("pid", gains)

    @classmethod
    def pd(cls, gains: PidGains) -> "ControllerSpec":
        return cls("pd", gains)

    @classmethod
    def fuzzy_direct(cls, fis: FuzzyInferenceSystem) -> "ControllerSpec":
        return cls("fuzzy_direct", fis=fis)

    @classmethod
    def fuzzy_scheduled_pid(cls, fis: FuzzyInferenceSystem, base: PidGains) -> "ControllerSpec":
        return cls("fuzzy_scheduled_pid", base, fis)


@dataclass(frozen=True)
class Scenario:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    model: str = LINEAR
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)
    reference_theta: float = 0.0  # rad
    initial: PendulumState = PendulumState()
    disturbance: Disturbance = field(default_factory=Disturbance)
    duration: float = 5.0  # s
    dt: float = 0.001  # s
    metric_window_start: float = DEFAULT_WINDOW_START  # s
    control_every: int = 1  # controller hold factor, in steps
    drag: bool = False
    pivot_friction: bool = False
    filter_n: float = 10.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ScenarioError(f"unknown model {self.model!r}")
        if not (self.duration > self.dt > 0):
            raise ScenarioError("need duration > dt > 0")
        if self.dt > 0.05:
            raise ScenarioError("dt must be <= 0.05 s")
        if not self.metric_window_start < self.duration:
            raise ScenarioError("metric_window_start must precede the end of the run")
        if self.control_every < 1:
            raise ScenarioError("control_every must be >= 1")
        object.__setattr__(self, "initial", PendulumState(*self.initial))

    @property
    def steps(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass
class TrajectoryRecord:
    """Rows of (t, x, x_dot, theta, theta_dot, u, d) on the grid t_k = k dt."""

    data: np.ndarray
    dt: float
    blew_up: bool = False

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def theta(self) -> np.ndarray:
        return self.data[:, 3]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, CSV_HEADER.index(name)]

    def __len__(self) -> int:
        return len(self.data)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        for row in self.data.tolist():
            buf.write(",".join(repr(v) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, blew_up: bool = False) -> "TrajectoryRecord":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ScenarioError(f"unexpected trajectory header {header}")
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        dt = float(data[1, 0] - data[0, 0]) if len(data) > 1 else 0.0
        return cls(data.reshape(-1, len(CSV_HEADER)), dt, blew_up)


class _Controller:
    """Per-run controller adapter holding the evolving state."""

    def __init__(self, sc: Scenario):
        self.spec = sc.controller
        self.limits = sc.limits
        self.dt_ctrl = sc.dt * sc.control_every
        self.filter_n = sc.filter_n
        self.state = ControllerState()

    def __call__(self, error: float, theta_dot: float) -> float:
        spec = self.spec
        u_max = self.limits.u_max
        if spec.kind == "none":
            return 0.0
        if spec.kind == "fuzzy_direct":
            # inputs are deviations from the reference; sign convention lives in the rulebase
            u = spec.fis.evaluate({"theta": -error, "theta_dot": theta_dot})["force"]
            return min(u_max, max(-u_max, u))
        gains = spec.gains
        if spec.kind == "fuzzy_scheduled_pid":
            sched = spec.fis.evaluate({"error": error})
            gains = PidGains(sched["kp"], gains.ki, sched["kd"])
        u, self.state = pid_step(gains, self.state, error, self.dt_ctrl, self.limits, self.filter_n)
        return u


def run_closed_loop(sc: Scenario) -> TrajectoryRecord:
    """Simulate the feedback loop; a non-finite state truncates the record and flags it."""
    f = make_derivative(sc.params, sc.model, sc.drag, sc.pivot_friction)
    ctrl = _Controller(sc)
    n = sc.steps
    dt = sc.dt
    ref = sc.reference_theta
    dist = sc.disturbance
    s = tuple(float(v) for v in sc.initial)
    rows = []
    u = 0.0
    blew_up = False
    isfinite = math.isfinite
    for k in range(n + 1):
        t = k * dt
        if k % sc.control_every == 0:
            u = ctrl(ref - s[2], s[3])
        d = impulse_force(dist, t)
        rows.append((t, s[0], s[1], s[2], s[3], u, d))
        if k == n:
            break
        s = rk4(f, s, u + d, dt)
        if not (isfinite(s[0]) and isfinite(s[1]) and isfinite(s[2]) and isfinite(s[3])):
            blew_up = True
            break
    return TrajectoryRecord(np.array(rows, dtype=float), dt, blew_up)


@dataclass(frozen=True)
class StepMetrics:
    settling_time_2pct: float | None
    overshoot_pct: float
    steady_state_error_pct: float
    peak_theta: float
    blew_up: bool = False

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or not math.isfinite(v) else v

        return {
            "settling_time_s": num(self.settling_time_2pct),
            "overshoot_pct": num(self.overshoot_pct),
            "sse_pct": num(self.steady_state_error_pct),
            "peak_theta_rad": num(self.peak_theta),
            "blew_up": self.blew_up,
        }


INVALID_METRICS = StepMetrics(None, math.nan, math.nan, math.nan, True)


def compute_metrics(
    tr: TrajectoryRecord,
    reference: float = 0.0,
    band_pct: float = 2.0,
    window_start: float = DEFAULT_WINDOW_START,
    scale: float | None = None,
) -> StepMetrics:
    """Settling time, overshoot and steady-state error of theta about `reference`.

    Percentages are relative to `scale`, by default the initial offset
    |theta(0) - reference|, or the peak excursion inside the window when the run
    starts on the reference (impulse runs). Rows before `window_start` are
    ignored. Settling time is the last exit from the band, interpolated
    between samples, or None if the run ends outside it.
    """
    if len(tr) == 0:
        raise ScenarioError("empty trajectory")
    if band_pct <= 0:
        raise ScenarioError("band_pct must be > 0")
    if tr.blew_up:
        return INVALID_METRICS
    t = tr.t
    err = tr.theta - reference
    mask = t >= window_start - 1e-12
    if not mask.any():
        raise ScenarioError(f"no samples at or after window start {window_start}")
    tw = t[mask]
    ew = err[mask]
    aw = np.abs(ew)

    offset = abs(err[0])
    if scale is None:
        scale = offset if offset > 1e-12 else float(aw.max())
    if scale <= 1e-12:
        return StepMetrics(float(tw[0]), 0.0, 0.0, float(tr.theta[mask][0]), False)

    band = band_pct / 100.0 * scale
    outside = np.nonzero(aw > band)[0]
    if len(outside) == 0:
        settling = float(tw[0])
    elif outside[-1] == len(aw) - 1:
        settling = None
    else:
        i = outside[-1]
        a0, a1 = aw[i], aw[i + 1]
        frac = (a0 - band) / (a0 - a1) if a0 != a1 else 1.0
        settling = float(tw[i] + frac * (tw[i + 1] - tw[i]))

    ipk = int(np.argmax(aw))
    direction = math.copysign(1.0, err[0]) if offset > 1e-12 else math.copysign(1.0, ew[ipk])
    overshoot = max(0.0, float(np.max(-direction * ew))) / scale * 100.0

    tail = max(1, int(math.ceil(0.1 * len(aw))))
    sse = float(np.mean(aw[-tail:])) / scale * 100.0
    return StepMetrics(settling, float(overshoot), float(sse), float(reference + ew[ipk]), False)


@dataclass
class Comparison:
    names: list[str]
    metrics: list[StepMetrics]
    winners: dict[str, str]

    def to_rows(self) -> list[dict]:
        return [{"controller": n, **m.to_dict()} for n, m in zip(self.names, self.metrics)]


def _rank_value(m: StepMetrics, key: str) -> float:
    if m.blew_up:
        return math.inf
    v = getattr(m, key)
    return math.inf if v is None or not math.isfinite(v) else v


def compare_controllers(
    scenarios: Sequence[Scenario], names: Sequence[str] | None = None, band_pct: float = 2.0
) -> Comparison:
    """Run each scenario and mark the best controller per metric (lowest wins)."""
    if len(scenarios) < 2:
        raise ScenarioError("need at least two scenarios to compare")
    base = scenarios[0]
    for sc in scenarios[1:]:
        if sc.params != base.params or sc.disturbance != base.disturbance:
            raise ScenarioError("compared scenarios must share plant and disturbance")
    names = list(names) if names else [sc.controller.kind for sc in scenarios]
    metrics = [
        compute_metrics(run_closed_loop(sc), sc.reference_theta, band_pct, sc.metric_window_start)
        for sc in scenarios
    ]
    winners = {}
    for key in ("settling_time_2pct", "overshoot_pct", "steady_state_error_pct"):
        vals = [_rank_value(m, key) for m in metrics]
        winners[key] = names[int(np.argmin(vals))]
    return Comparison(names, metrics, winners)
