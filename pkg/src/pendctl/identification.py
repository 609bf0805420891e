"""Derivative-free parameter identification and controller gain search.

Both searches use a bounded Nelder-Mead simplex run in coordinates
normalized to the box, with seeded restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .control import PidGains
from .dynamics import DynamicsError, PhysicalParams
from .harness import Scenario, StepMetrics, compute_metrics, run_closed_loop, ControllerSpec
from .linear_analysis import RootFindingError, plant_transfer_function

PAPER_POLES = (3.8286, -3.8844, -0.8989)
DEFAULT_RESTARTS = 5
INVALID_PENALTY = 1e6


class TuningError(RuntimeError):
    def __init__(self, message, best_gains=None, best_metrics=None):
        super().__init__(message)
        self.best_gains = best_gains
        self.best_metrics = best_metrics


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def nelder_mead(
    func: Callable[[np.ndarray], float],
    x0: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    initial_simplex: np.ndarray | None = None,
    step: float = 0.05,
    xtol: float = 1e-9,
    ftarget: float = -math.inf,
    max_iter: int = 2000,
    max_evals: int = 10_000,
    reflect: float = 1.0,
    expand: float = 2.0,
    contract: float = 0.5,
    shrink: float = 0.5,
) -> SimplexResult:
    """Minimize `func` inside the box [lower, upper].

    Every trial point is clipped into the box before evaluation. Stops when the
    simplex diameter (infinity norm, box-normalized) drops below `xtol`, the
    best value reaches `ftarget`, or a budget runs out.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    span = hi - lo
    if np.any(span <= 0) or not np.all(np.isfinite(span)):
        raise ValueError("bounds must be finite with lower < upper")
    n = len(lo)
    evals = 0

    def to_x(z):
        return lo + np.clip(z, 0.0, 1.0) * span

    def f(z):
        nonlocal evals
        if evals >= max_evals:
            raise _OutOfBudget
        evals += 1
        v = float(func(to_x(z)))
        return v if math.isfinite(v) else INVALID_PENALTY

    z0 = (np.asarray(x0, dtype=float) - lo) / span
    if initial_simplex is None:
        verts = [z0]
        for i in range(n):
            z = z0.copy()
            h = step * max(abs(float(np.asarray(x0)[i])), 1e-3) / span[i]
            z[i] = z[i] + h if z[i] + h <= 1.0 else z[i] - h
            verts.append(z)
        simplex = np.array(verts)
    else:
        simplex = (np.asarray(initial_simplex, dtype=float) - lo) / span
    simplex = np.clip(simplex, 0.0, 1.0)

    if max_evals <= 0:
        return SimplexResult(to_x(z0), math.nan, 0, 0, False, [])
    values = np.array([f(v) for v in simplex[: max(1, min(len(simplex), max_evals))]])
    if len(values) < len(simplex):
        return SimplexResult(to_x(simplex[0]), values[0], 0, evals, False, [values[0]])

    history = []
    it = 0
    converged = False
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        history.append(float(values[0]))
        diameter = float(np.max(np.abs(simplex[1:] - simplex[0]))) if n else 0.0
        if values[0] <= ftarget or diameter < xtol:
            converged = True
            break
        if it >= max_iter or evals >= max_evals:
            break
        it += 1
        try:
            _nm_iteration(f, simplex, values, reflect, expand, contract, shrink)
        except _OutOfBudget:
            break
    order = np.argsort(values, kind="stable")
    return SimplexResult(to_x(simplex[order[0]]), float(values[order[0]]), it, evals, converged, history)


class _OutOfBudget(Exception):
    pass


def _nm_iteration(f, simplex, values, reflect, expand, contract, shrink) -> None:
    """One reflect/expand/contract/shrink move on a sorted simplex, in place."""
    centroid = simplex[:-1].mean(axis=0)
    worst = simplex[-1].copy()
    xr = np.clip(centroid + reflect * (centroid - worst), 0.0, 1.0)
    fr = f(xr)
    if fr < values[0]:
        simplex[-1], values[-1] = xr, fr
        xe = np.clip(centroid + expand * (xr - centroid), 0.0, 1.0)
        fe = f(xe)
        if fe < fr:
            simplex[-1], values[-1] = xe, fe
        return
    if fr < values[-2]:
        simplex[-1], values[-1] = xr, fr
        return
    if fr < values[-1]:
        xc = np.clip(centroid + contract * (xr - centroid), 0.0, 1.0)
    else:
        xc = np.clip(centroid + contract * (worst - centroid), 0.0, 1.0)
    fc = f(xc)
    if fc < min(fr, values[-1]):
        simplex[-1], values[-1] = xc, fc
        return
    best = simplex[0]
    for i in range(1, len(simplex)):
        z = best + shrink * (simplex[i] - best)
        values[i] = f(z)
        simplex[i] = z


def pole_residual(p: PhysicalParams, targets: Sequence[float]) -> float:
    """Squared distance between sorted plant poles and sorted real targets.

    Real parts are compared after sorting both lists; imaginary parts count
    as extra squared error.
    """
    poles = sorted(plant_transfer_function(p).poles(), key=lambda z: -z.real)
    tg = sorted((float(t) for t in targets), reverse=True)
    if len(poles) != len(tg):
        raise ValueError(f"plant has {len(poles)} poles, {len(tg)} targets given")
    return sum((z.real - t) ** 2 + z.imag**2 for z, t in zip(poles, tg))


FREE_PARAM_NAMES = ("cart_mass", "bob_mass", "arm_length", "pendulum_inertia", "viscous_friction", "gravity")

DEFAULT_BOUNDS = {
    "cart_mass": (0.05, 5.0),
    "bob_mass": (0.01, 2.0),
    "arm_length": (0.05, 2.0),
    "viscous_friction": (0.0, 5.0),
}


@dataclass(frozen=True)
class IdentProblem:
    target_poles: tuple[float, ...] = PAPER_POLES
    free_params: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    slave_inertia: bool = True  # I = m l^2 / 3 (uniform rod)

    def __post_init__(self):
        object.__setattr__(self, "target_poles", tuple(float(t) for t in self.target_poles))
        object.__setattr__(self, "free_params", dict(self.free_params))
        if not self.target_poles:
            raise ValueError("target pole list is empty")
        if not self.free_params:
            raise ValueError("no free parameters")
        for name, (lo, hi) in self.free_params.items():
            if name not in FREE_PARAM_NAMES:
                raise ValueError(f"{name} cannot be identified")
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bounds for {name}: {(lo, hi)}")
        if self.slave_inertia and "pendulum_inertia" in self.free_params:
            raise ValueError("pendulum_inertia cannot be free while slaved to m l^2 / 3")

    def build(self, base: PhysicalParams, values: Mapping[str, float]) -> PhysicalParams:
        changes = dict(values)
        if self.slave_inertia:
            m = changes.get("bob_mass", base.bob_mass)
            l = changes.get("arm_length", base.arm_length)
            changes["pendulum_inertia"] = m * l * l / 3.0
        return base.replace(**changes)

    def to_dict(self) -> dict:
        return {
            "target_poles": list(self.target_poles),
            "free_params": {k: list(v) for k, v in self.free_params.items()},
            "slave_inertia": self.slave_inertia,
        }


@dataclass(frozen=True)
class IdentResult:
    params: PhysicalParams
    residual: float
    iterations: int
    converged: bool
    targets: tuple[float, ...]
    evaluations: int = 0
    seed: int = 0
    history: tuple[float, ...] = ()

    def __post_init__(self):
        check = pole_residual(self.params, self.targets)
        if not math.isclose(check, self.residual, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError(f"residual {self.residual} does not match objective {check}")

    def poles(self) -> list[complex]:
        return plant_transfer_function(self.params).poles()

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "provenance": {
                "targets": list(self.targets),
                "residual": self.residual,
                "converged": self.converged,
                "iterations": self.iterations,
                "evaluations": self.evaluations,
                "seed": self.seed,
            },
        }


def identify(
    prob: IdentProblem,
    start: PhysicalParams,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = 1e-10,
    max_evals: int = 4000,
) -> IdentResult:
    """Fit the free parameters so the linearized plant poles hit the targets.

    Runs one simplex from `start`, then up to `restarts` more from randomly
    perturbed simplices around the best point until the residual falls
    below `tol`.
    """
    names = list(prob.free_params)
    lo = np.array([prob.free_params[k][0] for k in names])
    hi = np.array([prob.free_params[k][1] for k in names])
    x0 = np.array([getattr(start, k) for k in names], dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("start point lies outside the bounds")

    def objective(x):
        if np.any(x < lo) or np.any(x > hi):
            raise AssertionError("candidate left the bounds")
        try:
            p = prob.build(start, dict(zip(names, x.tolist())))
            return pole_residual(p, prob.target_poles)
        except (DynamicsError, RootFindingError):
            return INVALID_PENALTY

    rng = np.random.default_rng(seed)
    best_x, best_f = x0, math.inf
    iterations = evaluations = 0
    history: list[float] = []
    simplex = None
    for attempt in range(restarts + 1):
        res = nelder_mead(objective, best_x, lo, hi, initial_simplex=simplex, ftarget=tol, max_evals=max_evals)
        iterations += res.iterations
        evaluations += res.evaluations
        for v in res.history:
            history.append(min(v, history[-1]) if history else v)
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        if best_f <= tol:
            break
        scale = np.maximum(np.abs(best_x), 1e-3 * (hi - lo))
        simplex = np.clip(
            best_x + rng.uniform(-0.2, 0.2, size=(len(names) + 1, len(names))) * scale, lo, hi
        )
        simplex[0] = best_x
    params = prob.build(start, dict(zip(names, best_x.tolist())))
    residual = pole_residual(params, prob.target_poles)
    return IdentResult(
        params, residual, iterations, residual <= tol, prob.target_poles,
        evaluations, seed, tuple(history),
    )


@dataclass(frozen=True)
class GainSpace:
    """Box bounds on (kp, ki, kd); a dimension with lo == hi is pinned."""

    kp: tuple[float, float] = (0.0, 100.0)
    ki: tuple[float, float] = (0.0, 0.0)
    kd: tuple[float, float] = (0.0, 10.0)

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo <= hi):
                raise ValueError(f"bad {name} bounds {(lo, hi)}")

    @property
    def is_pd(self) -> bool:
        return self.ki == (0.0, 0.0)

    def free(self) -> list[str]:
        return [k for k in ("kp", "ki", "kd") if getattr(self, k)[0] < getattr(self, k)[1]]

    def center(self) -> PidGains:
        return PidGains(*(0.5 * sum(getattr(self, k)) for k in ("kp", "ki", "kd")))

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in ("kp", "ki", "kd")}


@dataclass(frozen=True)
class TuneObjective:
    """Weighted step-metric cost of a closed-loop scenario.

    cost = settling + w_overshoot * overshoot% + w_sse * sse%
           + w_limit * max(0, overshoot% - overshoot_limit)
    An unsettled run counts its settling time as twice the duration.
    """

    scenario: Scenario
    w_overshoot: float = 0.05
    w_sse: float = 0.05
    overshoot_limit: float = 2.0
    w_limit: float = 1.0
    band_pct: float = 2.0

    def metrics(self, gains: PidGains) -> StepMetrics:
        sc = self.scenario
        spec = ControllerSpec.pd(gains) if gains.ki == 0 else ControllerSpec.pid(gains)
        tr = run_closed_loop(sc.with_(controller=spec))
        return compute_metrics(tr, sc.reference_theta, self.band_pct, sc.metric_window_start)

    def cost(self, m: StepMetrics) -> float:
        if m.blew_up:
            return INVALID_PENALTY
        settle = m.settling_time_2pct
        if settle is None:
            settle = 2.0 * self.scenario.duration
        return (
            settle
            + self.w_overshoot * m.overshoot_pct
            + self.w_sse * m.steady_state_error_pct
            + self.w_limit * max(0.0, m.overshoot_pct - self.overshoot_limit)
        )


@dataclass(frozen=True)
class TuneResult:
    gains: PidGains
    metrics: StepMetrics
    cost: float
    evaluations: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "gains": self.gains.to_dict(),
            "metrics": self.metrics.to_dict(),
            "cost": self.cost,
            "evaluations": self.evaluations,
            "seed": self.seed,
        }


DEFAULT_TUNE_BUDGET = 150


def tune_gains(
    objective: TuneObjective,
    space: GainSpace,
    start: PidGains | None = None,
    budget: int = DEFAULT_TUNE_BUDGET,
    seed: int = 0,
    restarts: int = 2,
    probes: int | None = None,
) -> TuneResult:
    """Simplex search over the free gains minimizing the objective's cost.

    `budget` caps closed-loop simulations spent by the search; a zero budget
    returns `start` unchanged. Raises TuningError when no candidate both
    stays finite and settles.
    """
    if start is None:
        start = space.center()
    free = space.free()
    if budget <= 0 or not free:
        m = objective.metrics(start)
        return TuneResult(start, m, objective.cost(m), 0, seed)
    lo = np.array([getattr(space, k)[0] for k in free])
    hi = np.array([getattr(space, k)[1] for k in free])
    base = start.to_dict()
    for k in ("kp", "ki", "kd"):
        if k not in free:
            base[k] = getattr(space, k)[0]
    x0 = np.clip([base[k] for k in free], lo, hi)
    cache: dict[tuple, tuple[float, StepMetrics]] = {}

    def gains_of(x) -> PidGains:
        g = dict(base)
        g.update(zip(free, (float(v) for v in x)))
        return PidGains(**g)

    def f(x):
        key = tuple(float(v) for v in x)
        if key not in cache:
            m = objective.metrics(gains_of(x))
            cache[key] = (objective.cost(m), m)
        return cache[key][0]

    rng = np.random.default_rng(seed)
    # seeded space-filling probe, then simplex refinement from the best probe
    n_probe = min(budget, probes if probes is not None else 4 * (len(free) + 1))
    best_x, best_f = x0, f(x0)
    used = 1
    for _ in range(max(0, n_probe - 1)):
        x = lo + rng.uniform(0.0, 1.0, len(free)) * (hi - lo)
        v = f(x)
        used += 1
        if v < best_f:
            best_x, best_f = x, v
    simplex = None
    for _ in range(restarts + 1):
        remaining = budget - used
        if remaining <= 0:
            break
        res = nelder_mead(f, best_x, lo, hi, initial_simplex=simplex, step=0.1, xtol=1e-4, max_evals=remaining)
        used += res.evaluations
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        simplex = np.clip(best_x + rng.uniform(-0.05, 0.05, (len(free) + 1, len(free))) * (hi - lo), lo, hi)
        simplex[0] = best_x
    best_gains = gains_of(best_x)
    cost, metrics = cache[tuple(float(v) for v in best_x)]
    if metrics.blew_up or metrics.settling_time_2pct is None:
        raise TuningError(
            f"no settling gains found in {budget} evaluations; best candidate {best_gains}",
            best_gains,
            metrics,
        )
    return TuneResult(best_gains, metrics, cost, used, seed)
