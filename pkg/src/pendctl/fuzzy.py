"""Mamdani fuzzy inference and the two pendulum controllers built on it.

Inference uses min for AND and implication, max for aggregation and a
centroid over a uniform discretization of each output universe.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

CENTROID_POINTS = 1001
TERMS5 = ("NB", "NS", "ZE", "PS", "PB")
TERMS3 = ("S", "M", "B")


class FuzzyError(ValueError):
    pass


@dataclass(frozen=True)
class MembershipFunction:
    """Piecewise-linear membership; triangular(a, b, c) or trapezoidal(a, b, c, d)."""

    shape: str
    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(v) for v in self.points)
        object.__setattr__(self, "points", pts)
        expected = {"triangular": 3, "trapezoidal": 4}.get(self.shape)
        if expected is None:
            raise FuzzyError(f"unknown membership shape {self.shape!r}")
        if len(pts) != expected:
            raise FuzzyError(f"{self.shape} needs {expected} breakpoints, got {len(pts)}")
        if any(b < a for a, b in zip(pts, pts[1:])):
            raise FuzzyError(f"breakpoints must be non-decreasing: {pts}")

    @classmethod
    def triangular(cls, a, b, c) -> "MembershipFunction":
        return cls("triangular", (a, b, c))

    @classmethod
    def trapezoidal(cls, a, b, c, d) -> "MembershipFunction":
        return cls("trapezoidal", (a, b, c, d))

    @property
    def corners(self) -> tuple[float, float, float, float]:
        p = self.points
        return (p[0], p[1], p[1], p[2]) if self.shape == "triangular" else p

    @property
    def support(self) -> tuple[float, float]:
        return self.points[0], self.points[-1]

    def __call__(self, x):
        if np.ndim(x):
            return self._array(np.asarray(x, dtype=float))
        a, b, c, d = self.corners
        if b <= x <= c:
            return 1.0
        if a < x < b:
            return (x - a) / (b - a)
        if c < x < d:
            return (d - x) / (d - c)
        return 0.0

    def _array(self, x: np.ndarray) -> np.ndarray:
        a, b, c, d = self.corners
        out = np.zeros_like(x)
        if b > a:
            m = (x > a) & (x < b)
            out[m] = (x[m] - a) / (b - a)
        if d > c:
            m = (x > c) & (x < d)
            out[m] = (d - x[m]) / (d - c)
        out[(x >= b) & (x <= c)] = 1.0
        return out

    def to_dict(self) -> dict:
        return {"shape": self.shape, "points": list(self.points)}


def membership(mf: MembershipFunction, x: float) -> float:
    return mf(x)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: tuple[float, float]
    terms: Mapping[str, MembershipFunction]

    def __post_init__(self):
        lo, hi = (float(v) for v in self.universe)
        object.__setattr__(self, "universe", (lo, hi))
        object.__setattr__(self, "terms", dict(self.terms))
        if not lo < hi:
            raise FuzzyError(f"{self.name}: universe lower bound must be below upper")
        if not self.terms:
            raise FuzzyError(f"{self.name}: no terms")
        for tname, mf in self.terms.items():
            s0, s1 = mf.support
            if s1 < lo or s0 > hi:
                raise FuzzyError(f"{self.name}.{tname}: support misses the universe")
        grid = np.linspace(lo, hi, 2001)
        cover = np.max([mf(grid) for mf in self.terms.values()], axis=0)
        if np.any(cover <= 0.0):
            gap = grid[np.argmin(cover)]
            raise FuzzyError(f"{self.name}: terms leave {gap:g} uncovered")

    def clip(self, x: float) -> float:
        lo, hi = self.universe
        return min(hi, max(lo, x))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "universe": list(self.universe),
            "terms": {k: mf.to_dict() for k, mf in self.terms.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinguisticVariable":
        terms = {
            k: MembershipFunction(v["shape"], tuple(v["points"])) for k, v in d["terms"].items()
        }
        return cls(d["name"], tuple(d["universe"]), terms)


def uniform_partition(
    name: str, lo: float, hi: float, term_names: Sequence[str] = TERMS5
) -> LinguisticVariable:
    """Evenly spaced triangles with 50% overlap; edge peaks sit on the universe bounds."""
    n = len(term_names)
    step = (hi - lo) / (n - 1)
    terms = {}
    for i, t in enumerate(term_names):
        c = lo + i * step
        if i == n - 1:
            c = hi
        terms[t] = MembershipFunction.triangular(c - step, c, c + step)
    return LinguisticVariable(name, (lo, hi), terms)


@dataclass(frozen=True)
class FuzzyRule:
    antecedent: tuple[tuple[str, str], ...]
    consequent: tuple[str, str]

    def to_dict(self) -> dict:
        return {"if": [list(a) for a in self.antecedent], "then": list(self.consequent)}

    @classmethod
    def from_dict(cls, d: dict) -> "FuzzyRule":
        return cls(tuple((v, t) for v, t in d["if"]), tuple(d["then"]))


@dataclass(frozen=True)
class FuzzyInferenceSystem:
    inputs: tuple[LinguisticVariable, ...]
    outputs: tuple[LinguisticVariable, ...]
    rules: tuple[FuzzyRule, ...]
    resolution: int = CENTROID_POINTS
    _tables: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise FuzzyError("rulebase is empty")
        if self.resolution < 3:
            raise FuzzyError("centroid resolution must be >= 3")
        ins = {v.name: v for v in self.inputs}
        outs = {v.name: v for v in self.outputs}
        if len(ins) != len(self.inputs) or len(outs) != len(self.outputs):
            raise FuzzyError("duplicate variable names")
        for r in self.rules:
            for var, term in r.antecedent:
                if var not in ins or term not in ins[var].terms:
                    raise FuzzyError(f"rule references unknown input term {var}.{term}")
            var, term = r.consequent
            if var not in outs or term not in outs[var].terms:
                raise FuzzyError(f"rule references unknown output term {var}.{term}")
        object.__setattr__(self, "_tables", self._build_tables())

    def _build_tables(self) -> dict:
        tables = {}
        for out in self.outputs:
            grid = np.linspace(out.universe[0], out.universe[1], self.resolution)
            names = list(out.terms)
            mfs = np.array([out.terms[t](grid) for t in names])
            # trapezoid-rule weights on the uniform grid
            w = np.ones_like(grid)
            w[0] = w[-1] = 0.5
            rule_idx = [
                (i, names.index(r.consequent[1]))
                for i, r in enumerate(self.rules)
                if r.consequent[0] == out.name
            ]
            tables[out.name] = (grid, mfs, w, rule_idx)
        return tables

    @property
    def input_names(self) -> list[str]:
        return [v.name for v in self.inputs]

    @property
    def output_names(self) -> list[str]:
        return [v.name for v in self.outputs]

    def firing_strengths(self, inputs: Mapping[str, float]) -> list[float]:
        crisp = {}
        for var in self.inputs:
            if var.name not in inputs:
                raise FuzzyError(f"missing input {var.name!r}")
            x = float(inputs[var.name])
            if not math.isfinite(x):
                raise FuzzyError(f"non-finite input {var.name}={x}")
            crisp[var.name] = var.clip(x)
        ins = {v.name: v for v in self.inputs}
        return [
            min(ins[v].terms[t](crisp[v]) for v, t in r.antecedent) for r in self.rules
        ]

    def evaluate(self, inputs: Mapping[str, float]) -> dict[str, float]:
        strengths = self.firing_strengths(inputs)
        result = {}
        for out in self.outputs:
            grid, mfs, w, rule_idx = self._tables[out.name]
            level = np.zeros(len(mfs))
            for ri, ti in rule_idx:
                if strengths[ri] > level[ti]:
                    level[ti] = strengths[ri]
            agg = np.minimum(level[:, None], mfs).max(axis=0) * w
            area = agg.sum()
            if area <= 0.0:
                point = ", ".join(f"{k}={inputs[k]!r}" for k in self.input_names)
                raise FuzzyError(f"no rule fired for {out.name} at ({point})")
            result[out.name] = float(np.dot(grid, agg) / area)
        return result

    def to_dict(self) -> dict:
        return {
            "inputs": [v.to_dict() for v in self.inputs],
            "outputs": [v.to_dict() for v in self.outputs],
            "rules": [r.to_dict() for r in self.rules],
            "resolution": self.resolution,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FuzzyInferenceSystem":
        return cls(
            tuple(LinguisticVariable.from_dict(v) for v in d["inputs"]),
            tuple(LinguisticVariable.from_dict(v) for v in d["outputs"]),
            tuple(FuzzyRule.from_dict(r) for r in d["rules"]),
            int(d.get("resolution", CENTROID_POINTS)),
        )


def evaluate(fis: FuzzyInferenceSystem, inputs: Mapping[str, float]) -> dict[str, float]:
    return fis.evaluate(inputs)


def build_direct_controller(
    theta_max: float = 0.3, theta_dot_max: float = 1.0, f_max: float = 10.0
) -> FuzzyInferenceSystem:
    """Two-input (theta, theta_dot) to force controller with a 25-rule table.

    The consequent index is minus the clamped sum of the antecedent indices, so
    the force opposes the tilt and its rate in this package's sign convention.
    """
    theta = uniform_partition("theta", -theta_max, theta_max)
    rate = uniform_partition("theta_dot", -theta_dot_max, theta_dot_max)
    force = uniform_partition("force", -f_max, f_max)
    rules = []
    for i, j in itertools.product(range(5), range(5)):
        k = -max(-2, min(2, (i - 2) + (j - 2)))
        rules.append(FuzzyRule((("theta", TERMS5[i]), ("theta_dot", TERMS5[j])), ("force", TERMS5[k + 2])))
    return FuzzyInferenceSystem((theta, rate), (force,), tuple(rules))


def build_gain_scheduler(
    error_max: float = 0.3,
    kp_range: tuple[float, float] = (20.0, 60.0),
    kd_range: tuple[float, float] = (2.0, 6.0),
) -> FuzzyInferenceSystem:
    """Angle error to (kp, kd); gains rise with |error| through a symmetric rulebase."""
    error = uniform_partition("error", -error_max, error_max)
    kp = uniform_partition("kp", *kp_range, term_names=TERMS3)
    kd = uniform_partition("kd", *kd_range, term_names=TERMS3)
    level = {"NB": "B", "NS": "M", "ZE": "S", "PS": "M", "PB": "B"}
    rules = [
        FuzzyRule((("error", e),), (out, level[e])) for out in ("kp", "kd") for e in TERMS5
    ]
    return FuzzyInferenceSystem((error,), (kp, kd), tuple(rules))


def export_surface(fis: FuzzyInferenceSystem, grid: int | Sequence[int]) -> tuple[list[str], list[list[float]]]:
    """Evaluate the FIS on a full grid over its input universes (first input varies slowest)."""
    counts = [grid] * len(fis.inputs) if isinstance(grid, int) else list(grid)
    if len(counts) != len(fis.inputs) or any(n < 2 for n in counts):
        raise FuzzyError("need at least 2 grid points per input")
    axes = [np.linspace(v.universe[0], v.universe[1], n) for v, n in zip(fis.inputs, counts)]
    header = fis.input_names + fis.output_names
    rows = []
    for point in itertools.product(*axes):
        named = dict(zip(fis.input_names, (float(x) for x in point)))
        try:
            out = fis.evaluate(named)
        except FuzzyError as exc:
            raise FuzzyError(f"surface evaluation failed at {named}: {exc}") from exc
        rows.append([named[k] for k in fis.input_names] + [out[k] for k in fis.output_names])
    return header, rows
