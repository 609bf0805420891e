"""JSON run configuration: parsing, file checks and resolution into domain objects."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .control import ActuatorLimits, PidGains
from .dynamics import PendulumState, PhysicalParams
from .fuzzy import FuzzyInferenceSystem, build_direct_controller, build_gain_scheduler
from .harness import ControllerSpec, Disturbance, Scenario
from .presets import preset_params

TOP_LEVEL_KEYS = {
    "preset", "params", "params_file", "model", "controller", "u_max", "reference_theta",
    "initial", "disturbance", "duration", "dt", "metric_window_start", "control_every",
    "drag", "pivot_friction", "filter_n", "identify", "tune", "locus", "surface",
}
FILE_KEYS = ("params_file", "fis_file")


class ConfigError(ValueError):
    pass


def parse_json(text: str, source: str = "<config>") -> Any:
    """json.loads with errors reported as byte offsets into the UTF-8 input."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(exc.doc[: exc.pos].encode("utf-8"))
        raise ConfigError(
            f"{source}: malformed JSON at byte offset {offset} (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from None


def load_config(path: str | Path) -> tuple[dict, Path]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    data = parse_json(path.read_bytes().decode("utf-8"), str(path))
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data, path.parent


def _walk_files(obj, base: Path, found: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k in FILE_KEYS:
                found.append((k, base / v))
            else:
                _walk_files(v, base, found)
    elif isinstance(obj, list):
        for v in obj:
            _walk_files(v, base, found)


@dataclass
class RunConfig:
    """Merged configuration: file contents overlaid with command-line overrides."""

    data: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        unknown = sorted(set(self.data) - TOP_LEVEL_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "params" in self.data and "params_file" in self.data:
            raise ConfigError("'params' conflicts with 'params_file'; give one")
        if "preset" in self.data and ("params" in self.data or "params_file" in self.data):
            raise ConfigError("'preset' conflicts with 'params'/'params_file'; give one")
        files: list = []
        _walk_files(self.data, self.base_dir, files)
        for key, p in files:
            if not p.is_file():
                raise ConfigError(f"{key} refers to missing file {p}")

    @classmethod
    def from_file(cls, path: str | Path | None, overrides: dict | None = None) -> "RunConfig":
        data, base = ({}, Path.cwd()) if path is None else load_config(path)
        for k, v in (overrides or {}).items():
            if v is not None:
                data[k] = v
        return cls(data, base)

    def _read_json_file(self, rel: str) -> Any:
        p = self.base_dir / rel
        return parse_json(p.read_text(), str(p))

    def params(self) -> PhysicalParams:
        if "params_file" in self.data:
            raw = self._read_json_file(self.data["params_file"])
            raw = raw.get("params", raw) if isinstance(raw, dict) else raw
            return PhysicalParams.from_dict(raw)
        if "params" in self.data:
            return PhysicalParams.from_dict(self.data["params"])
        return preset_params(self.data.get("preset", "default"))

    def limits(self) -> ActuatorLimits:
        return ActuatorLimits(float(self.data.get("u_max", 10.0)))

    def _fis(self, spec: dict, builder, **defaults) -> FuzzyInferenceSystem:
        if "fis" in spec:
            return FuzzyInferenceSystem.from_dict(spec["fis"])
        if "fis_file" in spec:
            return FuzzyInferenceSystem.from_dict(self._read_json_file(spec["fis_file"]))
        args = {k: spec[k] for k in defaults if k in spec}
        for k, v in defaults.items():
            args.setdefault(k, v)
        return builder(**{k: tuple(v) if isinstance(v, list) else v for k, v in args.items()})

    def direct_fis(self, spec: dict | None = None) -> FuzzyInferenceSystem:
        spec = spec if spec is not None else self.data.get("surface", {})
        return self._fis(spec, build_direct_controller, theta_max=0.3, theta_dot_max=1.0,
                         f_max=self.limits().u_max)

    def scheduler_fis(self, spec: dict | None = None) -> FuzzyInferenceSystem:
        spec = spec if spec is not None else self.data.get("surface", {})
        return self._fis(spec, build_gain_scheduler, error_max=0.3, kp_range=(20.0, 60.0),
                         kd_range=(2.0, 6.0))

    def controller(self) -> ControllerSpec:
        spec = dict(self.data.get("controller", {"kind": "none"}))
        kind = spec.get("kind", "none")
        allowed = {"kind", "kp", "ki", "kd", "fis", "fis_file", "theta_max", "theta_dot_max",
                   "f_max", "error_max", "kp_range", "kd_range"}
        unknown = sorted(set(spec) - allowed)
        if unknown:
            raise ConfigError(f"unknown controller keys: {', '.join(unknown)}")
        gains = PidGains(float(spec.get("kp", 0.0)), float(spec.get("ki", 0.0)), float(spec.get("kd", 0.0)))
        if kind == "none":
            return ControllerSpec()
        if kind == "pid":
            return ControllerSpec.pid(gains)
        if kind == "pd":
            if gains.ki:
                raise ConfigError("controller kind 'pd' conflicts with a nonzero 'ki'")
            return ControllerSpec.pd(gains)
        if kind == "fuzzy_direct":
            return ControllerSpec.fuzzy_direct(self.direct_fis(spec))
        if kind == "fuzzy_scheduled_pid":
            return ControllerSpec.fuzzy_scheduled_pid(self.scheduler_fis(spec), gains)
        raise ConfigError(f"unknown controller kind {kind!r}")

    def scenario(self) -> Scenario:
        d = self.data
        init = d.get("initial", {})
        if isinstance(init, dict):
            unknown = set(init) - set(PendulumState._fields)
            if unknown:
                raise ConfigError(f"unknown initial-state keys: {sorted(unknown)}")
            initial = PendulumState(**{k: float(v) for k, v in init.items()})
        else:
            initial = PendulumState(*init)
        dist = d.get("disturbance", {"kind": "none"})
        return Scenario(
            params=self.params(),
            model=d.get("model", "linear"),
            controller=self.controller(),
            limits=self.limits(),
            reference_theta=float(d.get("reference_theta", 0.0)),
            initial=initial,
            disturbance=Disturbance(**dist),
            duration=float(d.get("duration", 5.0)),
            dt=float(d.get("dt", 0.001)),
            metric_window_start=float(d.get("metric_window_start", 0.05)),
            control_every=int(d.get("control_every", 1)),
            drag=bool(d.get("drag", False)),
            pivot_friction=bool(d.get("pivot_friction", False)),
            filter_n=float(d.get("filter_n", 10.0)),
        )

    def resolved(self) -> dict:
        """The effective configuration, written as a provenance sidecar."""
        out = dict(self.data)
        out["params"] = self.params().to_dict()
        out.pop("params_file", None)
        out.pop("preset", None)
        return out
