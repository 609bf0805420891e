"""Shipped parameter sets and gains."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .control import PidGains
from .dynamics import PhysicalParams

PRESETS = ("default", "paper")


@lru_cache(maxsize=None)
def _load(name: str) -> dict:
    return json.loads(resources.files("pendctl.data").joinpath(name).read_text())


def paper_matched_record() -> dict:
    """Identified parameters reproducing the published poles, with provenance."""
    return _load("paper_matched.json")


def paper_matched_params() -> PhysicalParams:
    return PhysicalParams.from_dict(paper_matched_record()["params"])


def shipped_gains() -> dict:
    return _load("paper_matched_gains.json")


def shipped_pd_gains() -> PidGains:
    return PidGains.from_dict(shipped_gains()["pd"]["gains"])


def preset_params(name: str) -> PhysicalParams:
    if name == "default":
        return PhysicalParams()
    if name == "paper":
        return paper_matched_params()
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
