"""Serialization helpers: shortest round-trip numbers, atomic writes, report layouts."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .linear_analysis import RootLocusSample


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write to a temporary sibling and rename, so failures leave no partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def complex_list(values: Iterable[complex]) -> list[dict]:
    return [{"re": float(z.real), "im": float(z.imag)} for z in values]


def pole_zero_report(poles: Sequence[complex], zeros: Sequence[complex]) -> dict:
    return {"poles": complex_list(poles), "zeros": complex_list(zeros)}


def locus_csv(samples: Sequence[RootLocusSample]) -> str:
    n = max((len(s.closed_loop_poles) for s in samples), default=0)
    head = ["K"] + [f"{part}_{i}" for i in range(1, n + 1) for part in ("re", "im")]
    lines = [",".join(head)]
    for s in samples:
        cells = [repr(float(s.gain))]
        for z in s.closed_loop_poles:
            cells += [repr(float(z.real)), repr(float(z.imag))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def table_csv(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def sidecar_path(out: str | os.PathLike) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".config.json")
