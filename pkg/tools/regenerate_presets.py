"""Rebuild the shipped identified parameter set and its tuned gains.

    python tools/regenerate_presets.py
"""

import json
from pathlib import Path

from pendctl.dynamics import PhysicalParams
from pendctl.experiments import tune
from pendctl.identification import IdentProblem, identify

DATA = Path(__file__).resolve().parents[1] / "src" / "pendctl" / "data"
SEED = 0


def main():
    prob = IdentProblem()
    res = identify(prob, PhysicalParams(), seed=SEED)
    record = res.to_dict()
    record["provenance"]["problem"] = prob.to_dict()
    record["provenance"]["start"] = "default"
    (DATA / "paper_matched.json").write_text(json.dumps(record, indent=2) + "\n")

    gains = {mode: tune(res.params, mode, seed=SEED).to_dict() for mode in ("pd", "pid")}
    (DATA / "paper_matched_gains.json").write_text(json.dumps(gains, indent=2) + "\n")
    print(json.dumps({"residual": res.residual, **{m: g["gains"] for m, g in gains.items()}}, indent=2))


if __name__ == "__main__":
    main()
