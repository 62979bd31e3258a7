"""On-disk prediction exchange format.

    {"predictions": [{"scenario": str, "target": int,
                      "modes": [{"prob": float, "traj": [[x, y], ...]}]}]}

Trajectories are global-frame meters; probabilities per record sum to 1.
"""

from __future__ import annotations

import json

import numpy as np

from .decoder import PredictionSet
from .tensor import Tensor


def write_predictions(path: str,
                      records: list[tuple[str, int, PredictionSet]]) -> None:
    doc = {"predictions": [
        {
            "scenario": sid,
            "target": int(target),
            "modes": [
                {"prob": float(pred.probs.data[k]),
                 "traj": pred.trajs.data[k].tolist()}
                for k in range(pred.num_modes)
            ],
        }
        for sid, target, pred in records
    ]}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_predictions(path: str) -> dict[tuple[str, int], PredictionSet]:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "predictions" not in doc:
        raise ValueError(f"{path}: missing top-level 'predictions' list")
    out: dict[tuple[str, int], PredictionSet] = {}
    for i, rec in enumerate(doc["predictions"]):
        try:
            sid = str(rec["scenario"])
            target = int(rec["target"])
            modes = rec["modes"]
            trajs = np.asarray([m["traj"] for m in modes], dtype=np.float64)
            probs = np.asarray([m["prob"] for m in modes], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: malformed prediction record {i} ({exc})") from None
        if trajs.ndim != 3 or trajs.shape[-1] != 2:
            raise ValueError(f"{path}: record {i} trajectories must be [K, T, 2]")
        out[(sid, target)] = PredictionSet(trajs=Tensor(trajs), probs=Tensor(probs))
    return out
