"""JSON persistence for fitted models.

Floats go through ``json`` (shortest repr), which round-trips IEEE doubles
exactly. Output is key-sorted so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError, ModelVersionError
from .classifier import ClassifierModel, PairwiseFunction
from .spline import SplineModel

SCHEMA_VERSION = 1


def _num(v: float):
    # JSON has no infinity; an unbounded capacity is stored as null
    return None if math.isinf(v) else float(v)


def model_to_dict(model) -> dict:
    if isinstance(model, SplineModel):
        return {
            "type": "spline",
            "version": SCHEMA_VERSION,
            "end_condition": model.end_condition,
            "end_slopes": list(model.end_slopes) if model.end_slopes is not None else None,
            "capacity": _num(model.capacity),
            "knots": [[float(f), float(lv)] for f, lv in zip(model.freqs, model.levels)],
            "coefficients": [[float(c) for c in row] for row in model.coeffs],
        }
    if isinstance(model, ClassifierModel):
        return {
            "type": "classifier",
            "version": SCHEMA_VERSION,
            "classes": list(model.classes),
            "C": model.C,
            "mean": [float(v) for v in model.mean],
            "scale": [float(v) for v in model.scale],
            "pairs": [
                {"lower": fn.lower, "upper": fn.upper, "weight": list(fn.weight), "bias": fn.bias}
                for fn in model.functions
            ],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d: dict):
    if not isinstance(d, dict) or "type" not in d or "version" not in d:
        raise ModelFormatError("model file needs 'type' and 'version' fields")
    if d["version"] != SCHEMA_VERSION:
        raise ModelVersionError(f"model schema version {d['version']} not supported (expected {SCHEMA_VERSION})")
    try:
        if d["type"] == "spline":
            knots = np.asarray(d["knots"], dtype=float)
            cap = d.get("capacity")
            return SplineModel(
                freqs=knots[:, 0],
                levels=knots[:, 1],
                coeffs=np.asarray(d["coefficients"], dtype=float),
                end_condition=d["end_condition"],
                end_slopes=tuple(d["end_slopes"]) if d.get("end_slopes") is not None else None,
                capacity=float("inf") if cap is None else float(cap),
            )
        if d["type"] == "classifier":
            fns = tuple(
                PairwiseFunction(int(p["lower"]), int(p["upper"]), tuple(float(w) for w in p["weight"]),
                                 float(p["bias"]))
                for p in d["pairs"]
            )
            return ClassifierModel(
                classes=tuple(int(c) for c in d["classes"]),
                functions=fns,
                mean=np.asarray(d["mean"], dtype=float),
                scale=np.asarray(d["scale"], dtype=float),
                C=float(d["C"]),
            )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ModelFormatError(f"malformed {d['type']} model: {e}") from e
    raise ModelFormatError(f"unknown model type {d['type']!r}")


def dumps_model(model) -> str:
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n"


def save_model(model, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    return model_from_dict(d)
