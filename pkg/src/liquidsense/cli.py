"""Command-line front end: simulate, process, train, predict, evaluate, spectrogram.

Exit codes: 0 success, 1 runtime or data error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, InsufficientDataError, LiquidSenseError, NoPeakError
from .pipeline import PipelineConfig, analyse_trace, component_series, process_trace
from .predict import (
    SplineModel,
    evaluate_continuous,
    evaluate_discrete,
    fit_spline_samples,
    load_model,
    predict_continuous,
    save_model,
    train_classifier,
)
from .predict.classifier import C_GRID
from .simulator import GroundTruthCurve, default_curve, iter_dataset, scene_from_dict, write_dataset
from .spectrogram import stft
from .traceio import read_trace

log = logging.getLogger("liquidsense")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SPLITS = ("interleaved-levels", "half-per-class", "all")

# PipelineConfig fields exposed as --flag overrides, with their argparse types
_NUMERIC_FIELDS = {
    "f_start": float, "f_end": float, "sweep_duration": float, "padding": float, "packet_rate": float,
    "cutoff": float, "window_len": int, "overlap": int, "fft_len": int, "threshold_divisor": float,
    "verification_window": float, "min_peak_to_median": float, "edge_trim": float,
}


class UsageError(LiquidSenseError):
    """Bad combination of arguments or inputs that do not fit together."""


# -- JSON helpers --------------------------------------------------------------

def _schema(name: str) -> dict:
    text = resources.files("liquidsense").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _read_json(path, what: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {what} {path}: {e.strerror or e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e


def load_config(path, schema_name: str) -> dict:
    """Parse and schema-check a JSON config; errors name the offending field."""
    data = _read_json(path, "config")
    try:
        jsonschema.validate(data, _schema(schema_name))
    except jsonschema.ValidationError as e:
        where = ".".join(str(p) for p in e.absolute_path) or "<top level>"
        raise ConfigError(f"{path}: field '{where}': {e.message}") from e
    return data


def _finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _clean(obj):
    # JSON has no inf/nan
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    return _finite(obj)


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _write_json(obj, path) -> None:
    Path(path).write_text(_dumps(obj), encoding="utf-8")


# -- pipeline config -------------------------------------------------------------

def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline config JSON (see schemas/pipeline.schema.json)")
    for name, typ in _NUMERIC_FIELDS.items():
        p.add_argument("--" + name.replace("_", "-"), type=typ, default=None, dest=name,
                       help=f"override {name} (default {getattr(PipelineConfig, name)})")
    p.add_argument("--sweeps", nargs="+", choices=("up", "down"), default=None,
                   help="sweep order when the trace carries no sweep metadata")
    p.add_argument("--baseline-policy", choices=("auto", "none"), default=None, dest="baseline_policy")
    p.add_argument("--pair", nargs=2, type=int, default=None, metavar=("L", "S"),
                   help="fix the antenna pair instead of selecting it")


def pipeline_config(args) -> PipelineConfig:
    d = load_config(args.config, "pipeline") if args.config else {}
    names = {f.name for f in fields(PipelineConfig)}
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    return PipelineConfig.from_dict(d)


# -- simulate --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config, "simulation") if args.config else {}
    scene_d = dict(cfg.get("scene", {}))
    if args.noise_std is not None:
        scene_d["noise_std"] = args.noise_std
    if args.lag is not None:
        scene_d.setdefault("vibration", {})
        scene_d["vibration"] = dict(scene_d["vibration"], lag=args.lag)
    try:
        curve = GroundTruthCurve.from_dict(cfg["curve"]) if "curve" in cfg else default_curve()
        levels = cfg.get("levels", list(curve.levels))
        spl = args.sweeps_per_level or cfg.get("sweeps_per_level", 10)
        rate = args.packet_rate or cfg.get("packet_rate", 2000.0)
        # the base scene's resonance is replaced per level; seed it with one inside the band
        vib = dict(scene_d.get("vibration", {}))
        vib.setdefault("resonance_freq", curve.freqs[0])
        scene = scene_from_dict(dict(scene_d, vibration=vib))
        # everything is validated here, before the output directory is touched
        traces = iter_dataset(curve, scene, levels, spl, args.seed, rate)
    except LiquidSenseError as e:
        raise ConfigError(str(e)) from e
    manifest = write_dataset(traces, args.out, curve.capacity, count=len(levels) * spl)
    if args.json:
        sys.stdout.write(_dumps(manifest))
    else:
        print(f"wrote {len(manifest['traces'])} traces and manifest.json to {args.out}")
    return EXIT_OK


# -- process ---------------------------------------------------------------------

def _expand(patterns) -> list[str]:
    files = []
    for pat in patterns:
        hits = sorted(glob.glob(pat)) if glob.has_magic(pat) else [pat]
        if not hits:
            raise UsageError(f"no files match {pat!r}")
        files.extend(hits)
    return files


def _process_one(path: str, config: PipelineConfig, baseline) -> dict:
    rec = {"file": path}
    try:
        res = process_trace(read_trace(path), config, baseline)
    except NoPeakError as e:
        rec.update(status="no-peak", error=str(e))
    except (LiquidSenseError, OSError, ValueError) as e:
        rec.update(status="error", error=str(e))
    else:
        rec.update(status="ok", pair=list(res.pair), baseline_used=res.baseline_used, **res.estimate.to_dict())
    return rec


def cmd_process(args) -> int:
    config = pipeline_config(args)
    files = _expand(args.traces)
    baseline = read_trace(args.baseline) if args.baseline else None
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        # map keeps input order whatever the completion order
        records = list(pool.map(lambda f: _process_one(f, config, baseline), files))
    if args.out:
        _write_json(records, args.out)
    if args.json:
        sys.stdout.write(_dumps(records))
    else:
        for r in records:
            if r["status"] == "ok":
                print(f"{r['file']}  ok  f_up={r['f_up']:.2f}  f_down={r['f_down']:.2f}  "
                      f"f_resonance={r['f_resonance']:.2f}  quality={r['quality']:.1f}")
            else:
                print(f"{r['file']}  {r['status']}  {r.get('error', '')}")
    return EXIT_RUNTIME if any(r["status"] == "error" for r in records) else EXIT_OK


# -- datasets: manifest + estimates ------------------------------------------------

def load_manifest(path) -> tuple[dict, list[dict]]:
    m = _read_json(path, "manifest")
    if not isinstance(m, dict) or "traces" not in m:
        raise UsageError(f"{path}: not a dataset manifest (no 'traces')")
    base = Path(path).resolve().parent
    entries = []
    for e in m["traces"]:
        e = dict(e)
        e["path"] = str((base / e["file"]).resolve())
        entries.append(e)
    return m, entries


def _load_estimates(path) -> list[dict]:
    recs = _read_json(path, "estimates")
    if not isinstance(recs, list):
        raise UsageError(f"{path}: expected a JSON array of estimate records")
    return recs


def join_estimates(entries: list[dict], records: list[dict]) -> list[dict]:
    """Attach each manifest entry's labels to its estimate record (resolved path, then basename)."""
    by_path = {e["path"]: e for e in entries}
    by_name = {}
    for e in entries:
        by_name.setdefault(Path(e["file"]).name, []).append(e)
    rows = []
    for r in records:
        e = by_path.get(str(Path(r["file"]).resolve()))
        if e is None:
            cands = by_name.get(Path(r["file"]).name, [])
            if len(cands) != 1:
                raise UsageError(f"estimate {r['file']} has no unique manifest entry")
            e = cands[0]
        rows.append({**e, **r, "path": e["path"]})
    return rows


def split_rows(rows: list[dict], split: str, seed: int = 0) -> tuple[list[dict], list[dict]]:
    """Train/test partition.

    ``interleaved-levels``: of K sorted levels (1-based rank c) train on odd c
    below K-1 plus the top level, test on the rest (K=10 gives train
    {1,3,5,7,10}). ``half-per-class``: each class's rows shuffled with the seed,
    the first ceil(n/2) train. ``all``: everything trains and tests.
    """
    if split == "all":
        return list(rows), list(rows)
    if split == "interleaved-levels":
        levels = sorted({r["level_ml"] for r in rows})
        k = len(levels)
        if k < 3:
            raise UsageError("interleaved-levels split needs at least 3 levels")
        train_lv = {lv for c, lv in enumerate(levels, 1) if (c % 2 == 1 and c < k - 1) or c == k}
        return [r for r in rows if r["level_ml"] in train_lv], [r for r in rows if r["level_ml"] not in train_lv]
    if split == "half-per-class":
        rng = np.random.default_rng(seed)
        train_idx = set()
        for c in sorted({r["level_class"] for r in rows}):
            idx = [i for i, r in enumerate(rows) if r["level_class"] == c]
            perm = rng.permutation(len(idx))
            train_idx.update(idx[j] for j in perm[: (len(idx) + 1) // 2])
        return ([r for i, r in enumerate(rows) if i in train_idx],
                [r for i, r in enumerate(rows) if i not in train_idx])
    raise UsageError(f"unknown split {split!r}")


def _usable(rows: list[dict]) -> list[dict]:
    ok = [r for r in rows if r.get("status") == "ok"]
    dropped = len(rows) - len(ok)
    if dropped:
        log.warning("ignoring %d estimate(s) without a resonance peak", dropped)
    return ok


# -- train / predict / evaluate -------------------------------------------------------

def cmd_train(args) -> int:
    split = args.split or ("interleaved-levels" if args.mode == "continuous" else "half-per-class")
    if args.mode == "discrete" and split == "interleaved-levels":
        raise UsageError("discrete mode cannot use the interleaved-levels split: test classes would be unseen")
    manifest, entries = load_manifest(args.manifest)
    rows = join_estimates(entries, _load_estimates(args.estimates))
    train, test = split_rows(rows, split, args.seed)
    if args.split_out:
        _write_json({"split": split, "seed": args.seed, "train": [r["file"] for r in train],
                     "test": [r["file"] for r in test]}, args.split_out)
    train = _usable(train)
    if not train:
        raise InsufficientDataError("no usable training estimates")
    f = np.array([r["f_resonance"] for r in train], dtype=float)
    if args.mode == "continuous":
        model = fit_spline_samples(f, [r["level_ml"] for r in train], args.end_condition,
                                   capacity=float(manifest.get("capacity_ml", math.inf)))
        summary = f"spline over {model.freqs.size} knots"
    else:
        model = train_classifier(f, [r["level_class"] for r in train], args.c_grid)
        summary = f"classifier over {len(model.classes)} classes, C={model.C:g}"
    save_model(model, args.out)
    print(f"trained {summary} on {len(train)} samples ({split} split) -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    records = _load_estimates(args.estimates)
    if args.split_file:
        sp = _read_json(args.split_file, "split file")
        keep = set(sp["train"] if args.subset == "train" else sp["test"])
        records = [r for r in records if r["file"] in keep]
    kind = "spline" if isinstance(model, SplineModel) else "classifier"
    preds = []
    for r in records:
        p = {"file": r["file"], "f_resonance": r.get("f_resonance")}
        if r.get("status") != "ok":
            p.update(predicted=None, status=r.get("status", "error"))
        elif isinstance(model, SplineModel):
            lp = predict_continuous(model, r["f_resonance"])
            p.update(predicted=lp.level, out_of_range=lp.out_of_range, status="ok")
        else:
            p.update(predicted=int(model.predict([r["f_resonance"]])[0]), status="ok")
        preds.append(p)
    out = {"type": kind, "predictions": preds}
    if args.out:
        _write_json(out, args.out)
    if args.json or not args.out:
        sys.stdout.write(_dumps(out))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred = _read_json(args.predictions, "predictions")
    if not isinstance(pred, dict) or pred.get("type") not in ("spline", "classifier"):
        raise UsageError(f"{args.predictions}: not a predictions file")
    manifest, entries = load_manifest(args.manifest)
    rows = [r for r in join_estimates(entries, pred["predictions"]) if r.get("predicted") is not None]
    if not rows:
        raise UsageError("no predictions to evaluate")
    if pred["type"] == "spline":
        if "capacity_ml" not in manifest:
            raise UsageError("manifest has no capacity_ml; cannot evaluate continuous predictions")
        report = evaluate_continuous([r["predicted"] for r in rows], [r["level_ml"] for r in rows],
                                     float(manifest["capacity_ml"]))
    else:
        report = evaluate_discrete([r["predicted"] for r in rows], [r["level_class"] for r in rows])
    out = report.to_dict()
    out["files"] = [r["file"] for r in rows]
    if args.out:
        _write_json(out, args.out)
    sys.stdout.write(_dumps(out) if args.json else report.table() + "\n")
    return EXIT_OK


# -- spectrogram ---------------------------------------------------------------------

def cmd_spectrogram(args) -> int:
    config = pipeline_config(args)
    trace = read_trace(args.trace)
    baseline = read_trace(args.baseline) if args.baseline else None
    if args.sweep:
        specs, _, _, _, _ = analyse_trace(trace, config, baseline)
        if args.sweep not in specs:
            raise UsageError(f"trace has no {args.sweep} sweep")
        spec = specs[args.sweep]
    else:
        comp, keep, _, _ = component_series(trace, config)
        spec = stft(comp[keep], trace.packet_rate, config.window_len, config.overlap, config.fft_len,
                    t0=keep.start / trace.packet_rate)
    cols = spec.freq_bins <= (args.fmax if args.fmax is not None else np.inf)
    data = np.column_stack([spec.time_bins, spec.power[:, cols]])
    header = ",".join(["time_s"] + [f"{f:.10g}" for f in spec.freq_bins[cols]])
    np.savetxt(args.out, data, delimiter=",", header=header, comments="", fmt="%.10g")
    print(f"wrote {spec.power.shape[0]} x {int(cols.sum())} spectrogram to {args.out}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liquidsense", description="Liquid level sensing from WiFi CSI.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a labeled dataset")
    p.add_argument("--config", help="simulation config JSON (see schemas/simulation.schema.json)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweeps-per-level", type=int, default=None)
    p.add_argument("--packet-rate", type=float, default=None)
    p.add_argument("--noise-std", type=float, default=None)
    p.add_argument("--lag", type=float, default=None)
    p.add_argument("--json", action="store_true", help="print the manifest as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="estimate the resonance frequency of traces")
    p.add_argument("traces", nargs="+", help="trace files or glob patterns")
    _add_pipeline_flags(p)
    p.add_argument("--baseline", help="no-vibration trace for spectral subtraction")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--out", help="write the JSON records here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("train", help="fit a level model from estimates")
    p.add_argument("--manifest", required=True)
    p.add_argument("--estimates", required=True, help="output of 'process'")
    p.add_argument("--mode", choices=("continuous", "discrete"), required=True)
    p.add_argument("--split", choices=SPLITS, default=None,
                   help="default: interleaved-levels (continuous), half-per-class (discrete)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--end-condition", choices=("natural", "clamped"), default="natural")
    p.add_argument("--c-grid", type=float, nargs="+", default=list(C_GRID))
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--split-out", help="write the train/test file lists here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a model to estimates")
    p.add_argument("--model", required=True)
    p.add_argument("--estimates", required=True)
    p.add_argument("--split-file", help="split written by 'train --split-out'")
    p.add_argument("--subset", choices=("train", "test"), default="test")
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against the manifest labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("spectrogram", help="export the vibration spectrogram as CSV")
    p.add_argument("trace")
    _add_pipeline_flags(p)
    p.add_argument("--sweep", choices=("up", "down"), default=None)
    p.add_argument("--baseline")
    p.add_argument("--fmax", type=float, default=None, help="drop frequency columns above this")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrogram)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="warning: %(message)s")
    warnings.showwarning = _show_warning
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (LiquidSenseError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
