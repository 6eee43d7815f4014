"""Head-to-head experiment runner and report/plot-file emission.

One run takes a data source (a synthetic-campaign config or a CSV path),
pushes it once through the preprocessing chain (impute, scale on the
training span, split, window), trains both forecasters under identical
settings, and scores them on the chronological test tail. Reports are
plain JSON with stable key order and no timestamps, so identical inputs
and seed reproduce them byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from . import datapipe
from .datapipe import (
    TimeSeriesFrame,
    chronological_split,
    impute_all,
    load_timeseries,
    make_windows,
    minmax_fit,
    minmax_inverse,
    minmax_transform,
)
from .errors import DataError, ForecastError
from .graphs import FeatureGraph, serialize_graph, validate_graph
from .kernels import backend_name
from .metrics import compute_metrics
from .models import (
    ModelState,
    TrainConfig,
    build_rnn,
    build_stgnn,
    predict_series,
    save_checkpoint,
    train,
)
from .synth import SynthConfig, generate

REPORT_SCHEMA_VERSION = 1
PARAM_ENVELOPE = 30_000


def _fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ForecastError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def _boundary_straddles(records, cut: int) -> int:
    """Imputed training-span cells whose neighbor days reached across the
    train/test boundary."""
    n = 0
    for r in records:
        if r.filled and r.row < cut and any(r.row + off >= cut for off in r.offsets_used):
            n += 1
    return n


def run_experiment(source, graph: FeatureGraph, cfg: TrainConfig,
                   train_fraction: float = 0.8, outdir=None, verbose: bool = False):
    """Train and evaluate both models on one dataset.

    source is either a SynthConfig or a path to a delimited text file.
    Returns the report dict; when outdir is given, report.json, the plot
    files and both model checkpoints are written there.
    """
    say = print if verbose else (lambda *a, **k: None)

    if isinstance(source, SynthConfig):
        frame = _stage("synth", generate, source)
        source_desc = {"kind": "synth", "config": source.as_dict()}
    else:
        frame = _stage("ingest", load_timeseries, source, schema=list(graph.nodes))
        source_desc = {"kind": "file", "path": str(source)}
    _stage("graph", validate_graph, graph, frame.columns)

    frame, records = _stage("impute", impute_all, frame)
    unfilled = [r for r in records if not r.filled]
    if unfilled:
        cells = [(r.row, r.column) for r in unfilled[:8]]
        raise DataError(f"[impute] {len(unfilled)} gaps have no usable neighbors: {cells}")

    cut = int(np.floor(train_fraction * frame.n_rows))
    scaler = _stage("scale", minmax_fit, frame, columns=list(graph.nodes), fit_rows=(0, cut))
    scaled = _stage("scale", minmax_transform, frame, scaler)
    train_frame, test_frame = _stage("split", chronological_split, scaled, train_fraction)

    node_order = list(graph.nodes)
    target = graph.target
    win = {
        "rnn_train": make_windows(train_frame, target, cfg.seq_len, "flat", node_order),
        "rnn_test": make_windows(test_frame, target, cfg.seq_len, "flat", node_order),
        "stgnn_train": make_windows(train_frame, target, cfg.seq_len, "per_node", node_order),
        "stgnn_test": make_windows(test_frame, target, cfg.seq_len, "per_node", node_order),
    }

    rnn_state = ModelState.fresh(build_rnn(len(node_order), cfg), cfg)
    stgnn_state = ModelState.fresh(build_stgnn(graph, cfg), cfg)
    counts = {
        "rnn": rnn_state.model.param_count(),
        "stgnn": stgnn_state.model.param_count(),
    }
    say(f"[build] rnn parameters: {counts['rnn']}")
    say(f"[build] stgnn parameters: {counts['stgnn']} "
        f"(overhead {counts['stgnn'] - counts['rnn']}, envelope {PARAM_ENVELOPE})")

    say("[train] rnn ...")
    _stage("train", train, rnn_state, win["rnn_train"])
    say("[train] stgnn ...")
    _stage("train", train, stgnn_state, win["stgnn_train"])

    preds = {
        "rnn": predict_series(rnn_state.model, win["rnn_test"]),
        "stgnn": predict_series(stgnn_state.model, win["stgnn_test"]),
    }
    y_true = win["rnn_test"].targets
    scores = {name: compute_metrics(y_true, p) for name, p in preds.items()}
    for name, m in scores.items():
        say(f"[test] {name}: mse={m.mse:.6f} rmse={m.rmse:.6f} r2={m.r2}")

    stamp_rows = win["rnn_test"].source_indices
    stamps = [str(t) for t in test_frame.timestamps[stamp_rows]]
    cfg_json = json.dumps(cfg.as_dict(), sort_keys=True)
    graph_text = serialize_graph(graph)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "backend": backend_name(),
        "seed": cfg.seed,
        "source": source_desc,
        "config": cfg.as_dict(),
        "config_fingerprint": _fingerprint(cfg_json),
        "graph": graph_text,
        "graph_fingerprint": _fingerprint(graph_text),
        "train_fraction": train_fraction,
        "data": {
            "rows": frame.n_rows,
            "columns": list(frame.columns),
            "target": target,
            "train_rows": train_frame.n_rows,
            "test_rows": test_frame.n_rows,
            "test_windows": len(win["rnn_test"]),
            "imputed_cells": sum(1 for r in records if r.filled),
            "unfilled_cells": len(unfilled),
            "boundary_straddle_fills": _boundary_straddles(records, cut),
        },
        "models": {
            name: {
                "param_count": counts[name],
                "metrics": scores[name].as_dict(),
                "history": state.history,
            }
            for name, state in (("rnn", rnn_state), ("stgnn", stgnn_state))
        },
        "parameter_envelope": {
            "stgnn_minus_rnn": counts["stgnn"] - counts["rnn"],
            "limit": PARAM_ENVELOPE,
            "within": counts["stgnn"] - counts["rnn"] < PARAM_ENVELOPE,
        },
        "predictions": {
            "timestamps": stamps,
            "y_true": [float(v) for v in y_true],
            "rnn": [float(v) for v in preds["rnn"]],
            "stgnn": [float(v) for v in preds["stgnn"]],
            "y_true_celsius": [float(v) for v in minmax_inverse(y_true, scaler, target)],
            "rnn_celsius": [float(v) for v in minmax_inverse(preds["rnn"], scaler, target)],
            "stgnn_celsius": [float(v) for v in minmax_inverse(preds["stgnn"], scaler, target)],
        },
    }

    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_report(report, outdir / "report.json")
        emit_plot_data(report, outdir)
        save_checkpoint(rnn_state, outdir / "rnn.ckpt.npz", scaler=scaler,
                        feature_names=node_order, target_column=target)
        save_checkpoint(stgnn_state, outdir / "stgnn.ckpt.npz", scaler=scaler,
                        feature_names=node_order, target_column=target)
    return report


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def emit_plot_data(report: dict, outdir) -> list:
    """Write plot-ready files from a report.

    scatter_<model>.csv has columns observed,predicted (Celsius scale,
    one row per test window); timeseries.csv has timestamp,observed and
    one predicted column per model, same scale.
    """
    preds = report.get("predictions", {})
    needed = ("y_true_celsius", "rnn_celsius", "stgnn_celsius", "timestamps")
    if not all(k in preds for k in needed):
        raise DataError("report carries no inverse-scaled traces (missing scaler?)")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    observed = preds["y_true_celsius"]
    for name in ("rnn", "stgnn"):
        path = outdir / f"scatter_{name}.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("observed,predicted\n")
            for o, p in zip(observed, preds[f"{name}_celsius"]):
                fh.write(f"{o!r},{p!r}\n")
        written.append(path)
    path = outdir / "timeseries.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("timestamp,observed,rnn,stgnn\n")
        for t, o, a, b in zip(preds["timestamps"], observed,
                              preds["rnn_celsius"], preds["stgnn_celsius"]):
            fh.write(f"{t},{o!r},{a!r},{b!r}\n")
    written.append(path)
    return written


def default_output_dir(requested=None):
    """CLI output directory; the GHFORECAST_OUTDIR environment variable
    overrides the built-in default (never an explicit --outdir)."""
    if requested is not None:
        return Path(requested)
    return Path(os.environ.get("GHFORECAST_OUTDIR", "ghforecast-out"))
