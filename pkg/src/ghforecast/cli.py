"""Command-line surface.

Subcommands: synth, impute, adf, train, eval, compare, graph check.
Every command takes --seed where randomness is involved; identical seeds
and inputs reproduce outputs byte for byte. Exit status is 0 on success
and nonzero with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .adf import adf_test
from .datapipe import (
    chronological_split,
    impute_all,
    imputation_log_text,
    load_timeseries,
    make_windows,
    minmax_fit,
    minmax_transform,
    write_timeseries,
)
from .errors import ConfigError, ForecastError
from .experiment import (
    default_output_dir,
    emit_plot_data,
    run_experiment,
    write_report,
)
from .graphs import gh2_graph, gh4_graph, load_graph, to_dot, validate_graph
from .kernels import backend_name
from .metrics import compute_metrics
from .models import (
    ModelState,
    TrainConfig,
    build_rnn,
    build_stgnn,
    load_checkpoint,
    predict_series,
    save_checkpoint,
    train as train_model,
)
from .synth import SynthConfig, generate, punch_gaps, truth_table_text


def _resolve_graph(spec: str):
    if spec == "gh2":
        return gh2_graph()
    if spec == "gh4":
        return gh4_graph()
    return load_graph(spec)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seq-len", type=int, default=96)
    p.add_argument("--epochs", type=int, default=32)
    p.add_argument("--batch-size", type=int, default=96)
    p.add_argument("--validation-fraction", type=float, default=0.10)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--rnn-units", type=int, default=50)
    p.add_argument("--gat-hidden", type=int, default=8)
    p.add_argument("--gat-heads", type=int, default=4)
    p.add_argument("--lstm-hidden", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--leaky-slope", type=float, default=0.2)
    p.add_argument("--self-loops", choices=("isolated", "all", "none"), default="isolated")
    p.add_argument("--mask-mode", choices=("all_steps", "last_step"), default="all_steps")
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        seq_len=args.seq_len,
        epochs=args.epochs,
        batch_size=args.batch_size,
        validation_fraction=args.validation_fraction,
        dropout_rate=args.dropout,
        rnn_units=args.rnn_units,
        gat_hidden=args.gat_hidden,
        gat_heads=args.gat_heads,
        lstm_hidden=args.lstm_hidden,
        learning_rate=args.lr,
        leaky_slope=args.leaky_slope,
        self_loops=args.self_loops,
        mask_mode=args.mask_mode,
        shuffle=args.shuffle,
        seed=args.seed,
    )


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--regime", choices=("chain", "feedback"), default="chain")
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--gap-rate", type=float, default=0.01)
    p.add_argument("--season-phase", type=float, default=0.0)
    p.add_argument("--coupling", action="append", default=[], metavar="NAME=VALUE",
                   help="override one generator coupling (repeatable)")


def _synth_config(args) -> SynthConfig:
    couplings = {}
    for item in args.coupling:
        if "=" not in item:
            raise ConfigError(f"--coupling expects NAME=VALUE, got {item!r}")
        name, _, value = item.partition("=")
        couplings[name.strip()] = float(value)
    return SynthConfig(
        regime=args.regime,
        days=args.days,
        seed=args.seed,
        couplings=couplings,
        noise_std=args.noise_std,
        gap_rate=args.gap_rate,
        season_phase=args.season_phase,
    )


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_synth(args) -> int:
    cfg = _synth_config(args)
    frame = generate(cfg)
    write_timeseries(frame, args.out)
    print(f"wrote {frame.n_rows} rows x {len(frame.columns)} columns to {args.out}")
    if args.truth:
        clean_cfg = SynthConfig(**{**cfg.as_dict(), "gap_rate": 0.0})
        clean = generate(clean_cfg)
        gapped, truth = punch_gaps(clean, cfg)
        Path(args.truth).write_text(truth_table_text(gapped, truth), encoding="utf-8")
        print(f"wrote truth table with {len(truth)} gaps to {args.truth}")
    return 0


def _cmd_impute(args) -> int:
    frame = load_timeseries(args.input)
    columns = args.columns.split(",") if args.columns else None
    filled, records = impute_all(frame, columns)
    write_timeseries(filled, args.output)
    n_ok = sum(1 for r in records if r.filled)
    n_bad = len(records) - n_ok
    print(f"filled {n_ok} gaps, {n_bad} irrecoverable; wrote {args.output}")
    if args.log:
        Path(args.log).write_text(imputation_log_text(records), encoding="utf-8")
    return 0


def _cmd_adf(args) -> int:
    frame = load_timeseries(args.input)
    filled, _ = impute_all(frame, [args.column])
    report = adf_test(filled.column(args.column), max_lags=args.lags,
                      significance=args.significance, column=args.column)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


def _prepared_windows(args, graph, cfg, layout):
    frame = load_timeseries(args.input, schema=list(graph.nodes))
    frame, records = impute_all(frame)
    unfilled = sum(1 for r in records if not r.filled)
    if unfilled:
        raise ConfigError(f"{unfilled} gaps could not be imputed; fix the input first")
    cut = int(np.floor(args.train_fraction * frame.n_rows))
    scaler = minmax_fit(frame, columns=list(graph.nodes), fit_rows=(0, cut))
    scaled = minmax_transform(frame, scaler)
    train_frame, test_frame = chronological_split(scaled, args.train_fraction)
    node_order = list(graph.nodes)
    return (
        scaler,
        make_windows(train_frame, graph.target, cfg.seq_len, layout, node_order),
        make_windows(test_frame, graph.target, cfg.seq_len, layout, node_order),
    )


def _cmd_train(args) -> int:
    graph = _resolve_graph(args.graph)
    cfg = _train_config(args)
    if args.model == "rnn":
        model = build_rnn(graph.n_nodes, cfg)
        layout = "flat"
    else:
        model = build_stgnn(graph, cfg)
        layout = "per_node"
    scaler, train_win, test_win = _prepared_windows(args, graph, cfg, layout)
    print(f"[build] {args.model} parameters: {model.param_count()} (backend {backend_name()})")
    state = ModelState.fresh(model, cfg)
    train_model(state, train_win)
    preds = predict_series(model, test_win)
    m = compute_metrics(test_win.targets, preds)
    print(f"[test] mse={m.mse:.6f} rmse={m.rmse:.6f} r2={m.r2}")
    save_checkpoint(state, args.checkpoint, scaler=scaler,
                    feature_names=list(graph.nodes), target_column=graph.target)
    print(f"wrote checkpoint {args.checkpoint}")
    if args.report:
        write_report({
            "schema_version": 1,
            "command": "train",
            "model": args.model,
            "config": cfg.as_dict(),
            "metrics": m.as_dict(),
            "history": state.history,
            "param_count": model.param_count(),
        }, args.report)
    return 0


def _cmd_eval(args) -> int:
    state, scaler, meta = load_checkpoint(args.checkpoint)
    if scaler is None or meta["feature_names"] is None:
        raise ConfigError("checkpoint carries no scaler/schema; cannot evaluate raw files")
    frame = load_timeseries(args.input, schema=meta["feature_names"])
    frame, records = impute_all(frame)
    if any(not r.filled for r in records):
        raise ConfigError("input has irrecoverable gaps")
    scaled = minmax_transform(frame, scaler)
    layout = state.model.layout
    windows = make_windows(scaled, meta["target_column"], state.cfg.seq_len,
                           layout, meta["feature_names"])
    preds = predict_series(state.model, windows)
    m = compute_metrics(windows.targets, preds)
    print(f"[eval] {state.model.kind} on {args.input}: "
          f"mse={m.mse:.6f} rmse={m.rmse:.6f} r2={m.r2} n={m.n}")
    if args.report:
        write_report({
            "schema_version": 1,
            "command": "eval",
            "model": state.model.kind,
            "input": str(args.input),
            "metrics": m.as_dict(),
        }, args.report)
    return 0


def _cmd_compare(args) -> int:
    cfg = _train_config(args)
    if args.input:
        if not args.graph:
            raise ConfigError("--graph is required when comparing on a file")
        graph = _resolve_graph(args.graph)
        source = args.input
    else:
        graph = _resolve_graph(args.graph) if args.graph else (
            gh2_graph() if args.regime == "chain" else gh4_graph()
        )
        source = _synth_config(args)
    outdir = default_output_dir(args.outdir)
    report = run_experiment(source, graph, cfg, train_fraction=args.train_fraction,
                            outdir=outdir, verbose=True)
    rnn_r2 = report["models"]["rnn"]["metrics"]["r2"]
    stgnn_r2 = report["models"]["stgnn"]["metrics"]["r2"]
    print(f"[compare] rnn r2={rnn_r2} stgnn r2={stgnn_r2}; report in {outdir}")
    return 0


def _cmd_graph_check(args) -> int:
    graph = _resolve_graph(args.graph)
    print(f"graph ok: {graph.n_nodes} nodes, {len(graph.edges)} edges, target {graph.target}")
    if args.input:
        frame = load_timeseries(args.input)
        validate_graph(graph, frame.columns)
        print(f"matches columns of {args.input}")
    if args.emit_dot:
        Path(args.emit_dot).write_text(to_dot(graph), encoding="utf-8")
        print(f"wrote {args.emit_dot}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghforecast",
        description="Greenhouse microclimate forecasting: temporal vs. directed-graph models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic campaign CSV")
    _add_synth_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None, help="also write the gap truth table here")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("impute", help="fill gaps from the same time of day on neighbor days")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--columns", default=None, help="comma-separated subset (default: all)")
    p.add_argument("--log", default=None, help="write the imputation log here")
    p.set_defaults(fn=_cmd_impute)

    p = sub.add_parser("adf", help="stationarity test for one column")
    p.add_argument("--input", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--lags", type=int, default=4)
    p.add_argument("--significance", type=float, default=0.01)
    p.set_defaults(fn=_cmd_adf)

    p = sub.add_parser("train", help="train one model on a CSV file")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=("rnn", "stgnn"), required=True)
    p.add_argument("--graph", required=True, help="graph config path, or gh2/gh4")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", default=None)
    _add_train_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a CSV file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("compare", help="train and score both models on the same data")
    p.add_argument("--input", default=None, help="CSV path (default: synthesize)")
    p.add_argument("--graph", default=None, help="graph config path, or gh2/gh4")
    p.add_argument("--outdir", default=None,
                   help="output directory (env GHFORECAST_OUTDIR overrides the default)")
    _add_synth_flags(p)
    _add_train_flags(p)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("graph", help="graph utilities")
    gsub = p.add_subparsers(dest="graph_command", required=True)
    g = gsub.add_parser("check", help="validate a graph config")
    g.add_argument("--graph", required=True, help="graph config path, or gh2/gh4")
    g.add_argument("--input", default=None, help="CSV to validate column names against")
    g.add_argument("--emit-dot", default=None, help="write a dot-format description")
    g.set_defaults(fn=_cmd_graph_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ForecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
