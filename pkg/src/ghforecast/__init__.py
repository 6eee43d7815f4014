"""Greenhouse microclimate forecasting toolkit.

Compares a two-layer simple-recurrent forecaster against a directed
graph-attention + LSTM forecaster on 15-minute environmental series,
with the full preprocessing chain (gap imputation, min-max scaling,
stationarity checks, chronological splits, windowing) and a synthetic
campaign generator for benchmarking the two model families.
"""

from .adf import AdfReport, adf_test
from .datapipe import (
    ScalerParams,
    TimeSeriesFrame,
    WindowedDataset,
    chronological_split,
    impute_all,
    impute_directional_mean,
    load_timeseries,
    make_windows,
    minmax_fit,
    minmax_inverse,
    minmax_transform,
    write_timeseries,
)
from .experiment import emit_plot_data, run_experiment
from .graphs import (
    FeatureGraph,
    gh2_graph,
    gh4_graph,
    load_graph,
    parse_graph_config,
    serialize_graph,
    validate_graph,
)
from .metrics import Metrics, compute_metrics
from .models import (
    ModelState,
    RnnForecaster,
    StgnnForecaster,
    TrainConfig,
    build_rnn,
    build_stgnn,
    load_checkpoint,
    mask_target_node,
    predict_series,
    save_checkpoint,
    train,
)
from .synth import SynthConfig, generate, punch_gaps

__version__ = "0.1.0"

__all__ = [
    "AdfReport", "adf_test",
    "ScalerParams", "TimeSeriesFrame", "WindowedDataset",
    "chronological_split", "impute_all", "impute_directional_mean",
    "load_timeseries", "make_windows", "minmax_fit", "minmax_inverse",
    "minmax_transform", "write_timeseries",
    "emit_plot_data", "run_experiment",
    "FeatureGraph", "gh2_graph", "gh4_graph", "load_graph",
    "parse_graph_config", "serialize_graph", "validate_graph",
    "Metrics", "compute_metrics",
    "ModelState", "RnnForecaster", "StgnnForecaster", "TrainConfig",
    "build_rnn", "build_stgnn", "load_checkpoint", "mask_target_node",
    "predict_series", "save_checkpoint", "train",
    "SynthConfig", "generate", "punch_gaps",
    "__version__",
]
