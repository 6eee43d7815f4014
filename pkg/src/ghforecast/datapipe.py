"""Preprocessing chain for 15-minute environmental series.

Ingestion snaps records onto a strict quarter-hour grid (absent stamps
become explicit missing cells), gaps are filled from the same time of day
on the two previous and two following days, features are min-max scaled
with parameters fitted on training rows only, and sliding windows are cut
in either a flat (window x feature) or per-node layout.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, IngestError
from .nn import as_f64

STEP = np.timedelta64(15, "m")
STEPS_PER_DAY = 96

# same quarter-hour on the two previous and two following days, in row offsets
NEIGHBOR_OFFSETS = (-2 * STEPS_PER_DAY, -STEPS_PER_DAY, STEPS_PER_DAY, 2 * STEPS_PER_DAY)


@dataclass
class TimeSeriesFrame:
    """Multivariate series on a strict 15-minute grid. Missing cells are
    NaN; the grid never has absent rows."""

    timestamps: np.ndarray  # datetime64[s], strictly increasing, 15-min spacing
    columns: list
    values: np.ndarray  # (rows, len(columns)) float64, NaN = missing

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[s]")
        self.values = as_f64(self.values)
        if self.values.shape != (self.timestamps.size, len(self.columns)):
            raise DataError(
                f"values {self.values.shape} vs {self.timestamps.size} stamps "
                f"x {len(self.columns)} columns"
            )
        if len(set(self.columns)) != len(self.columns):
            raise DataError("duplicate column names")
        if self.timestamps.size > 1:
            deltas = np.diff(self.timestamps)
            if not np.all(deltas == STEP):
                raise DataError("timestamps are not a uniform 15-minute grid")

    @property
    def n_rows(self) -> int:
        return self.timestamps.size

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"unknown column {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def slice_rows(self, start: int, stop: int) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            self.timestamps[start:stop], list(self.columns), self.values[start:stop].copy()
        )

    def copy(self) -> "TimeSeriesFrame":
        return TimeSeriesFrame(self.timestamps.copy(), list(self.columns), self.values.copy())


# ---------------------------------------------------------------------------
# ingestion


def load_timeseries(path, schema=None, delimiter=",") -> TimeSeriesFrame:
    """Read a delimited text file with a header and ISO timestamps.

    The first column is the timestamp; empty fields are missing values.
    Stamps absent from the quarter-hour grid are inserted as all-missing
    rows. schema, when given, is the exact set of data columns expected.
    """
    try:
        df = pd.read_csv(path, sep=delimiter)
    except Exception as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if df.shape[1] < 2:
        raise IngestError("need a timestamp column plus at least one data column")
    ts_col = df.columns[0]
    try:
        stamps = pd.to_datetime(df[ts_col], format="ISO8601")
    except Exception as exc:
        raise IngestError(f"bad timestamp in column {ts_col!r}: {exc}") from exc
    dup = stamps.duplicated()
    if dup.any():
        rows = [int(i) + 2 for i in np.flatnonzero(dup.to_numpy())[:5]]  # 1-based + header
        raise IngestError(f"duplicate timestamps at file rows {rows}")
    if not stamps.is_monotonic_increasing:
        bad = int(np.flatnonzero(np.diff(stamps.to_numpy()) < np.timedelta64(0, "s"))[0]) + 3
        raise IngestError(f"timestamps not increasing near file row {bad}")
    offsets = (stamps - stamps.iloc[0]).to_numpy()
    if np.any(offsets % STEP != np.timedelta64(0, "s")):
        raise IngestError("timestamps do not align with the 15-minute grid")

    data_cols = [c for c in df.columns if c != ts_col]
    if schema is not None:
        expected, got = set(schema), set(data_cols)
        if expected - got:
            raise IngestError(f"missing columns: {sorted(expected - got)}")
        if got - expected:
            raise IngestError(f"unexpected columns: {sorted(got - expected)}")
    try:
        raw = df[data_cols].astype(np.float64)
    except (TypeError, ValueError) as exc:
        raise IngestError(f"non-numeric data value: {exc}") from exc

    grid = pd.date_range(stamps.iloc[0], stamps.iloc[-1], freq="15min")
    full = raw.set_index(stamps).reindex(grid)
    return TimeSeriesFrame(grid.to_numpy(), data_cols, full.to_numpy())


def write_timeseries(frame: TimeSeriesFrame, path, timestamp_column="timestamp") -> None:
    """Write the frame in the same delimited format load_timeseries reads."""
    df = pd.DataFrame(frame.values, columns=frame.columns)
    df.insert(0, timestamp_column, pd.DatetimeIndex(frame.timestamps).strftime("%Y-%m-%dT%H:%M:%S"))
    df.to_csv(path, index=False, na_rep="")


# ---------------------------------------------------------------------------
# gap imputation


@dataclass
class ImputationRecord:
    row: int
    column: str
    timestamp: str
    filled: bool
    n_neighbors: int
    offsets_used: tuple
    value: float | None

    def as_dict(self):
        return {
            "row": self.row,
            "column": self.column,
            "timestamp": self.timestamp,
            "filled": self.filled,
            "n_neighbors": self.n_neighbors,
            "offsets_used": list(self.offsets_used),
            "value": self.value,
        }


def impute_directional_mean(frame: TimeSeriesFrame, column: str):
    """Fill gaps in one column from the same quarter-hour at -48h, -24h,
    +24h and +48h, averaging whichever of the four exist and were
    observed. Cells with no usable neighbor stay missing and are logged.

    Fills read the original (pre-imputation) values only, so they never
    cascade. Returns (new frame, list of ImputationRecord).
    """
    ci = frame.column_index(column)
    out = frame.copy()
    col = out.values[:, ci]
    original = frame.values[:, ci]
    records = []
    for row in np.flatnonzero(np.isnan(original)):
        neighbors, used = [], []
        for off in NEIGHBOR_OFFSETS:
            j = row + off
            if 0 <= j < original.size and not np.isnan(original[j]):
                neighbors.append(original[j])
                used.append(off)
        stamp = str(frame.timestamps[row])
        if neighbors:
            value = float(np.mean(neighbors))
            col[row] = value
            records.append(ImputationRecord(int(row), column, stamp, True,
                                            len(neighbors), tuple(used), value))
        else:
            records.append(ImputationRecord(int(row), column, stamp, False, 0, (), None))
    return out, records


def impute_all(frame: TimeSeriesFrame, columns=None):
    """Run impute_directional_mean over several columns (default: all)."""
    records = []
    out = frame
    for name in columns if columns is not None else frame.columns:
        out, recs = impute_directional_mean(out, name)
        records.extend(recs)
    return out, records


def imputation_log_text(records) -> str:
    """Imputation log as structured text (one JSON object per line)."""
    return "\n".join(json.dumps(r.as_dict(), sort_keys=True) for r in records) + ("\n" if records else "")


# ---------------------------------------------------------------------------
# min-max scaling


@dataclass
class ScalerParams:
    columns: tuple
    mins: np.ndarray
    maxs: np.ndarray
    fit_start: int
    fit_stop: int

    def column_position(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"column {name!r} was not fitted") from None


_EPS = 1e-12


def minmax_fit(frame: TimeSeriesFrame, columns=None, fit_rows=None) -> ScalerParams:
    """Fit per-column min/max on fit_rows, a (start, stop) row span
    defaulting to the whole frame. Fit rows must be gap free."""
    cols = list(columns) if columns is not None else list(frame.columns)
    start, stop = (0, frame.n_rows) if fit_rows is None else fit_rows
    if not (0 <= start < stop <= frame.n_rows):
        raise ConfigError(f"bad fit span ({start}, {stop}) for {frame.n_rows} rows")
    idx = [frame.column_index(c) for c in cols]
    block = frame.values[start:stop][:, idx]
    if np.isnan(block).any():
        raise DataError("fit span contains missing cells; impute first")
    mins = block.min(axis=0)
    maxs = block.max(axis=0)
    for c, lo, hi in zip(cols, mins, maxs):
        if hi - lo < _EPS:
            warnings.warn(f"column {c!r} is constant over the fit span; it scales to 0")
    return ScalerParams(tuple(cols), mins, maxs, start, stop)


def minmax_transform(frame: TimeSeriesFrame, scaler: ScalerParams) -> TimeSeriesFrame:
    """Map each fitted column so the fit-span min is 0 and max is 1.
    Values outside the fit span may land outside [0, 1]."""
    out = frame.copy()
    for pos, name in enumerate(scaler.columns):
        ci = frame.column_index(name)
        span = max(scaler.maxs[pos] - scaler.mins[pos], _EPS)
        out.values[:, ci] = (frame.values[:, ci] - scaler.mins[pos]) / span
    return out


def minmax_inverse(values, scaler: ScalerParams, column: str) -> np.ndarray:
    """Undo the transform for one column's values (arrays or scalars)."""
    pos = scaler.column_position(column)
    span = max(scaler.maxs[pos] - scaler.mins[pos], _EPS)
    return as_f64(values) * span + scaler.mins[pos]


def minmax_inverse_frame(frame: TimeSeriesFrame, scaler: ScalerParams) -> TimeSeriesFrame:
    out = frame.copy()
    for name in scaler.columns:
        ci = frame.column_index(name)
        out.values[:, ci] = minmax_inverse(frame.values[:, ci], scaler, name)
    return out


# ---------------------------------------------------------------------------
# splitting and windowing


def chronological_split(frame: TimeSeriesFrame, train_fraction: float = 0.8):
    """First floor(fraction * rows) rows train, the rest test. The
    boundary row goes to the test side. Never shuffles."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train fraction must be in (0, 1), got {train_fraction}")
    cut = int(np.floor(train_fraction * frame.n_rows))
    return frame.slice_rows(0, cut), frame.slice_rows(cut, frame.n_rows)


LAYOUTS = ("flat", "per_node")


@dataclass
class WindowedDataset:
    """Sliding windows of length seq_len with the next-step target value.

    window i covers rows [i, i+T) and its target is row i+T of the target
    column; source_indices records that target row. flat inputs are
    (n, T, F); per_node inputs are (n, T, N, 1) ordered like
    feature_names.
    """

    layout: str
    inputs: np.ndarray
    targets: np.ndarray
    source_indices: np.ndarray
    feature_names: list
    target_column: str

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ConfigError(f"unknown layout {self.layout!r}")

    def __len__(self) -> int:
        return self.targets.size

    @property
    def seq_len(self) -> int:
        return self.inputs.shape[1]

    def save(self, path) -> None:
        np.savez(
            path,
            layout=np.str_(self.layout),
            inputs=self.inputs,
            targets=self.targets,
            source_indices=self.source_indices,
            feature_names=np.asarray(self.feature_names),
            target_column=np.str_(self.target_column),
        )

    @classmethod
    def load(cls, path) -> "WindowedDataset":
        with np.load(path, allow_pickle=False) as z:
            return cls(
                layout=str(z["layout"]),
                inputs=z["inputs"],
                targets=z["targets"],
                source_indices=z["source_indices"],
                feature_names=[str(s) for s in z["feature_names"]],
                target_column=str(z["target_column"]),
            )


def make_windows(frame: TimeSeriesFrame, target_column: str, seq_len: int,
                 layout: str = "flat", node_order=None) -> WindowedDataset:
    """Cut rows - seq_len windows from a fully imputed frame.

    node_order fixes the feature/node ordering (mandatory for per_node,
    where it must be the graph's node order); flat defaults to the frame's
    column order.
    """
    if layout not in LAYOUTS:
        raise ConfigError(f"unknown layout {layout!r}")
    if frame.n_rows <= seq_len:
        raise DataError(f"{frame.n_rows} rows cannot fit windows of length {seq_len}")
    mask = frame.missing_mask
    if mask.any():
        where = np.argwhere(mask)[:8]
        cells = [(int(r), frame.columns[int(c)]) for r, c in where]
        raise DataError(f"frame still has missing cells (first few: {cells})")
    order = list(node_order) if node_order is not None else list(frame.columns)
    if layout == "per_node" and node_order is None:
        raise ConfigError("per_node layout needs an explicit node order")
    idx = [frame.column_index(c) for c in order]
    data = frame.values[:, idx]
    n = frame.n_rows - seq_len
    view = np.lib.stride_tricks.sliding_window_view(data, seq_len, axis=0)
    inputs = np.ascontiguousarray(view[:n].transpose(0, 2, 1))  # (n, T, F)
    if layout == "per_node":
        inputs = inputs.reshape(n, seq_len, len(order), 1)
    ti = order.index(target_column) if target_column in order else None
    if ti is None:
        raise DataError(f"target column {target_column!r} not among features")
    targets = data[seq_len:, ti].copy()
    return WindowedDataset(
        layout=layout,
        inputs=inputs,
        targets=targets,
        source_indices=np.arange(seq_len, frame.n_rows, dtype=np.int64),
        feature_names=order,
        target_column=target_column,
    )
