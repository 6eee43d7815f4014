"""The two forecasters and their training machinery.

The temporal baseline stacks two 50-unit recurrent layers with dropout
between them and a linear scalar head. The graph model applies shared
multi-head attention over the feature graph at every step of the window
(with the target node's feature zeroed to prevent leakage), feeds the
stacked per-step node features to an LSTM, and reads the final hidden
state out through dropout and a linear head.

Training is plain mini-batch Adam on MSE with a chronological-tail
validation split, deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .datapipe import ScalerParams, WindowedDataset
from .errors import ConfigError, DataError, DivergenceError, GraphError, UsageError
from .graphs import FeatureGraph, parse_graph_config, serialize_graph
from .layers import DenseHead, GatLayer, LstmLayer, RnnLayer
from .nn import AdamState, adam_step, dropout_mask, mse_loss

MASK_MODES = ("all_steps", "last_step")


@dataclass
class TrainConfig:
    """Training protocol and architecture sizes. The defaults reproduce
    the evaluation protocol: 96-step windows, 32 epochs, batch 96,
    four attention heads, 10% validation tail."""

    seq_len: int = 96
    epochs: int = 32
    batch_size: int = 96
    validation_fraction: float = 0.10
    dropout_rate: float = 0.2
    rnn_units: int = 50
    gat_hidden: int = 8
    gat_heads: int = 4
    lstm_hidden: int = 32
    learning_rate: float = 1e-3
    leaky_slope: float = 0.2
    self_loops: str = "isolated"
    mask_mode: str = "all_steps"
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.seq_len < 1:
            raise ConfigError("seq_len must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in [0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.mask_mode not in MASK_MODES:
            raise ConfigError(f"mask_mode must be one of {MASK_MODES}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        return cls(**d)


# ---------------------------------------------------------------------------
# target masking


def mask_target_node(x, graph: FeatureGraph, node: str | None = None) -> np.ndarray:
    """Zero the target node's feature row of one (N, F) step. Other rows
    are preserved bit-exact."""
    name = graph.target if node is None else node
    idx = graph.node_index(name)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != graph.n_nodes:
        raise GraphError(f"step features {x.shape} vs {graph.n_nodes} nodes")
    out = x.copy()
    out[idx, :] = 0.0
    return out


def _mask_windows(x, target_index: int, mode: str) -> np.ndarray:
    """Batched masking of (B, T, N, F) windows per the configured scope."""
    out = x.copy()
    if mode == "all_steps":
        out[:, :, target_index, :] = 0.0
    else:  # last_step
        out[:, -1, target_index, :] = 0.0
    return out


# ---------------------------------------------------------------------------
# forecasters


class RnnForecaster:
    """Two stacked recurrent layers, dropout between and after, scalar head."""

    kind = "rnn"
    layout = "flat"

    def __init__(self, n_features: int, cfg: TrainConfig, rng: np.random.Generator):
        self.n_features = n_features
        self.cfg = cfg
        self.layer1 = RnnLayer(n_features, cfg.rnn_units, rng)
        self.layer2 = RnnLayer(cfg.rnn_units, cfg.rnn_units, rng)
        self.head = DenseHead(cfg.rnn_units, rng)
        self._masks = None

    def groups(self):
        return {"layer1": self.layer1, "layer2": self.layer2, "head": self.head}

    def param_count(self) -> int:
        return sum(p.size for layer in self.groups().values() for p in layer.params.values())

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.n_features:
            raise UsageError(f"expected (B, T, {self.n_features}) windows, got {x.shape}")
        xt = np.ascontiguousarray(x.transpose(1, 0, 2))
        h1 = self.layer1.forward(xt)
        m1 = m2 = None
        if train and self.cfg.dropout_rate > 0.0:
            m1 = dropout_mask(h1.shape, self.cfg.dropout_rate, rng)
            h1 = h1 * m1
        h2 = self.layer2.forward(h1)
        last = h2[-1]
        if train and self.cfg.dropout_rate > 0.0:
            m2 = dropout_mask(last.shape, self.cfg.dropout_rate, rng)
            last = last * m2
        self._masks = (m1, m2, h2.shape)
        return self.head.forward(last)

    def backward(self, dy):
        if self._masks is None:
            raise UsageError("backward before forward")
        m1, m2, h2_shape = self._masks
        dlast = self.head.backward(dy)
        if m2 is not None:
            dlast = dlast * m2
        dh2 = np.zeros(h2_shape)
        dh2[-1] = dlast
        dh1 = self.layer2.backward(dh2)
        if m1 is not None:
            dh1 = dh1 * m1
        self.layer1.backward(np.ascontiguousarray(dh1))


class StgnnForecaster:
    """Per-step graph attention (target node masked), LSTM over the
    stacked node features, dropout, scalar head."""

    kind = "stgnn"
    layout = "per_node"

    def __init__(self, graph: FeatureGraph, cfg: TrainConfig, rng: np.random.Generator):
        self.graph = graph
        self.cfg = cfg
        self.target_index = graph.node_index(graph.target)
        self.gat = GatLayer(graph, 1, cfg.gat_hidden, cfg.gat_heads, rng,
                            leaky_slope=cfg.leaky_slope, self_loops=cfg.self_loops)
        lstm_in = cfg.gat_hidden * cfg.gat_heads * graph.n_nodes
        self.lstm = LstmLayer(lstm_in, cfg.lstm_hidden, rng)
        self.head = DenseHead(cfg.lstm_hidden, rng)
        self._cache = None

    def groups(self):
        return {"gat": self.gat, "lstm": self.lstm, "head": self.head}

    def param_count(self) -> int:
        return sum(p.size for layer in self.groups().values() for p in layer.params.values())

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[2] != self.graph.n_nodes or x.shape[3] != 1:
            raise UsageError(
                f"expected (B, T, {self.graph.n_nodes}, 1) windows, got {x.shape}"
            )
        B, T = x.shape[0], x.shape[1]
        N = self.graph.n_nodes
        K, H = self.cfg.gat_heads, self.cfg.gat_hidden
        xm = _mask_windows(x, self.target_index, self.cfg.mask_mode)
        # node-major for the attention kernel; the collapsed batch axis is (b, t)
        nodes = np.ascontiguousarray(xm.transpose(2, 0, 1, 3)).reshape(N, B * T, 1)
        g = self.gat.forward(nodes)  # (K, N, B*T, H)
        # per-step node features flattened in (node, head, hidden) order
        seq = np.ascontiguousarray(
            g.reshape(K, N, B, T, H).transpose(3, 2, 1, 0, 4)
        ).reshape(T, B, N * K * H)
        h = self.lstm.forward(seq)
        last = h[-1]
        m = None
        if train and self.cfg.dropout_rate > 0.0:
            m = dropout_mask(last.shape, self.cfg.dropout_rate, rng)
            last = last * m
        self._cache = (B, T, m, h.shape)
        return self.head.forward(last)

    def backward(self, dy, need_dx=False):
        if self._cache is None:
            raise UsageError("backward before forward")
        B, T, m, h_shape = self._cache
        N = self.graph.n_nodes
        K, H = self.cfg.gat_heads, self.cfg.gat_hidden
        dlast = self.head.backward(dy)
        if m is not None:
            dlast = dlast * m
        dh = np.zeros(h_shape)
        dh[-1] = dlast
        dseq = self.lstm.backward(dh)
        dg = np.ascontiguousarray(
            dseq.reshape(T, B, N, K, H).transpose(3, 2, 1, 0, 4)
        ).reshape(K, N, B * T, H)
        dx = self.gat.backward(dg, need_dx=need_dx)
        if need_dx:
            dxb = np.ascontiguousarray(dx.reshape(N, B, T, 1).transpose(1, 2, 0, 3))
            # masked positions contribute nothing to the pre-mask input
            if self.cfg.mask_mode == "all_steps":
                dxb[:, :, self.target_index, :] = 0.0
            else:
                dxb[:, -1, self.target_index, :] = 0.0
            return dxb
        return None


def build_rnn(n_features: int, cfg: TrainConfig) -> RnnForecaster:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 1])))
    return RnnForecaster(n_features, cfg, rng)


def build_stgnn(graph: FeatureGraph, cfg: TrainConfig) -> StgnnForecaster:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 2])))
    return StgnnForecaster(graph, cfg, rng)


# ---------------------------------------------------------------------------
# training


@dataclass
class ModelState:
    """A forecaster plus everything training accumulates around it."""

    model: object
    cfg: TrainConfig
    adam: dict
    epoch: int = 0
    history: dict = field(default_factory=lambda: {"train": [], "val": []})
    val_indices: np.ndarray | None = None

    @classmethod
    def fresh(cls, model, cfg: TrainConfig) -> "ModelState":
        adam = {
            name: AdamState.for_params(layer.params, lr=cfg.learning_rate)
            for name, layer in model.groups().items()
        }
        return cls(model=model, cfg=cfg, adam=adam)


def _forward_in_chunks(model, inputs, chunk: int) -> np.ndarray:
    preds = np.empty(inputs.shape[0])
    for i in range(0, inputs.shape[0], chunk):
        preds[i : i + chunk] = model.forward(inputs[i : i + chunk], train=False)
    return preds


def train(state: ModelState, dataset: WindowedDataset, cfg: TrainConfig | None = None) -> ModelState:
    """Run the full epoch loop. The last validation_fraction of the
    windows is held out chronologically and scored after every epoch."""
    cfg = cfg if cfg is not None else state.cfg
    model = state.model
    if len(dataset) == 0:
        raise DataError("empty dataset")
    if dataset.layout != model.layout:
        raise UsageError(
            f"{model.kind} needs {model.layout!r} windows, got {dataset.layout!r}"
        )
    n = len(dataset)
    n_val = int(np.floor(cfg.validation_fraction * n))
    n_train = n - n_val
    if n_train < 1:
        raise DataError("validation split leaves no training windows")
    state.val_indices = np.arange(n_train, n, dtype=np.int64)
    x_train, y_train = dataset.inputs[:n_train], dataset.targets[:n_train]
    x_val, y_val = dataset.inputs[n_train:], dataset.targets[n_train:]

    dropout_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 101])))
    shuffle_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 102])))

    for _ in range(cfg.epochs):
        order = np.arange(n_train)
        if cfg.shuffle:
            order = shuffle_rng.permutation(n_train)
        sse = 0.0
        for i, b0 in enumerate(range(0, n_train, cfg.batch_size)):
            idx = order[b0 : b0 + cfg.batch_size]
            pred = model.forward(x_train[idx], train=True, rng=dropout_rng)
            if not np.all(np.isfinite(pred)):
                raise DivergenceError(
                    f"non-finite prediction at epoch {state.epoch + 1}, batch {i + 1}",
                    epoch=state.epoch + 1, batch=i + 1,
                )
            loss, dpred = mse_loss(y_train[idx], pred)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {state.epoch + 1}, batch {i + 1}",
                    epoch=state.epoch + 1, batch=i + 1,
                )
            model.backward(dpred)
            for name, layer in model.groups().items():
                adam_step(layer.params, layer.grads, state.adam[name])
            sse += loss * idx.size
        state.history["train"].append(sse / n_train)
        if n_val > 0:
            val_pred = _forward_in_chunks(model, x_val, cfg.batch_size)
            val_loss, _ = mse_loss(y_val, val_pred)
            state.history["val"].append(val_loss)
        else:
            state.history["val"].append(None)
        state.epoch += 1
    return state


def predict_series(model, dataset: WindowedDataset) -> np.ndarray:
    """Eval-mode predictions, one scalar per window in dataset order.

    Windows go through the forward pass one at a time, so the result is
    bit-identical to looping single-window calls by construction.
    """
    if dataset.layout != model.layout:
        raise UsageError(
            f"{model.kind} needs {model.layout!r} windows, got {dataset.layout!r}"
        )
    preds = np.empty(len(dataset))
    for i in range(len(dataset)):
        preds[i] = model.forward(dataset.inputs[i : i + 1], train=False)[0]
    return preds


# ---------------------------------------------------------------------------
# checkpointing

CHECKPOINT_VERSION = 1


def save_checkpoint(state: ModelState, path, scaler: ScalerParams | None = None,
                    feature_names=None, target_column: str | None = None) -> None:
    """Write a self-contained npz checkpoint; reload reproduces the model,
    optimizer moments and history bit-exactly."""
    model = state.model
    entries = {
        "meta/version": np.int64(CHECKPOINT_VERSION),
        "meta/kind": np.str_(model.kind),
        "meta/config": np.str_(json.dumps(state.cfg.as_dict(), sort_keys=True)),
        "meta/epoch": np.int64(state.epoch),
        "history/train": np.asarray(state.history["train"], dtype=np.float64),
        "history/val": np.asarray(
            [np.nan if v is None else v for v in state.history["val"]], dtype=np.float64
        ),
    }
    if model.kind == "stgnn":
        entries["meta/graph"] = np.str_(serialize_graph(model.graph))
    else:
        entries["meta/n_features"] = np.int64(model.n_features)
    if state.val_indices is not None:
        entries["meta/val_indices"] = state.val_indices
    if feature_names is not None:
        entries["meta/feature_names"] = np.asarray(list(feature_names))
    if target_column is not None:
        entries["meta/target_column"] = np.str_(target_column)
    if scaler is not None:
        entries["scaler/columns"] = np.asarray(list(scaler.columns))
        entries["scaler/mins"] = scaler.mins
        entries["scaler/maxs"] = scaler.maxs
        entries["scaler/span"] = np.asarray([scaler.fit_start, scaler.fit_stop], dtype=np.int64)
    for gname, layer in model.groups().items():
        st = state.adam[gname]
        entries[f"adam_step/{gname}"] = np.int64(st.step)
        for pname, p in layer.params.items():
            entries[f"params/{gname}/{pname}"] = p
            entries[f"adam_m/{gname}/{pname}"] = st.m[pname]
            entries[f"adam_v/{gname}/{pname}"] = st.v[pname]
    keys = sorted(entries)
    np.savez(path, **{k: entries[k] for k in keys})


def load_checkpoint(path):
    """Rebuild (state, scaler, meta) from save_checkpoint output."""
    with np.load(path, allow_pickle=False) as z:
        version = int(z["meta/version"])
        if version != CHECKPOINT_VERSION:
            raise UsageError(f"unsupported checkpoint version {version}")
        cfg = TrainConfig.from_dict(json.loads(str(z["meta/config"])))
        kind = str(z["meta/kind"])
        if kind == "stgnn":
            graph = parse_graph_config(str(z["meta/graph"]))
            model = build_stgnn(graph, cfg)
        elif kind == "rnn":
            model = build_rnn(int(z["meta/n_features"]), cfg)
        else:
            raise UsageError(f"unknown model kind {kind!r}")
        state = ModelState.fresh(model, cfg)
        state.epoch = int(z["meta/epoch"])
        state.history["train"] = [float(v) for v in z["history/train"]]
        state.history["val"] = [None if np.isnan(v) else float(v) for v in z["history/val"]]
        if "meta/val_indices" in z:
            state.val_indices = z["meta/val_indices"]
        for gname, layer in model.groups().items():
            st = state.adam[gname]
            st.step = int(z[f"adam_step/{gname}"])
            for pname in layer.params:
                layer.params[pname][...] = z[f"params/{gname}/{pname}"]
                st.m[pname][...] = z[f"adam_m/{gname}/{pname}"]
                st.v[pname][...] = z[f"adam_v/{gname}/{pname}"]
        scaler = None
        if "scaler/columns" in z:
            span = z["scaler/span"]
            scaler = ScalerParams(
                columns=tuple(str(c) for c in z["scaler/columns"]),
                mins=z["scaler/mins"].copy(),
                maxs=z["scaler/maxs"].copy(),
                fit_start=int(span[0]),
                fit_stop=int(span[1]),
            )
        meta = {
            "feature_names": [str(s) for s in z["meta/feature_names"]]
            if "meta/feature_names" in z else None,
            "target_column": str(z["meta/target_column"])
            if "meta/target_column" in z else None,
        }
    return state, scaler, meta
