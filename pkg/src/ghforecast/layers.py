"""Sequence and graph layers with explicit forward/backward passes.

Three primitives live here: the simple recurrent cell with tanh state
updates, the LSTM cell, and the directed multi-head graph-attention
layer. Cell-level functions operate on single vectors; the Layer classes
run whole windows through the compiled kernels and keep the caches the
backward passes need.

Weight initialization is uniform in [-s, s] with s = 1/sqrt(fan_in);
biases start at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError, GraphError, UsageError
from .graphs import FeatureGraph, incoming_csr
from .nn import as_f64


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    s = 1.0 / np.sqrt(max(1, fan_in))
    return rng.uniform(-s, s, size=shape)


# ---------------------------------------------------------------------------
# simple recurrent cell


@dataclass
class RnnCellParams:
    """tanh recurrence h_t = tanh(x_t @ w_in + h_prev @ w_rec + b), with an
    optional linear scalar head (w_out, b_out) on the emitting layer."""

    w_in: np.ndarray   # (F, U)
    w_rec: np.ndarray  # (U, U)
    b: np.ndarray      # (U,)
    w_out: np.ndarray | None = None  # (U, 1)
    b_out: np.ndarray | None = None  # (1,)

    @property
    def units(self) -> int:
        return self.w_rec.shape[0]


def init_rnn_cell(rng, n_in: int, units: int, output_head: bool = False) -> RnnCellParams:
    p = RnnCellParams(
        w_in=_uniform_init(rng, (n_in, units), n_in),
        w_rec=_uniform_init(rng, (units, units), units),
        b=np.zeros(units),
    )
    if output_head:
        p.w_out = _uniform_init(rng, (units, 1), units)
        p.b_out = np.zeros(1)
    return p


def rnn_cell_forward(x_t, h_prev, p: RnnCellParams) -> np.ndarray:
    x_t, h_prev = as_f64(x_t), as_f64(h_prev)
    if x_t.shape != (p.w_in.shape[0],) or h_prev.shape != (p.units,):
        raise DimensionError(
            f"rnn cell: x {x_t.shape}, h {h_prev.shape} vs weights "
            f"{p.w_in.shape}/{p.w_rec.shape}"
        )
    return np.tanh(x_t @ p.w_in + h_prev @ p.w_rec + p.b)


def rnn_output(h_t, p: RnnCellParams) -> float:
    if p.w_out is None or p.b_out is None:
        raise ConfigError("rnn cell has no output head")
    return float(as_f64(h_t) @ p.w_out + p.b_out)


# ---------------------------------------------------------------------------
# LSTM cell

GATE_ORDER = ("input", "forget", "candidate", "output")


@dataclass
class LstmParams:
    """Gate weights packed column-wise in GATE_ORDER: w_in is (I, 4H),
    w_rec is (H, 4H), b is (4H,)."""

    w_in: np.ndarray
    w_rec: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w_rec.shape[0]

    def gate(self, which: str, part: str = "w_in") -> np.ndarray:
        i = GATE_ORDER.index(which)
        h = self.hidden
        arr = getattr(self, part)
        return arr[..., i * h : (i + 1) * h]


def init_lstm(rng, n_in: int, hidden: int) -> LstmParams:
    return LstmParams(
        w_in=_uniform_init(rng, (n_in, 4 * hidden), n_in),
        w_rec=_uniform_init(rng, (hidden, 4 * hidden), hidden),
        b=np.zeros(4 * hidden),
    )


def lstm_cell_forward(x_t, h_prev, c_prev, p: LstmParams):
    x_t, h_prev, c_prev = as_f64(x_t), as_f64(h_prev), as_f64(c_prev)
    hdim = p.hidden
    if x_t.shape != (p.w_in.shape[0],) or h_prev.shape != (hdim,) or c_prev.shape != (hdim,):
        raise DimensionError("lstm cell: input/state shapes do not match the weights")
    s = x_t @ p.w_in + h_prev @ p.w_rec + p.b
    ig = 1.0 / (1.0 + np.exp(-s[0:hdim]))
    fg = 1.0 / (1.0 + np.exp(-s[hdim : 2 * hdim]))
    gg = np.tanh(s[2 * hdim : 3 * hdim])
    og = 1.0 / (1.0 + np.exp(-s[3 * hdim : 4 * hdim]))
    c_t = fg * c_prev + ig * gg
    h_t = og * np.tanh(c_t)
    return h_t, c_t


# ---------------------------------------------------------------------------
# graph attention


@dataclass
class GatParams:
    """Per-head projection w (K, F, H) and attention vector a (K, 2H);
    the first H attention entries score the receiving node."""

    w: np.ndarray
    a: np.ndarray
    leaky_slope: float = 0.2

    @property
    def heads(self) -> int:
        return self.w.shape[0]

    @property
    def hidden(self) -> int:
        return self.w.shape[2]


def init_gat(rng, n_in: int, hidden: int, heads: int, leaky_slope: float = 0.2) -> GatParams:
    if heads < 1:
        raise ConfigError("attention needs at least one head")
    return GatParams(
        w=_uniform_init(rng, (heads, n_in, hidden), n_in),
        a=_uniform_init(rng, (heads, 2 * hidden), 2 * hidden),
        leaky_slope=leaky_slope,
    )


@dataclass
class AttentionCoefficients:
    """Per-head mapping from directed edge (src, dst) to its softmax
    weight. Edges absent from the graph carry weight 0."""

    heads: list  # one dict per head

    def coefficient(self, head: int, src: str, dst: str) -> float:
        return self.heads[head].get((src, dst), 0.0)

    def incoming_sum(self, head: int, dst: str) -> float:
        return sum(v for (s, d), v in self.heads[head].items() if d == dst)


def gat_forward(x, graph: FeatureGraph, p: GatParams, self_loops: str = "isolated"):
    """Single-graph attention pass: x is (N, F) in graph node order.

    Returns the (N, heads*hidden) node features and the attention
    coefficients. Raises GraphError when a node has no incoming edge and
    self-loops are disabled.
    """
    x = as_f64(x)
    if x.ndim != 2 or x.shape[0] != graph.n_nodes:
        raise DimensionError(f"node features {x.shape} vs {graph.n_nodes} graph nodes")
    edge_src, edge_dst, offsets = incoming_csr(graph, self_loops)
    out, attn, _, _, _ = kernels.gat_forward(
        np.ascontiguousarray(x[:, None, :]), edge_src, offsets, p.w, p.a, p.leaky_slope
    )
    # out is (K, N, 1, H); concatenate heads per node
    node_features = np.ascontiguousarray(out[:, :, 0, :].transpose(1, 0, 2)).reshape(
        graph.n_nodes, p.heads * p.hidden
    )
    heads = []
    for k in range(p.heads):
        heads.append({
            (graph.nodes[edge_src[m]], graph.nodes[edge_dst[m]]): float(attn[k, m, 0])
            for m in range(edge_src.size)
        })
    return node_features, AttentionCoefficients(heads)


# ---------------------------------------------------------------------------
# window-level layers used by the forecasters


class RnnLayer:
    """One recurrent layer over a (T, B, F) window; emits all hidden states."""

    def __init__(self, n_in, units, rng):
        self.params = {
            "w_in": _uniform_init(rng, (n_in, units), n_in),
            "w_rec": _uniform_init(rng, (units, units), units),
            "b": np.zeros(units),
        }
        self.grads = {}
        self._cache = None

    def forward(self, x):
        h = kernels.rnn_forward(x, self.params["w_in"], self.params["w_rec"], self.params["b"])
        self._cache = (x, h)
        return h

    def backward(self, dh):
        if self._cache is None:
            raise UsageError("backward before forward")
        x, h = self._cache
        dx, dw_in, dw_rec, db = kernels.rnn_backward(
            x, h, dh, self.params["w_in"], self.params["w_rec"]
        )
        self.grads = {"w_in": dw_in, "w_rec": dw_rec, "b": db}
        return dx


class LstmLayer:
    """LSTM over a (T, B, I) window; emits all hidden states."""

    def __init__(self, n_in, hidden, rng):
        self.params = {
            "w_in": _uniform_init(rng, (n_in, 4 * hidden), n_in),
            "w_rec": _uniform_init(rng, (hidden, 4 * hidden), hidden),
            "b": np.zeros(4 * hidden),
        }
        self.grads = {}
        self._cache = None

    def forward(self, x):
        h, c, gates = kernels.lstm_forward(
            x, self.params["w_in"], self.params["w_rec"], self.params["b"]
        )
        self._cache = (x, h, c, gates)
        return h

    def backward(self, dh):
        if self._cache is None:
            raise UsageError("backward before forward")
        x, h, c, gates = self._cache
        dx, dw_in, dw_rec, db = kernels.lstm_backward(
            x, h, c, gates, dh, self.params["w_in"], self.params["w_rec"]
        )
        self.grads = {"w_in": dw_in, "w_rec": dw_rec, "b": db}
        return dx


class GatLayer:
    """Multi-head attention over a fixed graph, batched node-major:
    forward maps (N, B, F) to per-head features (K, N, B, H)."""

    def __init__(self, graph: FeatureGraph, n_in, hidden, heads, rng,
                 leaky_slope=0.2, self_loops="isolated"):
        self.graph = graph
        self.leaky_slope = float(leaky_slope)
        self.edge_src, self.edge_dst, self.offsets = incoming_csr(graph, self_loops)
        self.params = {
            "w": _uniform_init(rng, (heads, n_in, hidden), n_in),
            "a": _uniform_init(rng, (heads, 2 * hidden), 2 * hidden),
        }
        self.grads = {}
        self._cache = None

    @property
    def out_features(self):
        return self.params["w"].shape[0] * self.params["w"].shape[2]

    def forward(self, x):
        if x.shape[0] != self.graph.n_nodes:
            raise GraphError(
                f"{x.shape[0]} node rows but the graph has {self.graph.n_nodes} nodes"
            )
        out, attn, scores, z, agg = kernels.gat_forward(
            x, self.edge_src, self.offsets, self.params["w"], self.params["a"],
            self.leaky_slope,
        )
        self._cache = (x, scores, attn, z, agg)
        self.last_attention = attn
        return out

    def backward(self, dout, need_dx=True):
        if self._cache is None:
            raise UsageError("backward before forward")
        x, scores, attn, z, agg = self._cache
        dx, dw, da = kernels.gat_backward(
            x, self.edge_src, self.offsets, self.params["w"], self.params["a"],
            self.leaky_slope, z, scores, attn, agg, dout, need_dx,
        )
        self.grads = {"w": dw, "a": da}
        return dx


class DenseHead:
    """Linear scalar readout (B, D) -> (B,)."""

    def __init__(self, n_in, rng):
        self.params = {
            "w": _uniform_init(rng, (n_in, 1), n_in),
            "b": np.zeros(1),
        }
        self.grads = {}
        self._cache = None

    def forward(self, x):
        self._cache = x
        return (x @ self.params["w"] + self.params["b"]).ravel()

    def backward(self, dy):
        if self._cache is None:
            raise UsageError("backward before forward")
        x = self._cache
        dy2 = dy.reshape(-1, 1)
        self.grads = {"w": x.T @ dy2, "b": dy2.sum(axis=0)}
        return dy2 @ self.params["w"].T
