"""Differentiable numeric primitives: dense transform, activations,
inverted dropout, MSE loss, Adam updates, and a finite-difference
gradient checker.

Everything is double precision. Parameters live in plain dicts of
float64 ndarrays; the Adam state mirrors that layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, NumericError


def _require_finite(name: str, arr) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")


def as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# dense transform


def dense_forward(x, w, b) -> np.ndarray:
    """Affine map x @ w + b, batched over the rows of x."""
    x, w, b = as_f64(x), as_f64(w), as_f64(b)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"dense: x {x.shape} incompatible with w {w.shape}")
    if b.shape != (w.shape[1],):
        raise DimensionError(f"dense: bias {b.shape} does not match {w.shape[1]} outputs")
    out = x @ w + b
    _require_finite("dense output", out)
    return out


def dense_backward(x, w, dout):
    """Gradients of dense_forward: returns (dx, dw, db)."""
    x, w, dout = as_f64(x), as_f64(w), as_f64(dout)
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


# ---------------------------------------------------------------------------
# activations

ACTIVATIONS = ("tanh", "sigmoid", "relu", "leaky_relu")


def activation(x, kind: str, slope: float | None = None) -> np.ndarray:
    """Elementwise activation. leaky_relu requires an explicit slope."""
    x = as_f64(x)
    if kind == "tanh":
        out = np.tanh(x)
    elif kind == "sigmoid":
        out = 1.0 / (1.0 + np.exp(-x))
    elif kind == "relu":
        out = np.maximum(x, 0.0)
    elif kind == "leaky_relu":
        if slope is None:
            raise ConfigError("leaky_relu needs a slope")
        out = np.where(x > 0.0, x, slope * x)
    else:
        raise ConfigError(f"unknown activation {kind!r}")
    _require_finite(f"{kind} output", out)
    return out


def activation_grad(x, kind: str, slope: float | None = None) -> np.ndarray:
    """Derivative of activation() evaluated at x."""
    x = as_f64(x)
    if kind == "tanh":
        y = np.tanh(x)
        return 1.0 - y * y
    if kind == "sigmoid":
        y = 1.0 / (1.0 + np.exp(-x))
        return y * (1.0 - y)
    if kind == "relu":
        return (x > 0.0).astype(np.float64)
    if kind == "leaky_relu":
        if slope is None:
            raise ConfigError("leaky_relu needs a slope")
        return np.where(x > 0.0, 1.0, slope)
    raise ConfigError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# dropout


@dataclass
class DropoutSpec:
    rate: float
    mode: str = "train"  # "train" | "eval"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.rate}")
        if self.mode not in ("train", "eval"):
            raise ConfigError(f"dropout mode must be train or eval, got {self.mode!r}")


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: kept entries carry 1/(1-rate), dropped 0."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout_apply(x, spec: DropoutSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply dropout per spec. Eval mode is a strict identity.

    Training is deterministic for a fixed spec.seed; pass an explicit rng
    to draw from a caller-owned stream instead.
    """
    x = as_f64(x)
    if spec.mode == "eval" or spec.rate == 0.0:
        return x
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
    return x * dropout_mask(x.shape, spec.rate, rng)


# ---------------------------------------------------------------------------
# loss


def mse_loss(y_true, y_pred):
    """Mean squared error and its gradient wrt y_pred."""
    y_true, y_pred = as_f64(y_true).ravel(), as_f64(y_pred).ravel()
    if y_true.size == 0:
        raise DomainError("mse_loss on empty input")
    if y_true.shape != y_pred.shape:
        raise DimensionError(f"mse_loss: {y_true.shape} vs {y_pred.shape}")
    r = y_pred - y_true
    loss = float(np.mean(r * r))
    grad = 2.0 * r / r.size
    _require_finite("mse", loss)
    return loss, grad


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Bias-corrected Adam moments for a dict of named parameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        st = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        st.m = {k: np.zeros_like(p) for k, p in params.items()}
        st.v = {k: np.zeros_like(p) for k, p in params.items()}
        return st


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One in-place Adam update across all named parameters."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"adam: grad {g.shape} vs param {p.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        _require_finite(f"param {name}", p)


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(f, params: dict, h: float = 1e-5) -> float:
    """Compare analytic gradients of f against central finite differences.

    f maps the params dict to (scalar loss, grads dict) without mutating
    the arrays. Returns the worst relative error over all coordinates,
    with denominator max(|analytic|, |numeric|, 1e-8).
    """
    if h <= 0:
        raise DomainError("grad_check needs h > 0")
    loss0, grads = f(params)
    if not np.isfinite(loss0):
        raise NumericError("grad_check: loss is not finite")
    worst = 0.0
    for name, p in params.items():
        g = grads[name]
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = f(params)
            flat[i] = orig - h
            lm, _ = f(params)
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError(f"grad_check: non-finite loss near {name}[{i}]")
            num = (lp - lm) / (2.0 * h)
            ana = gflat[i]
            err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
            if err > worst:
                worst = err
    return worst
