"""Sequence kernels for the two recurrent cells.

All arrays are float64 and time-major: inputs are (T, B, F) so that x[t]
is a C-contiguous (B, F) block, which numba's np.dot requires. Hidden
state at t=0 starts from zeros. Gate order in the packed LSTM weights is
input, forget, candidate, output (columns [0:H, H:2H, 2H:3H, 3H:4H]).

The input-side projection does not depend on the recurrence, so both
cells compute it for the whole window in a single matmul and keep only
the recurrent term inside the time loop.
"""

import numpy as np

from .backend import jit, select


def _rnn_forward(x, w_in, w_rec, b):
    T, B, F = x.shape
    U = w_in.shape[1]
    pre = np.dot(x.reshape(T * B, F), w_in).reshape(T, B, U)
    h = np.empty((T, B, U))
    h_prev = np.zeros((B, U))
    for t in range(T):
        h[t] = np.tanh(pre[t] + np.dot(h_prev, w_rec) + b)
        h_prev = h[t]
    return h


def _rnn_backward(x, h, dh, w_in, w_rec):
    # dh carries the upstream gradient on every emitted hidden state; the
    # recurrent term is accumulated on top while walking the window backwards.
    T, B, F = x.shape
    U = w_in.shape[1]
    da = np.empty((T, B, U))
    dw_rec = np.zeros((U, U))
    carry = np.zeros((B, U))
    for t in range(T - 1, -1, -1):
        da[t] = (dh[t] + carry) * (1.0 - h[t] * h[t])
        if t > 0:
            dw_rec += np.dot(h[t - 1].T, da[t])
        carry = np.dot(da[t], w_rec.T)
    da_flat = da.reshape(T * B, U)
    dw_in = np.dot(x.reshape(T * B, F).T, da_flat)
    db = da_flat.sum(axis=0)
    dx = np.dot(da_flat, w_in.T).reshape(T, B, F)
    return dx, dw_in, dw_rec, db


def _lstm_forward(x, w_in, w_rec, b):
    T, B, F = x.shape
    H = w_rec.shape[0]
    pre = np.dot(x.reshape(T * B, F), w_in).reshape(T, B, 4 * H)
    h = np.empty((T, B, H))
    c = np.empty((T, B, H))
    gates = np.empty((T, B, 4 * H))
    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        s = pre[t] + np.dot(h_prev, w_rec) + b
        ig = 1.0 / (1.0 + np.exp(-s[:, 0:H]))
        fg = 1.0 / (1.0 + np.exp(-s[:, H : 2 * H]))
        gg = np.tanh(s[:, 2 * H : 3 * H])
        og = 1.0 / (1.0 + np.exp(-s[:, 3 * H : 4 * H]))
        c[t] = fg * c_prev + ig * gg
        h[t] = og * np.tanh(c[t])
        gates[t, :, 0:H] = ig
        gates[t, :, H : 2 * H] = fg
        gates[t, :, 2 * H : 3 * H] = gg
        gates[t, :, 3 * H : 4 * H] = og
        h_prev = h[t]
        c_prev = c[t]
    return h, c, gates


def _lstm_backward(x, h, c, gates, dh, w_in, w_rec):
    T, B, F = x.shape
    H = w_rec.shape[0]
    ds = np.empty((T, B, 4 * H))
    dw_rec = np.zeros((H, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    zeros_bh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        ig = gates[t, :, 0:H]
        fg = gates[t, :, H : 2 * H]
        gg = gates[t, :, 2 * H : 3 * H]
        og = gates[t, :, 3 * H : 4 * H]
        tc = np.tanh(c[t])
        d = dh[t] + dh_next
        do = d * tc
        dc = dc_next + d * og * (1.0 - tc * tc)
        if t > 0:
            c_prev = c[t - 1]
        else:
            c_prev = zeros_bh
        ds[t, :, 0:H] = dc * gg * ig * (1.0 - ig)
        ds[t, :, H : 2 * H] = dc * c_prev * fg * (1.0 - fg)
        ds[t, :, 2 * H : 3 * H] = dc * ig * (1.0 - gg * gg)
        ds[t, :, 3 * H : 4 * H] = do * og * (1.0 - og)
        if t > 0:
            dw_rec += np.dot(h[t - 1].T, ds[t])
        dh_next = np.dot(ds[t], w_rec.T)
        dc_next = dc * fg
    ds_flat = ds.reshape(T * B, 4 * H)
    dw_in = np.dot(x.reshape(T * B, F).T, ds_flat)
    db = ds_flat.sum(axis=0)
    dx = np.dot(ds_flat, w_in.T).reshape(T, B, F)
    return dx, dw_in, dw_rec, db


rnn_forward_py = _rnn_forward
rnn_backward_py = _rnn_backward
lstm_forward_py = _lstm_forward
lstm_backward_py = _lstm_backward

rnn_forward_nb = jit(_rnn_forward)
rnn_backward_nb = jit(_rnn_backward)
lstm_forward_nb = jit(_lstm_forward)
lstm_backward_nb = jit(_lstm_backward)

rnn_forward = select(rnn_forward_py, rnn_forward_nb)
rnn_backward = select(rnn_backward_py, rnn_backward_nb)
lstm_forward = select(lstm_forward_py, lstm_forward_nb)
lstm_backward = select(lstm_backward_py, lstm_backward_nb)
