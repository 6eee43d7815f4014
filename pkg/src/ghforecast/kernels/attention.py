"""Batched multi-head attention over a fixed directed graph.

The graph is passed in CSR-by-destination form: edges are grouped by the
receiving node, so edges feeding node i occupy slots
in_offsets[i]:in_offsets[i+1] of edge_src. Every node must have at least
one incoming slot (the graph layer inserts self-loops where needed before
calling in here).

Layouts are node-major so that every per-node slice is a contiguous
(B, ...) block: x is (N, B, F), the projected features and aggregates
are (K, N, B, H), attention and raw scores are (K, E, B). w is
(K, F, H) and a is (K, 2H) with the first H entries scoring the
receiving node and the last H the sending node. The caller reorders to
batch-major and concatenates heads.
"""

import numpy as np

from .backend import jit, select


def _gat_forward(x, edge_src, in_offsets, w, a, slope):
    N, B, F = x.shape
    K = w.shape[0]
    H = w.shape[2]
    E = edge_src.shape[0]
    x2 = x.reshape(N * B, F)
    z = np.empty((K, N, B, H))
    attn = np.empty((K, E, B))
    scores = np.empty((K, E, B))
    agg = np.empty((K, N, B, H))
    for k in range(K):
        z[k] = np.dot(x2, w[k]).reshape(N, B, H)
        zf = z[k].reshape(N * B, H)
        s_dst = np.dot(zf, a[k, :H]).reshape(N, B)
        s_src = np.dot(zf, a[k, H:]).reshape(N, B)
        for i in range(N):
            o0 = in_offsets[i]
            o1 = in_offsets[i + 1]
            deg = o1 - o0
            lin = np.empty((deg, B))
            for m in range(deg):
                lin[m] = s_dst[i] + s_src[edge_src[o0 + m]]
            scores[k, o0:o1] = lin
            e = np.where(lin > 0.0, lin, slope * lin)
            mx = e[0].copy()
            for m in range(1, deg):
                mx = np.maximum(mx, e[m])
            ex = np.exp(e - mx.reshape(1, B))
            al = ex / ex.sum(axis=0).reshape(1, B)
            attn[k, o0:o1] = al
            acc = np.zeros((B, H))
            for m in range(deg):
                acc += al[m].reshape(B, 1) * z[k, edge_src[o0 + m]]
            agg[k, i] = acc
    out = np.maximum(agg, 0.0)
    return out, attn, scores, z, agg


def _gat_backward(x, edge_src, in_offsets, w, a, slope, z, scores, attn, agg, dout,
                  need_dx):
    # dout arrives in the same (K, N, B, H) layout the forward emits.
    N, B, F = x.shape
    K = w.shape[0]
    H = w.shape[2]
    x2 = x.reshape(N * B, F)
    dx = np.zeros((N, B, F))
    dw = np.zeros((K, F, H))
    da = np.zeros((K, 2 * H))
    for k in range(K):
        dz = np.zeros((N, B, H))
        ds_dst = np.zeros((N, B))
        ds_src = np.zeros((N, B))
        for i in range(N):
            o0 = in_offsets[i]
            o1 = in_offsets[i + 1]
            deg = o1 - o0
            dagg = np.where(agg[k, i] > 0.0, dout[k, i], 0.0)
            al = attn[k, o0:o1]
            dal = np.empty((deg, B))
            for m in range(deg):
                j = edge_src[o0 + m]
                dal[m] = (dagg * z[k, j]).sum(axis=1)
                dz[j] += al[m].reshape(B, 1) * dagg
            # softmax jacobian, then the leaky pre-activation
            srow = (al * dal).sum(axis=0)
            de = al * (dal - srow.reshape(1, B))
            lin = scores[k, o0:o1]
            dlin = np.where(lin > 0.0, de, slope * de)
            ds_dst[i] += dlin.sum(axis=0)
            for m in range(deg):
                ds_src[edge_src[o0 + m]] += dlin[m]
        for i in range(N):
            dz[i] += ds_dst[i].reshape(B, 1) * a[k, :H].reshape(1, H)
            dz[i] += ds_src[i].reshape(B, 1) * a[k, H:].reshape(1, H)
        zf = z[k].reshape(N * B, H)
        dzf = dz.reshape(N * B, H)
        da[k, :H] = np.dot(ds_dst.reshape(N * B), zf)
        da[k, H:] = np.dot(ds_src.reshape(N * B), zf)
        dw[k] = np.dot(x2.T, dzf)
        if need_dx:
            dx += np.dot(dzf, w[k].T).reshape(N, B, F)
    return dx, dw, da


gat_forward_py = _gat_forward
gat_backward_py = _gat_backward

gat_forward_nb = jit(_gat_forward)
gat_backward_nb = jit(_gat_backward)

gat_forward = select(gat_forward_py, gat_forward_nb)
gat_backward = select(gat_backward_py, gat_backward_nb)
