"""Straight-line loop evaluations used as independent oracles.

Nothing here calls into the matrix-form code paths; every sum is written
out element by element so the two routes can be compared.
"""

from __future__ import annotations

import math

import numpy as np

from .softhg import Activation, NormMode, SoftHGParams


def _act(v: float, kind: Activation) -> float:
    if kind is Activation.RELU:
        return v if v > 0.0 else 0.0
    if kind is Activation.GELU:
        return 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0)))
    return v


def loop_aggregate(a, x, w_e, activation=Activation.RELU) -> np.ndarray:
    """f_m = sum_i A[i,m] x_i, then f'_m = act(W_e f_m)."""
    activation = Activation(activation)
    n, m = len(a), len(a[0])
    d = len(x[0])
    d_edge = len(w_e)
    out = np.zeros((m, d_edge))
    for mm in range(m):
        f = [0.0] * d
        for i in range(n):
            for k in range(d):
                f[k] += a[i][mm] * x[i][k]
        for r in range(d_edge):
            acc = 0.0
            for k in range(d):
                acc += w_e[r][k] * f[k]
            out[mm, r] = _act(acc, activation)
    return out


def loop_disseminate(a, f_e, w_n, activation=Activation.RELU) -> np.ndarray:
    """x~_i = sum_m A[i,m] f'_m, then x'_i = act(W_n x~_i)."""
    activation = Activation(activation)
    n, m = len(a), len(a[0])
    d_edge = len(f_e[0])
    d_out = len(w_n)
    out = np.zeros((n, d_out))
    for i in range(n):
        xt = [0.0] * d_edge
        for mm in range(m):
            for k in range(d_edge):
                xt[k] += a[i][mm] * f_e[mm][k]
        for r in range(d_out):
            acc = 0.0
            for k in range(d_edge):
                acc += w_n[r][k] * xt[k]
            out[i, r] = _act(acc, activation)
    return out


def loop_message_passing(a, x, w_e, w_n, activation=Activation.RELU) -> np.ndarray:
    f_e = loop_aggregate(a, x, w_e, activation)
    return loop_disseminate(a, f_e, w_n, activation)


def loop_softmax(s, mode: NormMode) -> np.ndarray:
    n, m = len(s), len(s[0])
    a = np.zeros((n, m))
    if mode is NormMode.NONE:
        return np.array(s, dtype=float)
    if mode is NormMode.ENORM:
        for j in range(m):
            top = max(s[i][j] for i in range(n))
            den = sum(math.exp(s[i][j] - top) for i in range(n))
            for i in range(n):
                a[i, j] = math.exp(s[i][j] - top) / den
    else:
        for i in range(n):
            top = max(s[i])
            den = sum(math.exp(v - top) for v in s[i])
            for j in range(m):
                a[i, j] = math.exp(s[i][j] - top) / den
    return a


def loop_block_forward(x, params: SoftHGParams) -> np.ndarray:
    """Whole block evaluated with explicit loops (no SeS)."""
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    m, h = params.m, params.heads
    dh = d // h

    f_global = [sum(x[i, k] for i in range(n)) / n for k in range(d)]
    f_global += [max(x[i, k] for i in range(n)) for k in range(d)]

    width = params.w_phi.shape[1]
    hidden = [params.b_phi[c] + sum(f_global[r] * params.w_phi[r, c] for r in range(2 * d)) for c in range(width)]
    if params.two_layer_phi:
        hidden = [v if v > 0 else 0.0 for v in hidden]
        offs = [params.b_phi2[c] + sum(hidden[r] * params.w_phi2[r, c] for r in range(width)) for c in range(m * d)]
    else:
        offs = hidden
    p = [[params.p0[mm, k] + offs[mm * d + k] for k in range(d)] for mm in range(m)]

    xp = [[sum(x[i, r] * params.w_pre[r, k] for r in range(d)) for k in range(d)] for i in range(n)]

    s = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for mm in range(m):
            total = 0.0
            for tau in range(h):
                dot = 0.0
                for k in range(tau * dh, (tau + 1) * dh):
                    dot += xp[i][k] * p[mm][k]
                total += dot / math.sqrt(dh)
            s[i][mm] = total / h

    a = loop_softmax(s, params.norm_mode)
    out = loop_message_passing(a, x, params.w_e, params.w_n, params.activation)
    if params.residual:
        out = out + x
    return out


def loop_hgnn_conv(x, h, theta, activation=Activation.IDENTITY) -> np.ndarray:
    """Classical hypergraph convolution with unit hyperedge weights."""
    activation = Activation(activation)
    x, h, theta = np.asarray(x, float), np.asarray(h, float), np.asarray(theta, float)
    n, d = x.shape
    ne = h.shape[1]
    dv = [sum(h[v, e] for e in range(ne)) for v in range(n)]
    de = [sum(h[v, e] for v in range(n)) for e in range(ne)]
    # hyperedge features: mean of member vertices
    fe = [[sum(h[v, e] * x[v, k] for v in range(n)) / de[e] for k in range(d)] for e in range(ne)]
    xv = [[sum(h[v, e] * fe[e][k] for e in range(ne)) / dv[v] for k in range(d)] for v in range(n)]
    out = np.zeros((n, theta.shape[1]))
    for v in range(n):
        for c in range(theta.shape[1]):
            out[v, c] = _act(sum(xv[v][k] * theta[k, c] for k in range(d)), activation)
    return out


def loop_self_attention(x, w_q, w_k, w_v) -> np.ndarray:
    x = np.asarray(x, float)
    n, d = x.shape

    def proj(w):
        return [[sum(x[i, r] * w[r, c] for r in range(d)) for c in range(w.shape[1])] for i in range(n)]

    q, k, v = proj(w_q), proj(w_k), proj(w_v)
    out = np.zeros((n, len(v[0])))
    for i in range(n):
        logits = [sum(q[i][c] * k[j][c] for c in range(d)) / math.sqrt(d) for j in range(n)]
        top = max(logits)
        w = [math.exp(val - top) for val in logits]
        z = sum(w)
        for c in range(len(v[0])):
            out[i, c] = sum(w[j] * v[j][c] for j in range(n)) / z
    return out
