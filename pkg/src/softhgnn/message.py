"""Vertex -> hyperedge -> vertex message passing and the full block.

``softhgnn_forward`` keeps every intermediate in a :class:`BlockCache` so
that ``softhgnn_backward`` can apply the chain rule in reverse without a
general autodiff tape.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import ShapeError
from .ses import SeSConfig, ses_participation
from .softhg import (
    Activation,
    NormMode,
    Participation,
    SoftHGParams,
    activate,
    activate_grad,
    global_context,
    head_scores,
    normalize,
    score_scale,
)
from .tensor import as_matrix, softmax_cols_backward, softmax_rows_backward


def aggregate_v_to_e(a, x, w_e, activation: Activation | str = Activation.RELU) -> np.ndarray:
    """Hyperedge features ``act((A^T X) W_e^T)``, shape (M, D')."""
    a, x, w_e = as_matrix(a, "A"), as_matrix(x, "x"), as_matrix(w_e, "w_e")
    if a.shape[0] != x.shape[0] or w_e.shape[1] != x.shape[1]:
        raise ShapeError(f"aggregate: A{a.shape}, x{x.shape}, w_e{w_e.shape} are inconsistent")
    return activate((a.T @ x) @ w_e.T, Activation(activation))


def disseminate_e_to_v(a, f_e, w_n, activation: Activation | str = Activation.RELU) -> np.ndarray:
    """Updated vertex features ``act((A F'_e) W_n^T)``, shape (N, D'')."""
    a, f_e, w_n = as_matrix(a, "A"), as_matrix(f_e, "f_e"), as_matrix(w_n, "w_n")
    if a.shape[1] != f_e.shape[0] or w_n.shape[1] != f_e.shape[1]:
        raise ShapeError(f"disseminate: A{a.shape}, f_e{f_e.shape}, w_n{w_n.shape} are inconsistent")
    return activate((a @ f_e) @ w_n.T, Activation(activation))


@dataclass
class BlockCache:
    x: np.ndarray
    f_global: np.ndarray
    max_idx: np.ndarray
    phi_hidden: Optional[np.ndarray]  # pre-activation of the hidden offset layer
    offsets: np.ndarray
    p: np.ndarray
    x_proj: np.ndarray
    s: np.ndarray
    a: np.ndarray
    active: np.ndarray
    f_e: np.ndarray
    z_e: np.ndarray
    f_e_act: np.ndarray
    x_tilde: np.ndarray
    z_n: np.ndarray
    x_msg: np.ndarray
    norm_mode: NormMode
    sel: Optional[np.ndarray] = None

    def workspace_bytes(self) -> int:
        """Bytes of every intermediate matrix the forward pass allocated.

        The input ``x`` and the integer bookkeeping arrays are not counted.
        """
        skip = {"x", "max_idx", "active", "sel", "norm_mode"}
        total = 0
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name not in skip and isinstance(val, np.ndarray):
                total += val.nbytes
        return total


@dataclass
class BlockOutput:
    x_out: np.ndarray
    cache: BlockCache
    params: SoftHGParams

    @property
    def participation(self) -> Participation:
        c = self.cache
        return Participation(a=c.a, mode=c.norm_mode, s_raw=c.s, active=c.active)

    def workspace_bytes(self) -> int:
        extra = self.x_out.nbytes if self.x_out is not self.cache.x_msg else 0
        return self.cache.workspace_bytes() + extra


@dataclass
class BlockGrads:
    params: dict[str, np.ndarray]
    d_x: np.ndarray

    def scaled(self, factor: float) -> "BlockGrads":
        return BlockGrads({k: v * factor for k, v in self.params.items()}, self.d_x * factor)


def softhgnn_forward(x, params: SoftHGParams, ses: Optional[SeSConfig] = None) -> BlockOutput:
    """Full block: soft hyperedge generation then message passing.

    With ``ses`` the participation is built from the fixed columns plus the
    top-k dynamic columns and is always normalized over vertices.
    """
    x = as_matrix(x, "x")
    if x.shape[1] != params.d:
        raise ShapeError(f"x{x.shape} does not match D={params.d}")
    act = params.activation

    f_global = global_context(x)
    max_idx = np.argmax(x, axis=0)
    hidden = f_global @ params.w_phi + params.b_phi
    if params.two_layer_phi:
        offsets = np.maximum(hidden, 0.0) @ params.w_phi2 + params.b_phi2
    else:
        offsets, hidden = hidden, None
    offsets = offsets.reshape(params.m, params.d)
    p = params.p0 + offsets

    x_proj = x @ params.w_pre
    s = head_scores(x_proj, p, params.heads)

    sel = None
    if ses is None:
        part = normalize(s, params.norm_mode)
    else:
        if ses.m_total != params.m:
            raise ShapeError(f"SeS expects {ses.m_total} hyperedges, params have {params.m}")
        part, sel = ses_participation(s, ses)
    a = part.a

    f_e = a.T @ x
    z_e = f_e @ params.w_e.T
    f_e_act = activate(z_e, act)
    x_tilde = a @ f_e_act
    z_n = x_tilde @ params.w_n.T
    x_msg = activate(z_n, act)
    x_out = x_msg + x if params.residual else x_msg

    cache = BlockCache(
        x=x, f_global=f_global, max_idx=max_idx, phi_hidden=hidden, offsets=offsets, p=p, x_proj=x_proj,
        s=s, a=a, active=part.active, f_e=f_e, z_e=z_e, f_e_act=f_e_act,
        x_tilde=x_tilde, z_n=z_n, x_msg=x_msg, norm_mode=part.mode, sel=sel,
    )
    return BlockOutput(x_out=x_out, cache=cache, params=params)


def softhgnn_backward(out: BlockOutput, d_out) -> BlockGrads:
    """Gradients of a scalar loss w.r.t. every parameter and the input.

    The max-pool branch routes gradient to the first maximal row per
    feature.  Selection indices under SeS are treated as constants.
    """
    c, params = out.cache, out.params
    d_out = as_matrix(d_out, "d_out")
    if d_out.shape != out.x_out.shape:
        raise ShapeError(f"d_out{d_out.shape} != output{out.x_out.shape}")
    act = params.activation
    x = c.x
    n, d = x.shape

    d_x = d_out.copy() if params.residual else np.zeros_like(x)

    # dissemination
    d_zn = d_out * activate_grad(c.z_n, act)
    g_wn = d_zn.T @ c.x_tilde
    d_xt = d_zn @ params.w_n
    d_a = d_xt @ c.f_e_act.T
    d_fe_act = c.a.T @ d_xt

    # aggregation
    d_ze = d_fe_act * activate_grad(c.z_e, act)
    g_we = d_ze.T @ c.f_e
    d_fe = d_ze @ params.w_e
    d_a += x @ d_fe.T
    d_x += c.a @ d_fe

    # normalization
    if c.norm_mode is NormMode.ENORM:
        d_s_active = softmax_cols_backward(c.a, d_a)
    elif c.norm_mode is NormMode.VNORM:
        d_s_active = softmax_rows_backward(c.a, d_a)
    else:
        d_s_active = d_a
    d_s = np.zeros_like(c.s)
    d_s[:, c.active] = d_s_active

    # scores: head split followed by a head mean equals one scaled dot product
    scale = score_scale(params)
    d_xproj = scale * (d_s @ c.p)
    d_p = scale * (d_s.T @ c.x_proj)
    g_wpre = x.T @ d_xproj
    d_x += d_xproj @ params.w_pre.T

    # prototypes and offset network
    d_off = d_p.reshape(-1)
    grads = {"p0": d_p}
    if params.two_layer_phi:
        h_act = np.maximum(c.phi_hidden, 0.0)
        grads["w_phi2"] = np.outer(h_act, d_off)
        grads["b_phi2"] = d_off
        d_hidden = (params.w_phi2 @ d_off) * (c.phi_hidden > 0)
    else:
        d_hidden = d_off
    grads["w_phi"] = np.outer(c.f_global, d_hidden)
    grads["b_phi"] = d_hidden
    d_g = params.w_phi @ d_hidden

    # global pooling
    d_x += d_g[:d] / n
    d_x[c.max_idx, np.arange(d)] += d_g[d:]

    grads.update(w_pre=g_wpre, w_e=g_we, w_n=g_wn)
    ordered = {k: grads[k] for k in params.tensors()}
    return BlockGrads(params=ordered, d_x=d_x)
