"""Comparison points: rule-built hypergraphs, classical hypergraph
convolution, and single-head self-attention."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateStructureError, ShapeError
from .softhg import Activation, activate
from .tensor import as_matrix, softmax_rows


@dataclass
class Incidence:
    """Binary vertex-by-hyperedge membership; column ``e`` is hyperedge ``e``."""

    h: np.ndarray

    @property
    def vertex_degrees(self) -> np.ndarray:
        return self.h.sum(axis=1)

    @property
    def edge_degrees(self) -> np.ndarray:
        return self.h.sum(axis=0)

    def members(self, e: int) -> list[int]:
        return np.flatnonzero(self.h[:, e]).tolist()


def pairwise_sq_distances(x) -> np.ndarray:
    x = as_matrix(x, "x")
    sq = np.einsum("ij,ij->i", x, x)
    dist = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(dist, 0.0, out=dist)
    np.fill_diagonal(dist, 0.0)
    return dist


def knn_hypergraph(x, k: int) -> Incidence:
    """One hyperedge per vertex: the vertex plus its ``k`` nearest neighbours.

    Equal distances are resolved toward the lower vertex index.
    """
    x = as_matrix(x, "x")
    n = x.shape[0]
    if not 0 <= k < n:
        raise ConfigError(f"k={k} must satisfy 0 <= k < N={n}")
    dist = pairwise_sq_distances(x)
    np.fill_diagonal(dist, -np.inf)  # centre vertex always ranks first
    h = np.zeros((n, n), dtype=x.dtype)
    if k + 1 < n:
        # candidates within the (k+1)-th smallest distance, then a stable sort
        # among them so ties keep index order
        part = np.argpartition(dist, k, axis=1)[:, : k + 1]
        kth = np.take_along_axis(dist, part, axis=1).max(axis=1)
        for e in range(n):
            cand = np.flatnonzero(dist[e] <= kth[e])
            order = cand[np.argsort(dist[e, cand], kind="stable")]
            h[order[: k + 1], e] = 1
    else:
        h[:] = 1
    return Incidence(h)


def eps_hypergraph(x, eps: float) -> Incidence:
    """One hyperedge per vertex: every vertex within distance ``eps``."""
    if eps < 0:
        raise ConfigError(f"eps must be non-negative, got {eps}")
    dist = pairwise_sq_distances(x)
    with np.errstate(over="ignore"):
        radius_sq = np.float64(eps) ** 2
    h = (dist <= radius_sq).astype(np.float64)
    np.fill_diagonal(h, 1.0)
    return Incidence(h)


def hgnn_conv(x, inc: Incidence, theta, activation: Activation | str = Activation.IDENTITY) -> np.ndarray:
    """``act(Dv^-1 H De^-1 H^T X Theta)`` with unit hyperedge weights."""
    x, theta = as_matrix(x, "x"), as_matrix(theta, "theta")
    h = as_matrix(inc.h, "H")
    if h.shape[0] != x.shape[0] or theta.shape[0] != x.shape[1]:
        raise ShapeError(f"hgnn_conv: H{h.shape}, x{x.shape}, theta{theta.shape} are inconsistent")
    dv, de = h.sum(axis=1), h.sum(axis=0)
    if (dv == 0).any():
        raise DegenerateStructureError(f"vertex {int(np.flatnonzero(dv == 0)[0])} belongs to no hyperedge")
    if (de == 0).any():
        raise DegenerateStructureError(f"hyperedge {int(np.flatnonzero(de == 0)[0])} is empty")
    edge_feats = (h.T @ x) / de[:, None]
    vert_feats = (h @ edge_feats) / dv[:, None]
    return activate(vert_feats @ theta, Activation(activation))


@dataclass
class AttnParams:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, dtype=np.float64) -> "AttnParams":
        b = 1.0 / np.sqrt(d)
        return cls(*(rng.uniform(-b, b, size=(d, d)).astype(dtype) for _ in range(3)))


def self_attention(x, params: AttnParams) -> np.ndarray:
    """Single-head scaled dot-product self-attention."""
    x = as_matrix(x, "x")
    d = x.shape[1]
    for name in ("w_q", "w_k", "w_v"):
        w = getattr(params, name)
        if w.shape[0] != d:
            raise ShapeError(f"{name}{w.shape} incompatible with x{x.shape}")
    q, k, v = x @ params.w_q, x @ params.w_k, x @ params.w_v
    return softmax_rows((q @ k.T) / math.sqrt(d)) @ v
