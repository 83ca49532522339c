"""Soft hyperedge generation.

Builds the sample-specific participation matrix: pool a global context from
the vertex features, offset the shared prototypes with it, score every
vertex against every prototype head-wise, and softmax-normalize the scores.
"""

from __future__ import annotations

import enum
import math
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, EmptyInputError, ShapeError
from .tensor import as_matrix, softmax_cols, softmax_rows


class NormMode(str, enum.Enum):
    ENORM = "enorm"  # softmax over vertices, per hyperedge
    VNORM = "vnorm"  # softmax over hyperedges, per vertex
    NONE = "none"


class Activation(str, enum.Enum):
    RELU = "relu"
    GELU = "gelu"
    IDENTITY = "identity"


def activate(z: np.ndarray, kind: Activation) -> np.ndarray:
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    if kind is Activation.GELU:
        return z * ndtr(z)
    return z


def activate_grad(z: np.ndarray, kind: Activation) -> np.ndarray:
    """Elementwise derivative of the activation at pre-activation ``z``.

    The ReLU derivative at exactly zero is taken as 0.
    """
    if kind is Activation.RELU:
        return (z > 0).astype(z.dtype)
    if kind is Activation.GELU:
        return ndtr(z) + z * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return np.ones_like(z)


# Parameter tensors in a fixed order; the two-layer offset network adds
# w_phi2 / b_phi2.
PARAM_NAMES = ("p0", "w_phi", "b_phi", "w_phi2", "b_phi2", "w_pre", "w_e", "w_n")


@dataclass
class SoftHGParams:
    """Learnable tensors and hyperparameters of one SoftHGNN block.

    ``w_phi`` is (2D, M*D) for the single-layer offset network.  With a
    hidden layer of width H it is (2D, H) and ``w_phi2`` is (H, M*D).
    Offsets are reshaped hyperedge-major: the first D outputs belong to
    hyperedge 0.
    """

    p0: np.ndarray
    w_phi: np.ndarray
    b_phi: np.ndarray
    w_pre: np.ndarray
    w_e: np.ndarray
    w_n: np.ndarray
    heads: int = 8
    norm_mode: NormMode = NormMode.ENORM
    activation: Activation = Activation.RELU
    residual: bool = True
    w_phi2: Optional[np.ndarray] = None
    b_phi2: Optional[np.ndarray] = None

    def __post_init__(self):
        self.norm_mode = NormMode(self.norm_mode)
        self.activation = Activation(self.activation)
        self.validate()

    @property
    def m(self) -> int:
        return self.p0.shape[0]

    @property
    def d(self) -> int:
        return self.p0.shape[1]

    @property
    def d_head(self) -> int:
        return self.d // self.heads

    @property
    def d_out(self) -> int:
        return self.w_n.shape[0]

    @property
    def two_layer_phi(self) -> bool:
        return self.w_phi2 is not None

    def validate(self) -> None:
        m, d = self.p0.shape
        if self.heads < 1 or d % self.heads:
            raise ConfigError(f"heads={self.heads} does not divide D={d}")
        out_phi = self.w_phi2.shape[1] if self.two_layer_phi else self.w_phi.shape[1]
        if self.w_phi.shape[0] != 2 * d or out_phi != m * d:
            raise ShapeError(f"offset network maps {self.w_phi.shape[0]}->{out_phi}, need {2 * d}->{m * d}")
        if self.b_phi.shape != (self.w_phi.shape[1],):
            raise ShapeError(f"b_phi shape {self.b_phi.shape} != ({self.w_phi.shape[1]},)")
        if self.two_layer_phi:
            if self.w_phi2.shape[0] != self.w_phi.shape[1] or self.b_phi2 is None or self.b_phi2.shape != (m * d,):
                raise ShapeError("inconsistent two-layer offset network shapes")
        if self.w_pre.shape != (d, d):
            raise ShapeError(f"w_pre shape {self.w_pre.shape} != ({d}, {d})")
        if self.w_e.shape[1] != d:
            raise ShapeError(f"w_e shape {self.w_e.shape} needs {d} columns")
        if self.w_n.shape[1] != self.w_e.shape[0]:
            raise ShapeError(f"w_n shape {self.w_n.shape} incompatible with w_e {self.w_e.shape}")
        if self.residual and self.w_n.shape[0] != d:
            raise ConfigError(f"residual requires D''={self.w_n.shape[0]} == D={d}")
        for name, arr in self.tensors().items():
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"parameter {name} has non-finite entries")

    def tensors(self) -> dict[str, np.ndarray]:
        """Learnable tensors by name (absent optional ones omitted)."""
        out = {}
        for name in PARAM_NAMES:
            arr = getattr(self, name)
            if arr is not None:
                out[name] = arr
        return out

    def with_tensors(self, **tensors) -> "SoftHGParams":
        return replace(self, **tensors)

    def copy(self) -> "SoftHGParams":
        return self.with_tensors(**{k: v.copy() for k, v in self.tensors().items()})


def init_params(
    d: int,
    m: int = 8,
    heads: int = 8,
    *,
    rng: np.random.Generator,
    d_edge: Optional[int] = None,
    d_out: Optional[int] = None,
    phi_hidden: Optional[int] = None,
    norm_mode: NormMode | str = NormMode.ENORM,
    activation: Activation | str = Activation.RELU,
    residual: Optional[bool] = None,
    dtype=np.float64,
) -> SoftHGParams:
    """Draw parameters uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].

    Biases use the fan-in of their layer; the prototypes use fan-in D.
    Residual defaults to on whenever the output width equals D.
    """
    d_edge = d if d_edge is None else d_edge
    d_out = d if d_out is None else d_out

    def uni(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    extra = {}
    if phi_hidden:
        w_phi = uni((2 * d, phi_hidden), 2 * d)
        b_phi = uni((phi_hidden,), 2 * d)
        extra["w_phi2"] = uni((phi_hidden, m * d), phi_hidden)
        extra["b_phi2"] = uni((m * d,), phi_hidden)
    else:
        w_phi = uni((2 * d, m * d), 2 * d)
        b_phi = uni((m * d,), 2 * d)
    return SoftHGParams(
        p0=uni((m, d), d),
        w_phi=w_phi,
        b_phi=b_phi,
        w_pre=uni((d, d), d),
        w_e=uni((d_edge, d), d),
        w_n=uni((d_out, d_edge), d_edge),
        heads=heads,
        norm_mode=NormMode(norm_mode),
        activation=Activation(activation),
        residual=(d_out == d) if residual is None else residual,
        **extra,
    )


def global_context(x) -> np.ndarray:
    """Concatenate the column means and column maxima of ``x`` (length 2D)."""
    x = as_matrix(x, "x")
    if x.shape[0] == 0:
        raise EmptyInputError("global_context needs at least one vertex")
    return np.concatenate([x.mean(axis=0), x.max(axis=0)])


def prototype_offsets(params: SoftHGParams, f_global: np.ndarray) -> np.ndarray:
    """Offset network output reshaped to (M, D)."""
    f_global = np.asarray(f_global)
    if f_global.shape != (2 * params.d,):
        raise ShapeError(f"f_global shape {f_global.shape} != ({2 * params.d},)")
    out = f_global @ params.w_phi + params.b_phi
    if params.two_layer_phi:
        out = np.maximum(out, 0.0) @ params.w_phi2 + params.b_phi2
    return out.reshape(params.m, params.d)


def dynamic_prototypes(params: SoftHGParams, f_global: np.ndarray) -> np.ndarray:
    return params.p0 + prototype_offsets(params, f_global)


def score_scale(params: SoftHGParams) -> float:
    """Combined factor of the per-head 1/sqrt(D_head) and the 1/h head mean."""
    return 1.0 / (params.heads * math.sqrt(params.d_head))


def participation_scores(x, p, params: SoftHGParams) -> np.ndarray:
    """Head-averaged scaled dot-product scores between vertices and prototypes."""
    x = as_matrix(x, "x")
    p = as_matrix(p, "prototypes")
    d, h = params.d, params.heads
    if d % h:
        raise ConfigError(f"heads={h} does not divide D={d}")
    if x.shape[1] != d or p.shape[1] != d:
        raise ShapeError(f"x{x.shape} and prototypes{p.shape} must both have D={d} columns")
    return head_scores(x @ params.w_pre, p, h)


def head_scores(x_proj: np.ndarray, p: np.ndarray, h: int) -> np.ndarray:
    n, d = x_proj.shape
    dh = d // h
    xh = x_proj.reshape(n, h, dh)
    ph = p.reshape(p.shape[0], h, dh)
    per_head = np.einsum("nhk,mhk->hnm", xh, ph) / math.sqrt(dh)
    return per_head.mean(axis=0)


@dataclass
class Participation:
    a: np.ndarray
    mode: NormMode
    s_raw: np.ndarray
    # hyperedge indices (into s_raw columns) that are active in ``a``
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.active is None:
            self.active = np.arange(self.s_raw.shape[1])


def normalize(s, mode: NormMode | str = NormMode.ENORM) -> Participation:
    s = as_matrix(s, "scores")
    mode = NormMode(mode)
    if mode is NormMode.ENORM:
        a = softmax_cols(s)
    elif mode is NormMode.VNORM:
        a = softmax_rows(s)
    else:
        a = s.copy()
    return Participation(a=a, mode=mode, s_raw=s)


# --- serialization -------------------------------------------------------

_META_KEY = "_meta"


def params_to_dict(params: SoftHGParams, extra: Optional[dict[str, np.ndarray]] = None) -> dict:
    """Flat mapping name -> {shape, values}; hyperparameters under ``_meta``."""
    out = {}
    for name, arr in {**params.tensors(), **(extra or {})}.items():
        out[name] = {"shape": list(arr.shape), "values": np.asarray(arr, dtype=float).ravel().tolist()}
    out[_META_KEY] = {
        "heads": params.heads,
        "norm_mode": params.norm_mode.value,
        "activation": params.activation.value,
        "residual": params.residual,
    }
    return out


def params_from_dict(obj: dict) -> tuple[SoftHGParams, dict[str, np.ndarray]]:
    """Inverse of :func:`params_to_dict`; unknown tensors come back as extras."""
    meta = obj.get(_META_KEY, {})
    tensors, extra = {}, {}
    for name, entry in obj.items():
        if name == _META_KEY:
            continue
        arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        (tensors if name in PARAM_NAMES else extra)[name] = arr
    missing = {"p0", "w_phi", "b_phi", "w_pre", "w_e", "w_n"} - set(tensors)
    if missing:
        raise ConfigError(f"parameter file lacks {sorted(missing)}")
    params = SoftHGParams(**tensors, **meta)
    return params, extra


def save_params(path, params: SoftHGParams, extra: Optional[dict[str, np.ndarray]] = None) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, extra)))


def load_params(path) -> tuple[SoftHGParams, dict[str, np.ndarray]]:
    return params_from_dict(json.loads(Path(path).read_text()))
