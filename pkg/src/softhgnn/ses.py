"""Sparse hyperedge selection and the load-balancing statistic.

The first ``m_fixed`` score columns are always active.  Of the remaining
``m_dyn`` dynamic columns, the ``k`` with the largest summed raw score are
kept for the current sample.  A ring buffer of recent selection masks gives
per-hyperedge activation frequencies, and their squared deviation from the
uniform rate ``k / m_dyn`` is the balance loss.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .softhg import NormMode, Participation
from .tensor import as_matrix, softmax_cols


@dataclass(frozen=True)
class SeSConfig:
    m_fixed: int = 16
    m_dyn: int = 32
    k: int = 16
    window: int = 64

    def __post_init__(self):
        if self.m_fixed < 0 or self.m_dyn < 1:
            raise ConfigError(f"need m_fixed >= 0 and m_dyn >= 1, got {self.m_fixed}/{self.m_dyn}")
        if not 1 <= self.k <= self.m_dyn:
            raise ConfigError(f"k={self.k} must lie in [1, m_dyn={self.m_dyn}]")
        if self.window < 1:
            raise ConfigError(f"window must be positive, got {self.window}")

    @property
    def m_total(self) -> int:
        return self.m_fixed + self.m_dyn

    @property
    def p_target(self) -> float:
        return self.k / self.m_dyn


@dataclass
class SeSState:
    cfg: SeSConfig
    masks: deque = field(init=False)
    p: np.ndarray = field(init=False)
    passes_seen: int = 0

    def __post_init__(self):
        self.reset()

    def reset(self) -> None:
        self.masks = deque(maxlen=self.cfg.window)
        self.p = np.zeros(self.cfg.m_dyn)
        self.passes_seen = 0

    @property
    def window_full(self) -> bool:
        return len(self.masks) == self.cfg.window

    def dump(self) -> dict:
        return {
            "p": self.p.tolist(),
            "passes_seen": self.passes_seen,
            "window": self.cfg.window,
        }


def activation_scores(s_dyn) -> np.ndarray:
    """Column sums of the raw dynamic-hyperedge scores."""
    return as_matrix(s_dyn, "s_dyn").sum(axis=0)


def select_topk(g, k: int) -> np.ndarray:
    """Indices of the ``k`` largest entries, ascending; ties go to lower index."""
    g = np.asarray(g)
    if not 1 <= k <= g.shape[0]:
        raise ConfigError(f"k={k} must lie in [1, {g.shape[0]}]")
    # stable sort on -g keeps lower indices first among equal scores
    order = np.argsort(-g, kind="stable")
    return np.sort(order[:k])


def build_participation_ses(s_fixed, s_dyn, sel) -> Participation:
    """Concatenate fixed and selected dynamic scores, then softmax over vertices."""
    s_fixed = as_matrix(s_fixed, "s_fixed")
    s_dyn = as_matrix(s_dyn, "s_dyn")
    sel = np.asarray(sel, dtype=np.intp)
    if s_fixed.shape[0] != s_dyn.shape[0]:
        raise ShapeError(f"s_fixed{s_fixed.shape} and s_dyn{s_dyn.shape} differ in vertex count")
    if sel.size and (sel.min() < 0 or sel.max() >= s_dyn.shape[1]):
        raise ShapeError(f"selection {sel.tolist()} out of range for {s_dyn.shape[1]} dynamic hyperedges")
    s_sel = np.concatenate([s_fixed, s_dyn[:, sel]], axis=1)
    m_fixed = s_fixed.shape[1]
    return Participation(
        a=softmax_cols(s_sel),
        mode=NormMode.ENORM,
        s_raw=np.concatenate([s_fixed, s_dyn], axis=1),
        active=np.concatenate([np.arange(m_fixed), m_fixed + sel]),
    )


def ses_participation(s, cfg: SeSConfig) -> tuple[Participation, np.ndarray]:
    """Run selection on a full raw score matrix; returns (participation, sel)."""
    s = as_matrix(s, "scores")
    if s.shape[1] != cfg.m_total:
        raise ShapeError(f"scores have {s.shape[1]} columns, SeS expects {cfg.m_total}")
    s_fixed, s_dyn = s[:, : cfg.m_fixed], s[:, cfg.m_fixed :]
    sel = select_topk(activation_scores(s_dyn), cfg.k)
    return build_participation_ses(s_fixed, s_dyn, sel), sel


def balance_loss(p: np.ndarray, p_target: float) -> float:
    return float(np.mean((np.asarray(p) - p_target) ** 2))


def record_and_balance(state: SeSState, sel, cfg: SeSConfig | None = None) -> float:
    """Push the selection mask for one pass and return the balance loss."""
    cfg = state.cfg if cfg is None else cfg
    mask = np.zeros(cfg.m_dyn)
    mask[np.asarray(sel, dtype=np.intp)] = 1.0
    state.masks.append(mask)
    state.passes_seen += 1
    state.p = np.mean(state.masks, axis=0)
    return balance_loss(state.p, cfg.p_target)
