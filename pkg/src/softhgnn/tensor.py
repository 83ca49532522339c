"""Dense matrix primitives.

Matrices are plain ``numpy.ndarray`` objects of dimension 2.  Every public
function checks shapes up front and raises :class:`ShapeError` naming the
offending shapes.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = [
    "as_matrix",
    "matmul",
    "softmax_cols",
    "softmax_rows",
    "softmax_cols_backward",
    "softmax_rows_backward",
]


def as_matrix(a, name: str = "matrix", dtype=None) -> np.ndarray:
    """Return ``a`` as a 2-D array, raising ShapeError otherwise."""
    arr = np.asarray(a, dtype=dtype)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: a{a.shape} @ b{b.shape}")
    return a @ b


def _softmax(s: np.ndarray, axis: int) -> np.ndarray:
    z = s - s.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cols(s) -> np.ndarray:
    """Softmax over the vertex axis: every column sums to one."""
    return _softmax(as_matrix(s, "scores"), axis=0)


def softmax_rows(s) -> np.ndarray:
    """Softmax over the hyperedge axis: every row sums to one."""
    return _softmax(as_matrix(s, "scores"), axis=1)


def softmax_cols_backward(a: np.ndarray, da: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the scores given ``a = softmax_cols(s)`` and dL/da."""
    return a * (da - (da * a).sum(axis=0, keepdims=True))


def softmax_rows_backward(a: np.ndarray, da: np.ndarray) -> np.ndarray:
    return a * (da - (da * a).sum(axis=1, keepdims=True))
