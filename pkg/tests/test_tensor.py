import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from softhgnn.errors import ShapeError
from softhgnn.tensor import matmul, softmax_cols, softmax_rows

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def score_matrices(max_side=8):
    return arrays(np.float64, st.tuples(st.integers(1, max_side), st.integers(1, max_side)), elements=finite)


def loop_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_matmul_hand_case():
    got = matmul([[1, 2], [3, 4]], [[5, 6], [7, 8]])
    np.testing.assert_array_equal(got, [[19, 22], [43, 50]])


def test_matmul_identity_and_zero(rng):
    b = rng.normal(size=(3, 4))
    np.testing.assert_array_equal(matmul(np.eye(3), b), b)
    np.testing.assert_array_equal(matmul(np.zeros((2, 3)), b), np.zeros((2, 4)))


def test_matmul_matches_triple_loop(rng):
    for _ in range(20):
        a, b = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
        ref = loop_matmul(a, b)
        assert np.max(np.abs(matmul(a, b) - ref) / np.maximum(np.abs(ref), 1e-300)) < 1e-12


def test_matmul_associative(rng):
    a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
    np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=1e-12, atol=1e-12)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_softmax_cols_cases():
    np.testing.assert_allclose(softmax_cols(np.zeros((2, 2))), 0.5)
    got = softmax_cols(np.array([[np.log(2)], [0.0]]))
    np.testing.assert_allclose(got[:, 0], [2 / 3, 1 / 3], rtol=1e-14)


def test_softmax_rows_cases():
    np.testing.assert_allclose(softmax_rows(np.zeros((2, 3))), 1 / 3)
    got = softmax_rows(np.array([[0.0, np.log(3)]]))
    np.testing.assert_allclose(got[0], [0.25, 0.75], rtol=1e-14)


def test_softmax_large_scores_stay_finite():
    s = np.array([[1000.0, -1000.0], [999.0, 0.0]])
    assert np.all(np.isfinite(softmax_cols(s)))
    assert np.all(np.isfinite(softmax_rows(s)))


@given(score_matrices())
def test_softmax_normalization(s):
    c, r = softmax_cols(s), softmax_rows(s)
    np.testing.assert_allclose(c.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(r.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((c >= 0) & (c <= 1)) and np.all((r >= 0) & (r <= 1))


@settings(max_examples=50)
@given(score_matrices(), st.data())
def test_softmax_cols_shift_invariance(s, data):
    shift = np.array(data.draw(st.lists(finite, min_size=s.shape[1], max_size=s.shape[1])))
    np.testing.assert_allclose(softmax_cols(s + shift[None, :]), softmax_cols(s), atol=1e-12)
