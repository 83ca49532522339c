import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softhgnn.errors import ConfigError, EmptyInputError
from softhgnn.softhg import (
    NormMode,
    SoftHGParams,
    dynamic_prototypes,
    global_context,
    init_params,
    load_params,
    normalize,
    participation_scores,
    save_params,
)


def tiny_params(d=2, m=1, heads=1, **kw):
    z = np.zeros
    base = dict(
        p0=z((m, d)), w_phi=z((2 * d, m * d)), b_phi=z(m * d), w_pre=np.eye(d),
        w_e=np.eye(d), w_n=np.eye(d), heads=heads,
    )
    base.update(kw)
    return SoftHGParams(**base)


def test_global_context_hand_case():
    np.testing.assert_array_equal(global_context([[1, 3], [5, 7]]), [3, 5, 5, 7])


def test_global_context_single_row_and_constant():
    r = np.array([[0.5, -2.0, 3.0]])
    np.testing.assert_array_equal(global_context(r), np.concatenate([r[0], r[0]]))
    np.testing.assert_array_equal(global_context(np.full((4, 3), 1.5)), np.full(6, 1.5))


def test_global_context_empty():
    with pytest.raises(EmptyInputError):
        global_context(np.zeros((0, 3)))


def test_prototypes_zero_offset(rng):
    params = init_params(4, 3, 2, rng=rng)
    params = params.with_tensors(w_phi=np.zeros_like(params.w_phi), b_phi=np.zeros_like(params.b_phi))
    np.testing.assert_array_equal(dynamic_prototypes(params, rng.normal(size=8)), params.p0)


def test_prototypes_pure_offset(rng):
    params = init_params(4, 3, 2, rng=rng)
    v = rng.normal(size=12)
    params = params.with_tensors(p0=np.zeros((3, 4)), w_phi=np.zeros_like(params.w_phi), b_phi=v)
    np.testing.assert_array_equal(dynamic_prototypes(params, rng.normal(size=8)), v.reshape(3, 4))


def test_prototypes_loop_oracle(rng):
    params = init_params(4, 3, 2, rng=rng)
    f = rng.normal(size=8)
    expected = np.zeros((3, 4))
    for m in range(3):
        for k in range(4):
            col = m * 4 + k  # hyperedge-major reshape
            expected[m, k] = params.p0[m, k] + params.b_phi[col] + sum(params.w_phi[r, col] * f[r] for r in range(8))
    np.testing.assert_allclose(dynamic_prototypes(params, f), expected, atol=1e-12)


def test_scores_single_dot_product():
    params = tiny_params()
    s = participation_scores(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]), params)
    assert s[0, 0] == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_scores_zero_input(rng):
    params = init_params(4, 3, 2, rng=rng)
    np.testing.assert_array_equal(participation_scores(np.zeros((5, 4)), rng.normal(size=(3, 4)), params), 0.0)


def test_scores_two_heads_per_head_oracle(rng):
    params = init_params(4, 3, 2, rng=rng)
    x, p = rng.normal(size=(5, 4)), rng.normal(size=(3, 4))
    xp = x @ params.w_pre
    expected = np.zeros((5, 3))
    for i in range(5):
        for m in range(3):
            head0 = xp[i, :2] @ p[m, :2] / math.sqrt(2)
            head1 = xp[i, 2:] @ p[m, 2:] / math.sqrt(2)
            expected[i, m] = (head0 + head1) / 2
    np.testing.assert_allclose(participation_scores(x, p, params), expected, atol=1e-12)


def test_heads_must_divide_d(rng):
    with pytest.raises(ConfigError):
        init_params(6, 3, 4, rng=rng)


def test_normalize_modes():
    s = np.zeros((3, 2))
    np.testing.assert_allclose(normalize(s, NormMode.ENORM).a, 1 / 3)
    np.testing.assert_allclose(normalize(s, NormMode.VNORM).a, 1 / 2)
    part = normalize(s)
    assert part.mode is NormMode.ENORM
    assert part.s_raw is s


def test_normalize_none_passes_raw(rng):
    s = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(normalize(s, "none").a, s)


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(1, 12), st.integers(1, 8))
def test_score_and_participation_vertex_equivariance(seed, n, m):
    rng = np.random.default_rng(seed)
    params = init_params(4, m, 2, rng=rng)
    x, p = rng.normal(size=(n, 4)), rng.normal(size=(m, 4))
    perm = rng.permutation(n)
    s, s_perm = participation_scores(x, p, params), participation_scores(x[perm], p, params)
    np.testing.assert_allclose(s_perm, s[perm], atol=1e-12)
    for mode in ("enorm", "vnorm"):
        np.testing.assert_allclose(normalize(s_perm, mode).a, normalize(s, mode).a[perm], atol=1e-12)


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.floats(-30, 30))
def test_enorm_column_shift(seed, c):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=(6, 4))
    shifted = s.copy()
    shifted[:, 2] += c
    np.testing.assert_allclose(normalize(shifted).a[:, 2], normalize(s).a[:, 2], atol=1e-12)


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_normalization_invariants_random(seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(scale=5, size=(rng.integers(1, 16), rng.integers(1, 16)))
    e, v = normalize(s, "enorm").a, normalize(s, "vnorm").a
    assert np.abs(e.sum(axis=0) - 1).max() < 1e-9
    assert np.abs(v.sum(axis=1) - 1).max() < 1e-9
    assert e.min() >= 0 and e.max() <= 1


def test_serialization_roundtrip(tmp_path, rng):
    params = init_params(4, 3, 2, rng=rng, phi_hidden=5, norm_mode="vnorm", activation="gelu")
    path = tmp_path / "p.json"
    save_params(path, params, {"head_w": np.arange(6.0).reshape(2, 3)})
    loaded, extra = load_params(path)
    assert loaded.heads == 2 and loaded.norm_mode is NormMode.VNORM and loaded.two_layer_phi
    for name, arr in params.tensors().items():
        np.testing.assert_array_equal(loaded.tensors()[name], arr)
    np.testing.assert_array_equal(extra["head_w"], np.arange(6.0).reshape(2, 3))
