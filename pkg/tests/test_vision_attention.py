import math

import numpy as np
from hypothesis import given, settings, strategies as st

from protestlens.tensor import Tensor
from protestlens.vision import (
    cosine_window_attention,
    log_cpb_bias,
    log_spaced_coords,
    relative_position_index,
    shift_mask,
)


def _dense_formula(q, k, v, tau, bias, allowed=None):
    """Brute-force loop over pairs: cos(q_i, k_j) / tau + bias, softmax over j."""
    nw, h, n, _ = q.shape
    out = np.zeros_like(v)
    for w in range(nw):
        for hh in range(h):
            for i in range(n):
                logits = np.empty(n)
                for j in range(n):
                    cos = q[w, hh, i] @ k[w, hh, j] / (np.linalg.norm(q[w, hh, i]) * np.linalg.norm(k[w, hh, j]))
                    logits[j] = cos / tau[hh] + bias[hh, i, j]
                    if allowed is not None and not allowed[w % allowed.shape[0], i, j]:
                        logits[j] = -np.inf
                p = np.exp(logits - logits.max())
                out[w, hh, i] = (p / p.sum()) @ v[w, hh]
    return out


def test_identical_rows_give_mean_of_v(rng):
    row = rng.standard_normal(5)
    q = np.broadcast_to(row, (1, 1, 4, 5)).copy()
    v = rng.standard_normal((1, 1, 4, 5))
    out = cosine_window_attention(q, q.copy(), v, np.log([0.1]))
    np.testing.assert_allclose(out.data[0, 0], np.broadcast_to(v[0, 0].mean(0), (4, 5)), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-8.0, 3.0))
def test_pre_bias_logits_are_bounded(seed, log_tau):
    rng = np.random.default_rng(seed)
    q, k, v = (rng.standard_normal((3, 2, 4, 6)) * 10 for _ in range(3))
    q[0, 0, 0] = 0.0  # a zero row must not produce NaN
    tau = np.array([log_tau, log_tau + 1.0])
    out, pre, probs = cosine_window_attention(q, k, v, tau, return_details=True)
    inv = 1.0 / np.exp(np.maximum(tau, math.log(0.01)))
    assert np.all(np.abs(pre.data) <= inv[None, :, None, None] * (1 + 1e-12))
    assert np.all(np.isfinite(out.data)) and np.all(np.isfinite(probs.data))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_q_row_rescaling_leaves_attention_unchanged(seed, scale):
    rng = np.random.default_rng(seed)
    q, k, v = (rng.standard_normal((2, 2, 4, 3)) for _ in range(3))
    bias = rng.standard_normal((2, 4, 4))
    _, _, p1 = cosine_window_attention(q, k, v, np.log([0.3, 0.05]), bias, return_details=True)
    q2 = q.copy()
    q2[1, 0, 2] *= scale
    _, _, p2 = cosine_window_attention(q2, k, v, np.log([0.3, 0.05]), bias, return_details=True)
    assert np.abs(p1.data - p2.data).max() < 1e-6


def test_dense_formula_oracle(rng):
    q, k, v = (rng.standard_normal((3, 2, 4, 5)) for _ in range(3))
    tau = np.array([0.2, 0.07])
    bias = rng.standard_normal((2, 4, 4))
    out = cosine_window_attention(q, k, v, np.log(tau), bias)
    np.testing.assert_allclose(out.data, _dense_formula(q, k, v, tau, bias), atol=1e-5)


def test_tau_is_clamped(rng):
    q, k, v = (rng.standard_normal((1, 1, 4, 3)) for _ in range(3))
    a = cosine_window_attention(q, k, v, np.array([math.log(1e-4)])).data
    b = cosine_window_attention(q, k, v, np.array([math.log(0.01)])).data
    np.testing.assert_array_equal(a, b)


def test_shift_mask_zeroes_cross_region_weights(rng):
    mask = shift_mask(16, 16, 4, 2)
    q, k, v = (rng.standard_normal((16, 2, 16, 4)) for _ in range(3))
    _, _, probs = cosine_window_attention(q, k, v, np.log([0.1, 0.1]), shift_mask=mask, return_details=True)
    forbidden = ~mask[:, None]
    assert np.all(probs.data[np.broadcast_to(forbidden, probs.shape)] == 0.0)
    np.testing.assert_allclose(probs.data.sum(-1), 1.0, atol=1e-12)
    oracle = _dense_formula(q, k, v, np.array([0.1, 0.1]), np.zeros((2, 16, 16)), mask)
    out = cosine_window_attention(q, k, v, np.log([0.1, 0.1]), shift_mask=mask)
    np.testing.assert_allclose(out.data, oracle, atol=1e-5)


def test_log_spaced_coordinates():
    np.testing.assert_array_equal(log_spaced_coords(np.array([[0, 0]]), 8), [[0.0, 0.0]])
    np.testing.assert_allclose(log_spaced_coords(np.array([[7, 0]]), 8), [[1.0, 0.0]])
    np.testing.assert_allclose(log_spaced_coords(np.array([[-3, 1]]), 4), [[-1.0, 0.5]])


def _cpb_weights(rng, hidden=16, heads=3):
    return (Tensor(rng.standard_normal((2, hidden))), Tensor(rng.standard_normal(hidden)),
            Tensor(rng.standard_normal((hidden, heads))))


def test_zero_final_layer_gives_zero_bias(rng):
    w1, b1, w2 = _cpb_weights(rng)
    w2.data[...] = 0
    np.testing.assert_array_equal(log_cpb_bias(4, w1, b1, w2, 3).data, 0.0)


def test_bias_is_translation_invariant(rng):
    window = 4
    bias = log_cpb_bias(window, *_cpb_weights(rng), 3).data
    assert bias.shape == (3, 16, 16)
    coords = [(i // window, i % window) for i in range(window * window)]
    seen = {}
    for i, (yi, xi) in enumerate(coords):
        for j, (yj, xj) in enumerate(coords):
            key = (yi - yj, xi - xj)
            if key in seen:
                np.testing.assert_array_equal(bias[:, i, j], seen[key])
            else:
                seen[key] = bias[:, i, j]
    assert len(seen) == (2 * window - 1) ** 2


def test_relative_position_index_range():
    idx = relative_position_index(3)
    assert idx.min() == 0 and idx.max() == 24
    assert idx[4, 4] == 12  # zero displacement sits in the centre of the table
