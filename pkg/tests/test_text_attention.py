import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from protestlens.errors import NumericError, ParameterError
from protestlens.text import GLOBAL, LOCAL, PAD, attention_mask, dense_masked_attention, make_flags, sliding_window_attention


def _qkv(rng, *shape):
    return [rng.standard_normal(shape) for _ in range(3)]


def _dense_full(q, k, v):
    s = q @ np.swapaxes(k, -1, -2) / np.sqrt(q.shape[-1])
    s = np.exp(s - s.max(-1, keepdims=True))
    return (s / s.sum(-1, keepdims=True)) @ v


def test_single_token_returns_v(rng):
    q, k, v = _qkv(rng, 2, 1, 4)
    out = sliding_window_attention(q, k, v, 2, np.array([GLOBAL]))
    np.testing.assert_allclose(out.data, v, atol=1e-12)


def test_wide_window_is_full_attention(rng):
    q, k, v = _qkv(rng, 3, 6, 4)
    out = sliding_window_attention(q, k, v, 12, np.full(6, LOCAL))
    np.testing.assert_allclose(out.data, _dense_full(q, k, v), atol=1e-12)


def test_matches_dense_oracle_len16(rng):
    q, k, v = _qkv(rng, 2, 16, 8)
    flags = make_flags(16, 16, (0,))
    out = sliding_window_attention(q, k, v, 4, flags)
    np.testing.assert_allclose(out.data, dense_masked_attention(q, k, v, 4, flags), atol=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.sampled_from([2, 4, 8]), st.integers(0, 2**31 - 1), st.booleans())
def test_matches_dense_oracle_random(length, window, seed, padded):
    rng = np.random.default_rng(seed)
    q, k, v = _qkv(rng, 2, 3, length, 4)
    real = int(rng.integers(1, length + 1)) if padded else length
    extra = tuple(int(p) for p in rng.choice(length, size=min(2, length), replace=False))
    flags = np.stack([make_flags(length, length, (0,) + extra), make_flags(real, length, (0,))])
    out = sliding_window_attention(q, k, v, window, flags)
    np.testing.assert_allclose(out.data, dense_masked_attention(q, k, v, window, flags), atol=1e-9)


def test_mask_structure():
    flags = np.array([GLOBAL, LOCAL, LOCAL, LOCAL, LOCAL, PAD])
    m = attention_mask(flags, 2)
    assert m[0, :5].all() and not m[0, 5]  # global row sees every real token
    assert m[:5, 0].all()  # everybody sees the global token
    assert m[3].tolist() == [True, False, True, True, True, False]
    assert not m[5].any() and not m[:, 5].any()  # padding is inert


def test_padding_rows_are_zero(rng):
    q, k, v = _qkv(rng, 1, 6, 3)
    out = sliding_window_attention(q, k, v, 2, make_flags(4, 6, (0,)))
    np.testing.assert_array_equal(out.data[0, 4:], 0.0)


def test_nan_input_is_rejected(rng):
    q, k, v = _qkv(rng, 1, 4, 2)
    q[0, 1, 0] = np.nan
    with pytest.raises(NumericError):
        sliding_window_attention(q, k, v, 2, make_flags(4, 4, (0,)))


@pytest.mark.parametrize("window", [0, 3])
def test_bad_window(rng, window):
    q, k, v = _qkv(rng, 1, 4, 2)
    with pytest.raises(ParameterError):
        sliding_window_attention(q, k, v, window, make_flags(4, 4, (0,)))
