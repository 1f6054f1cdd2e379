"""Banded sliding-window self-attention with global tokens.

Token ``i`` attends to non-padding tokens within ``window // 2`` positions plus
every global token; global tokens attend to every non-padding token. Memory is
O(len * window) for the band plus O(len * n_global) for the global rows and
columns. ``dense_masked_attention`` is the quadratic reference used in tests.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, NumericError, ParameterError
from ..tensor import Tensor, functional as F
from ..tensor.core import as_tensor

PAD, LOCAL, GLOBAL = 0, 1, 2


def _check_inputs(q: Tensor, k: Tensor, v: Tensor, window: int, flags: np.ndarray) -> np.ndarray:
    if window < 2 or window % 2:
        raise ParameterError(f"window must be an even integer >= 2, got {window}")
    if not (q.shape == k.shape == v.shape):
        raise DimensionError(f"q/k/v shapes differ: {q.shape}, {k.shape}, {v.shape}")
    if q.ndim < 2:
        raise DimensionError(f"attention inputs need [..., len, d_head], got {q.shape}")
    flags = np.asarray(flags)
    if flags.shape[-1] != q.shape[-2]:
        raise DimensionError(f"flags length {flags.shape[-1]} != sequence length {q.shape[-2]}")
    for name, t in (("q", q), ("k", k), ("v", v)):
        if not np.all(np.isfinite(t.data)):
            raise NumericError(f"non-finite values in attention input {name}")
    return flags


def _expand_flags(flags: np.ndarray, ndim: int) -> np.ndarray:
    """Reshape [..., len] flags so they broadcast against [..., heads, len]."""
    if flags.ndim == 1:
        return flags
    # flags are [batch..., len]; insert the heads axis
    return flags[..., None, :]


def sliding_window_attention(q, k, v, window: int, flags) -> Tensor:
    """Sliding-window attention over ``[..., heads, len, d_head]`` tensors.

    ``flags`` has shape ``[len]`` or ``[batch..., len]`` with values PAD,
    LOCAL or GLOBAL. Outputs at padding positions are zero.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    flags = _check_inputs(q, k, v, window, flags)
    L, dh = q.shape[-2], q.shape[-1]
    fl = _expand_flags(flags, q.ndim)  # [..., 1?, L]
    nonpad = fl != PAD
    is_global = fl == GLOBAL
    half = window // 2
    eff = min(half, L - 1)
    width = 2 * eff + 1

    qs = F.mul(q, 1.0 / math.sqrt(dh))

    # band keys/values: [..., L, width, dh]
    kb = F.sliding_windows(F.pad(k, -2, eff, eff), width, axis=-2)
    vb = F.sliding_windows(F.pad(v, -2, eff, eff), width, axis=-2)
    band_scores = F.einsum("...ld,...lwd->...lw", qs, kb)

    offsets = np.arange(width) - eff
    key_pos = np.arange(L)[:, None] + offsets[None, :]  # [L, width]
    in_range = (key_pos >= 0) & (key_pos < L)
    key_pos_c = np.clip(key_pos, 0, L - 1)
    band_ok = in_range & nonpad[..., key_pos_c] & nonpad[..., :, None]

    gpos = np.flatnonzero(np.any(is_global.reshape(-1, L), axis=0))
    G = gpos.size

    if G:
        kg = F.take(k, gpos, axis=-2)
        vg = F.take(v, gpos, axis=-2)
        g_scores = F.einsum("...ld,...gd->...lg", qs, kg)
        far = np.abs(np.arange(L)[:, None] - gpos[None, :]) > half  # not already in the band
        g_ok = is_global[..., gpos][..., None, :] & far & nonpad[..., :, None]
        scores = F.concat([band_scores, g_scores], axis=-1)
        lead = np.broadcast_shapes(band_ok.shape[:-1], g_ok.shape[:-1])
        allowed = np.concatenate(
            [np.broadcast_to(band_ok, lead + (width,)), np.broadcast_to(g_ok, lead + (G,))], axis=-1
        )
    else:
        scores, allowed = band_scores, band_ok

    probs = F.softmax(F.masked_fill(scores, allowed), axis=-1)
    if G:
        p_band = F.getitem(probs, (Ellipsis, slice(0, width)))
        p_glob = F.getitem(probs, (Ellipsis, slice(width, width + G)))
        local_out = F.add(
            F.einsum("...lw,...lwd->...ld", p_band, vb),
            F.einsum("...lg,...gd->...ld", p_glob, vg),
        )
        # global rows: full attention over non-padding keys
        qg = F.take(qs, gpos, axis=-2)
        row_scores = F.einsum("...gd,...ld->...gl", qg, k)
        row_ok = np.broadcast_to(nonpad[..., None, :], row_scores.shape[:-2] + (G, L))
        row_probs = F.softmax(F.masked_fill(row_scores, row_ok), axis=-1)
        glob_out = F.scatter_rows(F.einsum("...gl,...ld->...gd", row_probs, v), gpos, L, axis=-2)
        out = F.where(is_global[..., :, None], glob_out, local_out)
    else:
        out = F.einsum("...lw,...lwd->...ld", probs, vb)
    return F.mul(out, nonpad[..., :, None].astype(out.dtype))


def attention_mask(flags, window: int) -> np.ndarray:
    """Dense boolean [..., len, len] mask equivalent to the banded pattern."""
    flags = np.asarray(flags)
    L = flags.shape[-1]
    nonpad = flags != PAD
    is_global = flags == GLOBAL
    idx = np.arange(L)
    band = np.abs(idx[:, None] - idx[None, :]) <= window // 2
    allowed = band | is_global[..., None, :] | is_global[..., :, None]
    return allowed & nonpad[..., :, None] & nonpad[..., None, :]


def dense_masked_attention(q, k, v, window: int, flags) -> np.ndarray:
    """Quadratic reference: full scores, explicit band+global mask, float64."""
    q = np.asarray(getattr(q, "data", q), dtype=np.float64)
    k = np.asarray(getattr(k, "data", k), dtype=np.float64)
    v = np.asarray(getattr(v, "data", v), dtype=np.float64)
    flags = np.asarray(flags)
    mask = attention_mask(flags, window)
    if flags.ndim > 1:
        mask = mask[..., None, :, :]
    scores = q @ np.swapaxes(k, -1, -2) / math.sqrt(q.shape[-1])
    scores = np.where(mask, scores, -np.inf)
    row_any = mask.any(axis=-1, keepdims=True)
    scores = np.where(row_any, scores, 0.0)
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(scores), 0.0)
    denom = e.sum(axis=-1, keepdims=True)
    probs = np.where(row_any, e / np.where(denom == 0, 1, denom), 0.0)
    return probs @ v
