"""Scaled cosine window attention with a log-spaced continuous position bias."""

from __future__ import annotations

import math

import numpy as np

from ..tensor import Tensor, functional as F
from ..tensor.core import as_tensor


def relative_displacements(window: int) -> np.ndarray:
    """All (dy, dx) with each component in [-(window-1), window-1], row-major."""
    r = np.arange(-(window - 1), window)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    return np.stack([dy.reshape(-1), dx.reshape(-1)], axis=1)


def log_spaced_coords(disp: np.ndarray, window: int) -> np.ndarray:
    """sign(d) * log2(1 + |d|) / log2(window), applied per component."""
    d = np.asarray(disp, dtype=np.float64)
    denom = math.log2(window) if window > 1 else 1.0
    return np.sign(d) * np.log2(1.0 + np.abs(d)) / denom


def relative_position_index(window: int) -> np.ndarray:
    """[N, N] index into :func:`relative_displacements` for token pair (i, j)."""
    ys, xs = np.meshgrid(np.arange(window), np.arange(window), indexing="ij")
    coords = np.stack([ys.reshape(-1), xs.reshape(-1)])  # [2, N]
    rel = coords[:, :, None] - coords[:, None, :]  # displacement i - j
    rel = rel + (window - 1)
    return rel[0] * (2 * window - 1) + rel[1]


def log_cpb_bias(window: int, w1: Tensor, b1: Tensor, w2: Tensor, n_heads: int) -> Tensor:
    """[n_heads, N, N] bias from a 2 -> hidden -> n_heads ReLU MLP over
    log-spaced relative coordinates."""
    coords = log_spaced_coords(relative_displacements(window), window).astype(w1.dtype)
    table = F.linear(F.relu(F.linear(as_tensor(coords), w1, b1)), w2)  # [(2w-1)^2, heads]
    idx = relative_position_index(window)
    bias = F.take(table, idx, axis=0)  # [N, N, heads]
    assert bias.shape[-1] == n_heads
    return F.transpose(bias, (2, 0, 1))


def cosine_window_attention(q, k, v, log_tau, bias=None, shift_mask: np.ndarray | None = None,
                            tau_min: float = 0.01, return_details: bool = False):
    """Attention with logits cos(q_i, k_j) / tau + bias[i, j] inside each window.

    q, k, v: [nWin, heads, N, d_head]. ``log_tau`` holds per-head
    log-temperatures, clamped so tau >= ``tau_min``. ``shift_mask`` is a
    boolean [nW, N, N] allow-mask repeated over the leading window axis.
    With ``return_details`` also returns (pre-bias logits, probabilities).
    """
    q, k, v, log_tau = as_tensor(q), as_tensor(k), as_tensor(v), as_tensor(log_tau)
    qn = F.l2_normalize(q, axis=-1, floor=1e-12)
    kn = F.l2_normalize(k, axis=-1, floor=1e-12)
    cos = F.matmul(qn, F.swapaxes(kn, -1, -2))
    inv_tau = F.exp(F.neg(F.clamp_min(log_tau, math.log(tau_min))))
    logits = F.mul(cos, F.reshape(inv_tau, (-1, 1, 1)))
    pre_bias = logits
    if bias is not None:
        logits = F.add(logits, bias)
    if shift_mask is not None:
        n_win = shift_mask.shape[0]
        reps = logits.shape[0] // n_win
        allowed = np.tile(shift_mask, (reps, 1, 1))[:, None]
        logits = F.masked_fill(logits, allowed)
    probs = F.softmax(logits, axis=-1)
    out = F.matmul(probs, v)
    if return_details:
        return out, pre_bias, probs
    return out
