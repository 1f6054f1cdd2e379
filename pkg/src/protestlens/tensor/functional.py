"""Differentiable operations.

Each op computes its forward value with numpy and registers a closure that maps
the output gradient to one gradient per parent.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import erf

from ..errors import DimensionError, ParameterError, TargetIndexError
from .core import Tensor, as_tensor, make_node

MASK_VALUE = -1e9
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = as_tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = as_tensor(np.asarray(a, dtype=b.dtype))
    return as_tensor(a), as_tensor(b)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (the inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return make_node(a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return make_node(a.data - b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "mul")
    ad, bd = a.data, b.data

    def bw(g):
        return unbroadcast(g * bd, ad.shape), unbroadcast(g * ad, bd.shape)

    return make_node(ad * bd, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def bw(g):
        return unbroadcast(g / bd, ad.shape), unbroadcast(-g * out / bd, bd.shape)

    return make_node(out, (a, b), bw, "div")


def neg(a: Tensor) -> Tensor:
    return make_node(-a.data, (a,), lambda g: (-g,), "neg")


def power(a: Tensor, exponent: float) -> Tensor:
    ad = a.data
    out = ad**exponent
    return make_node(out, (a,), lambda g: (g * exponent * ad ** (exponent - 1),), "pow")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    ad = a.data
    return make_node(np.log(ad), (a,), lambda g: (g / ad,), "log")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return make_node(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def relu(a: Tensor) -> Tensor:
    ad = a.data
    return make_node(np.maximum(ad, 0), (a,), lambda g: (g * (ad > 0),), "relu")


def gelu(a: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    ad = a.data
    cdf = 0.5 * (1.0 + erf(ad * _INV_SQRT2))

    def bw(g):
        pdf = np.exp(-0.5 * ad * ad) * _INV_SQRT2PI
        return (g * (cdf + ad * pdf),)

    return make_node((ad * cdf).astype(ad.dtype, copy=False), (a,), bw, "gelu")


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return make_node(out, (a,), lambda g: (g * out * (1 - out),), "sigmoid")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1 / (1 + e), e / (1 + e)).astype(x.dtype, copy=False)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_node(out, (a,), lambda g: (g * (1 - out * out),), "tanh")


def clamp_min(a: Tensor, lo: float) -> Tensor:
    ad = a.data
    keep = ad >= lo
    return make_node(np.maximum(ad, lo).astype(ad.dtype), (a,), lambda g: (g * keep,), "clamp_min")


def where(cond: np.ndarray, a, b) -> Tensor:
    """Select ``a`` where ``cond`` else ``b``; ``cond`` is a constant mask."""
    a, b = _pair(a, b)
    cond = np.asarray(cond, dtype=bool)
    sa, sb = a.shape, b.shape

    def bw(g):
        zero = np.zeros((), g.dtype)
        return unbroadcast(np.where(cond, g, zero), sa), unbroadcast(np.where(cond, zero, g), sb)

    return make_node(np.where(cond, a.data, b.data), (a, b), bw, "where")


def masked_fill(a: Tensor, allowed: np.ndarray, value: float = MASK_VALUE) -> Tensor:
    """Replace entries where ``allowed`` is False by a constant (no gradient there)."""
    allowed = np.asarray(allowed, dtype=bool)
    out = np.where(allowed, a.data, np.asarray(value, a.dtype))
    sa = a.shape
    return make_node(out, (a,), lambda g: (unbroadcast(np.where(allowed, g, 0).astype(g.dtype), sa),), "masked_fill")


# ---------------------------------------------------------------------------
# reductions and shape ops


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape).copy(),)

    return make_node(np.asarray(out, dtype=a.dtype), (a,), bw, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, a.ndim)
    n = 1
    for ax in axes:
        n *= a.shape[ax]
    return mul(sum(a, axis=axes, keepdims=keepdims), 1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {src} into {tuple(shape)}") from None
    return make_node(out, (a,), lambda g: (g.reshape(src),), "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return make_node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),), "transpose")


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    return make_node(np.swapaxes(a.data, ax1, ax2), (a,), lambda g: (np.swapaxes(g, ax1, ax2),), "swapaxes")


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(a: Tensor, index) -> Tensor:
    shape, dtype = a.shape, a.dtype
    basic = _is_basic_index(index)

    def bw(g):
        full = np.zeros(shape, dtype)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return make_node(a.data[index], (a,), bw, "getitem")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    axis = axis % tensors[0].ndim
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    return make_node(out, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


def pad(a: Tensor, axis: int, before: int, after: int) -> Tensor:
    axis = axis % a.ndim
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    n = a.shape[axis]

    def bw(g):
        sl = [slice(None)] * a.ndim
        sl[axis] = slice(before, before + n)
        return (g[tuple(sl)],)

    return make_node(np.pad(a.data, widths), (a,), bw, "pad")


def roll(a: Tensor, shift, axis) -> Tensor:
    neg_shift = tuple(-s for s in shift) if isinstance(shift, tuple) else -shift
    return make_node(np.roll(a.data, shift, axis=axis), (a,), lambda g: (np.roll(g, neg_shift, axis=axis),), "roll")


def sliding_windows(a: Tensor, width: int, axis: int = -2) -> Tensor:
    """Overlapping windows of ``width`` along ``axis``; the window index lands
    right after ``axis``: ``[..., n, d] -> [..., n - width + 1, width, d]``."""
    axis = axis % a.ndim
    n = a.shape[axis]
    count = n - width + 1
    if count < 1:
        raise DimensionError(f"window width {width} exceeds axis length {n}")
    win = np.lib.stride_tricks.sliding_window_view(a.data, width, axis=axis)
    # sliding_window_view appends the window axis last; move it next to `axis`.
    out = np.ascontiguousarray(np.moveaxis(win, -1, axis + 1))

    def bw(g):
        full = np.zeros(a.shape, a.dtype)
        src = [slice(None)] * g.ndim
        dst = [slice(None)] * a.ndim
        for o in range(width):
            src[axis + 1] = o
            dst[axis] = slice(o, o + count)
            full[tuple(dst)] += g[tuple(src)]
        return (full,)

    return make_node(out, (a,), bw, "sliding_windows")


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """Gather along ``axis`` with an integer index array of any shape."""
    axis = axis % a.ndim
    idx = np.asarray(indices, dtype=np.intp)
    shape = a.shape

    def bw(g):
        full = np.zeros(shape, g.dtype)
        moved = np.moveaxis(full, axis, 0)
        gm = g.reshape(shape[:axis] + (idx.size,) + shape[axis + 1 :])
        gm = np.moveaxis(gm, axis, 0)
        np.add.at(moved, idx.reshape(-1), gm)
        return (full,)

    return make_node(np.take(a.data, idx, axis=axis), (a,), bw, "take")


def embedding(weight: Tensor, ids) -> Tensor:
    """Row lookup ``weight[ids]``; output shape ``ids.shape + (dim,)``."""
    idx = np.asarray(ids, dtype=np.intp)
    n, d = weight.shape

    def bw(g):
        flat = g.reshape(-1, d)
        full = np.zeros((n, d), g.dtype)
        # bincount per column beats add.at for many rows
        order = idx.reshape(-1)
        for j in range(d):
            full[:, j] = np.bincount(order, weights=flat[:, j], minlength=n)
        return (full,)

    return make_node(weight.data[idx], (weight,), bw, "embedding")


def scatter_rows(values: Tensor, indices, length: int, axis: int = -2) -> Tensor:
    """Zeros of size ``length`` along ``axis`` with ``values`` placed at ``indices``."""
    axis = axis % values.ndim
    idx = np.asarray(indices, dtype=np.intp)
    shape = list(values.shape)
    shape[axis] = length
    out = np.zeros(shape, values.dtype)
    sl = [slice(None)] * values.ndim
    sl[axis] = idx
    out[tuple(sl)] = values.data
    return make_node(out, (values,), lambda g: (g[tuple(sl)],), "scatter_rows")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch broadcasting over leading dims."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: batch dims of {a.shape} and {b.shape} do not broadcast") from None
    ad, bd = a.data, b.data

    def bw(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return unbroadcast(ga, ad.shape), unbroadcast(gb, bd.shape)

    return make_node(ad @ bd, (a, b), bw, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` shaped [in, out]; folds leading dims."""
    lead = x.shape[:-1]
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {weight.shape}")
    x2 = reshape(x, (-1, x.shape[-1]))
    y = matmul(x2, weight)
    if bias is not None:
        y = add(y, bias)
    return reshape(y, lead + (weight.shape[1],))


def einsum(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum; every input index must appear in the output or the
    other operand (no private reductions)."""
    a, b = _pair(a, b)
    ins, out = subscripts.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    letters = lambda s: set(s.replace("...", ""))  # noqa: E731
    for mine, other in ((sa, sb), (sb, sa)):
        if not letters(mine) <= letters(other) | letters(out):
            raise DimensionError(f"einsum: unsupported private reduction in {subscripts!r}")
    ad, bd = a.data, b.data
    try:
        res = np.einsum(subscripts, ad, bd)
    except ValueError as exc:
        raise DimensionError(f"einsum {subscripts!r}: shapes {a.shape}, {b.shape}: {exc}") from None

    def bw(g):
        ga = np.einsum(f"{out},{sb}->{sa}", g, bd)
        gb = np.einsum(f"{out},{sa}->{sb}", g, ad)
        return ga, gb

    return make_node(res, (a, b), bw, "einsum")


# ---------------------------------------------------------------------------
# normalisation and nonlinear blocks


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if x.ndim == 0 or x.shape[axis] == 0:
        raise DimensionError(f"softmax over empty axis {axis} of shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return make_node(s, (x,), bw, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    if x.ndim == 0 or x.shape[axis] == 0:
        raise DimensionError(f"log_softmax over empty axis {axis} of shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    ls = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def bw(g):
        return (g - np.exp(ls) * g.sum(axis=axis, keepdims=True),)

    return make_node(ls, (x,), bw, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """LayerNorm over the last axis with population variance."""
    if eps <= 0:
        raise ParameterError(f"layer_norm eps must be > 0, got {eps}")
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm: gamma {gamma.shape} / beta {beta.shape} must be ({d},)")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    gd = gamma.data
    out = xhat * gd + beta.data
    lead = tuple(range(xd.ndim - 1))

    def bw(g):
        dxhat = g * gd
        dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return make_node(out.astype(xd.dtype, copy=False), (x, gamma, beta), bw, "layer_norm")


def l2_normalize(x: Tensor, axis: int = -1, floor: float = 1e-12) -> Tensor:
    """``x / max(||x||, floor)`` along ``axis``; zero rows stay zero."""
    xd = x.data
    norm = np.sqrt((xd * xd).sum(axis=axis, keepdims=True))
    denom = np.maximum(norm, floor)
    y = xd / denom
    active = norm > floor

    def bw(g):
        proj = (g * y).sum(axis=axis, keepdims=True)
        return (np.where(active, (g - y * proj) / denom, g / denom),)

    return make_node(y, (x,), bw, "l2_normalize")


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    if not training or p <= 0.0:
        return x
    if p >= 1.0:
        raise ParameterError(f"dropout probability must be < 1, got {p}")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return make_node(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


# ---------------------------------------------------------------------------
# losses


def cross_entropy_logits(logits: Tensor, targets, class_weights=None) -> Tensor:
    """Weighted mean of -log softmax(logits)[target] over the batch.

    With ``class_weights`` the mean is normalised by the summed example weights;
    unit weights reproduce the plain mean exactly.
    """
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy_logits expects [batch, classes], got {logits.shape}")
    b, c = logits.shape
    t = np.asarray(targets, dtype=np.intp).reshape(-1)
    if t.shape[0] != b:
        raise DimensionError(f"{t.shape[0]} targets for batch of {b}")
    if np.any(t < 0) or np.any(t >= c):
        bad = t[(t < 0) | (t >= c)][0]
        raise TargetIndexError(f"target {bad} outside [0, {c})")
    w = np.ones(c, dtype=logits.dtype) if class_weights is None else np.asarray(class_weights, dtype=logits.dtype)
    wt = w[t]
    wsum = wt.sum()
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    nll = -(z[np.arange(b), t] - lse[:, 0])
    loss = np.asarray((wt * nll).sum() / wsum, dtype=logits.dtype)

    def bw(g):
        p = np.exp(z - lse)
        p[np.arange(b), t] -= 1.0
        return (p * (wt / wsum)[:, None] * g,)

    return make_node(loss, (logits,), bw, "cross_entropy")


def binary_cross_entropy_logits(logits: Tensor, targets, mask=None) -> Tensor:
    """Masked mean of sigmoid binary cross-entropy; targets may be soft in [0, 1]."""
    x = logits.data
    t = np.asarray(targets, dtype=x.dtype)
    if t.shape != x.shape:
        raise DimensionError(f"targets {t.shape} do not match logits {x.shape}")
    m = np.ones_like(x) if mask is None else np.asarray(mask, dtype=x.dtype)
    denom = max(float(m.sum()), 1.0)
    softplus = np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))
    loss = np.asarray((m * (softplus - t * x)).sum() / denom, dtype=x.dtype)

    def bw(g):
        return ((_sigmoid(x) - t) * m / denom * g,)

    return make_node(loss, (logits,), bw, "bce")
