"""Token-grid plumbing: patch embedding, window partition, cyclic shift,
shift masks and patch merging. Grids are channel-last: [batch?, H, W, C]."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..tensor import Tensor, functional as F
from ..tensor.core import as_tensor


def patchify(pixels: np.ndarray, patch: int) -> np.ndarray:
    """[B?, H, W, C] -> [B?, H/p, W/p, p*p*C], each patch flattened (row, col, channel)."""
    squeeze = pixels.ndim == 3
    x = pixels[None] if squeeze else pixels
    b, h, w, c = x.shape
    if h % patch or w % patch:
        raise DimensionError(f"image {h}x{w} not divisible by patch size {patch}")
    x = x.reshape(b, h // patch, patch, w // patch, patch, c).transpose(0, 1, 3, 2, 4, 5)
    x = x.reshape(b, h // patch, w // patch, patch * patch * c)
    return x[0] if squeeze else x


def patch_embed(pixels, weight: Tensor, bias: Tensor | None, patch: int) -> Tensor:
    """Linear projection of non-overlapping patches to ``weight.shape[1]`` channels."""
    data = np.asarray(getattr(pixels, "data", pixels))
    patches = patchify(data.astype(weight.dtype, copy=False), patch)
    return F.linear(as_tensor(patches), weight, bias)


def window_partition(x, window: int) -> Tensor:
    """[B?, Hg, Wg, C] -> [B * nWin, window**2, C], windows and tokens row-major."""
    x = as_tensor(x)
    squeeze = x.ndim == 3
    if squeeze:
        x = F.reshape(x, (1,) + x.shape)
    b, hg, wg, c = x.shape
    if hg % window or wg % window:
        raise DimensionError(f"grid {hg}x{wg} not divisible by window {window}")
    x = F.reshape(x, (b, hg // window, window, wg // window, window, c))
    x = F.transpose(x, (0, 1, 3, 2, 4, 5))
    return F.reshape(x, (b * (hg // window) * (wg // window), window * window, c))


def window_reverse(wins, hg: int, wg: int, batch: int | None = None) -> Tensor:
    """Inverse of :func:`window_partition`.

    Returns [Hg, Wg, C] when the windows cover exactly one grid and ``batch``
    is not given, else [B, Hg, Wg, C].
    """
    wins = as_tensor(wins)
    n, area, c = wins.shape
    window = int(round(area**0.5))
    if window * window != area or hg % window or wg % window:
        raise DimensionError(f"cannot tile {hg}x{wg} grid with windows of {area} tokens")
    per_grid = (hg // window) * (wg // window)
    if n % per_grid:
        raise DimensionError(f"{n} windows of {area} tokens do not cover {hg}x{wg} grids")
    b = n // per_grid
    if batch is not None and batch != b:
        raise DimensionError(f"{n} windows imply batch {b}, expected {batch}")
    x = F.reshape(wins, (b, hg // window, wg // window, window, window, c))
    x = F.transpose(x, (0, 1, 3, 2, 4, 5))
    x = F.reshape(x, (b, hg, wg, c))
    if batch is None and b == 1:
        x = F.reshape(x, (hg, wg, c))
    return x


def cyclic_shift(x, displacement: int) -> Tensor:
    """Torus roll of the grid axes by (-d, -d); d < 0 undoes a shift."""
    x = as_tensor(x)
    if displacement == 0:
        return x
    return F.roll(x, (-displacement, -displacement), axis=(x.ndim - 3, x.ndim - 2))


def region_labels(hg: int, wg: int, window: int, shift: int) -> np.ndarray:
    """Region id per grid cell of the shifted grid; cells that were contiguous
    in the unshifted image share an id."""
    labels = np.zeros((hg, wg), dtype=np.int64)
    spans = lambda n: (slice(0, n - window), slice(n - window, n - shift), slice(n - shift, n))  # noqa: E731
    rid = 0
    for hs in spans(hg):
        for ws in spans(wg):
            labels[hs, ws] = rid
            rid += 1
    return labels


def shift_mask(hg: int, wg: int, window: int, shift: int) -> np.ndarray:
    """Boolean [nWin, N, N]: True where attention is allowed after the shift."""
    n = window * window
    if shift == 0:
        return np.ones(((hg // window) * (wg // window), n, n), dtype=bool)
    labels = region_labels(hg, wg, window, shift)
    lw = window_partition(labels[..., None].astype(np.float64), window).data[..., 0]
    return lw[:, :, None] == lw[:, None, :]


def patch_merge(x, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Concatenate each 2x2 neighbourhood (order: (0,0), (1,0), (0,1), (1,1))
    and project 4C -> weight.shape[1]."""
    x = as_tensor(x)
    hg, wg = x.shape[-3], x.shape[-2]
    if hg % 2 or wg % 2:
        raise DimensionError(f"patch_merge needs even grid dims, got {hg}x{wg}")
    lead = (slice(None),) * (x.ndim - 3)
    parts = [
        F.getitem(x, lead + (slice(r, None, 2), slice(c, None, 2)))
        for r, c in ((0, 0), (1, 0), (0, 1), (1, 1))
    ]
    return F.linear(F.concat(parts, axis=-1), weight, bias)
