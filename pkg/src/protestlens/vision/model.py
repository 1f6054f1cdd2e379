"""Hierarchical shifted-window image classifier with multi-label sigmoid heads."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DecodeError
from ..tensor import Tensor, functional as F, no_grad
from .attention import cosine_window_attention, log_cpb_bias
from .windows import cyclic_shift, patch_embed, patch_merge, shift_mask, window_partition, window_reverse

DEFAULT_ATTRIBUTES = ("protest", "violence", "sign", "police")


@dataclass
class VisionModelConfig:
    image_size: int = 64
    patch_size: int = 4
    window: int = 4
    embed_dim: int = 32
    depths: tuple[int, ...] = (2, 2)
    heads: tuple[int, ...] = (2, 4)
    attribute_heads: tuple[str, ...] = DEFAULT_ATTRIBUTES
    tau_min: float = 0.01
    cpb_hidden: int = 32
    mlp_ratio: int = 4
    in_chans: int = 3
    ln_eps: float = 1e-5
    pixel_mean: tuple[float, ...] = (0.485, 0.456, 0.406)
    pixel_std: tuple[float, ...] = (0.229, 0.224, 0.225)

    def __post_init__(self):
        self.pixel_mean = tuple(float(v) for v in self.pixel_mean)
        self.pixel_std = tuple(float(v) for v in self.pixel_std)
        self.depths = tuple(int(d) for d in self.depths)
        self.heads = tuple(int(h) for h in self.heads)
        self.attribute_heads = tuple(self.attribute_heads)
        self.validate()

    def stage_plan(self) -> list[dict]:
        """Per stage: grid side, channels, heads, effective window and shift."""
        plan = []
        grid = self.image_size // self.patch_size
        dim = self.embed_dim
        for s, (depth, heads) in enumerate(zip(self.depths, self.heads)):
            window = min(self.window, grid)
            shift = window // 2 if grid > window else 0
            plan.append({"grid": grid, "dim": dim, "heads": heads, "depth": depth,
                         "window": window, "shift": shift})
            if s < len(self.depths) - 1:
                grid //= 2
                dim *= 2
        return plan

    def validate(self) -> None:
        if self.image_size % self.patch_size:
            raise ConfigError(f"image_size {self.image_size} not divisible by patch_size {self.patch_size}")
        if len(self.depths) != len(self.heads) or not self.depths:
            raise ConfigError("depths and heads must be non-empty and of equal length")
        if "protest" not in self.attribute_heads or len(set(self.attribute_heads)) != len(self.attribute_heads):
            raise ConfigError(f"attribute_heads must be unique and include 'protest': {self.attribute_heads}")
        if self.tau_min <= 0:
            raise ConfigError("tau_min must be positive")
        if len(self.pixel_mean) != self.in_chans or len(self.pixel_std) != self.in_chans or min(self.pixel_std) <= 0:
            raise ConfigError("pixel_mean/pixel_std need one entry per channel, std > 0")
        for s, st in enumerate(self.stage_plan()):
            if st["grid"] < 1 or st["grid"] % st["window"]:
                raise ConfigError(f"stage {s}: grid {st['grid']} not divisible by window {st['window']}")
            if st["dim"] % st["heads"]:
                raise ConfigError(f"stage {s}: dim {st['dim']} not divisible by heads {st['heads']}")
            if s < len(self.depths) - 1 and st["grid"] % 2:
                raise ConfigError(f"stage {s}: odd grid {st['grid']} cannot be merged")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("depths", "heads", "attribute_heads", "pixel_mean", "pixel_std"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VisionModelConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown vision config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ImageExample:
    """Decoded pixels [H, W, 3] in [0, 1] plus per-attribute labels (None = absent)."""

    pixels: np.ndarray
    labels: dict

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[-1] != 3:
            raise DecodeError(f"expected H x W x 3 pixels, got {self.pixels.shape}")
        if self.labels.get("protest") is None:
            raise DecodeError("protest label is required")


@dataclass
class ImageBatch:
    pixels: np.ndarray
    targets: np.ndarray | None = None
    mask: np.ndarray | None = None

    def __len__(self) -> int:
        return self.pixels.shape[0]


def make_image_batch(examples: Sequence[ImageExample], heads: Sequence[str]) -> ImageBatch:
    pixels = np.stack([e.pixels for e in examples]).astype(np.float32)
    targets = np.zeros((len(examples), len(heads)), dtype=np.float32)
    mask = np.zeros_like(targets)
    for i, e in enumerate(examples):
        for j, name in enumerate(heads):
            val = e.labels.get(name)
            if val is not None:
                targets[i, j] = float(val)
                mask[i, j] = 1.0
    return ImageBatch(pixels, targets, mask)


def init_vision_params(config: VisionModelConfig, seed: int = 0, dtype=np.float32,
                   shapes_only: bool = False) -> dict:
    """Fresh parameters; with ``shapes_only`` returns name -> shape without allocating."""
    rng = np.random.default_rng(seed)

    def normal(*shape, std=0.02):
        if shapes_only:
            return shape
        return Tensor((rng.standard_normal(shape) * std).astype(dtype), requires_grad=True)

    def const(value, *shape):
        if shapes_only:
            return shape
        return Tensor(np.full(shape, value, dtype=dtype), requires_grad=True)

    p: dict[str, Tensor] = {}
    c = config.embed_dim
    patch_in = config.patch_size * config.patch_size * config.in_chans
    p["patch.w"] = normal(patch_in, c)
    p["patch.b"] = const(0.0, c)
    p["patch_norm.gamma"] = const(1.0, c)
    p["patch_norm.beta"] = const(0.0, c)
    plan = config.stage_plan()
    for s, st in enumerate(plan):
        dim, heads = st["dim"], st["heads"]
        hidden = config.mlp_ratio * dim
        for j in range(st["depth"]):
            pre = f"stages.{s}.blocks.{j}."
            p[pre + "attn.wqkv"] = normal(dim, 3 * dim)
            p[pre + "attn.bqkv"] = const(0.0, 3 * dim)
            p[pre + "attn.log_tau"] = const(np.log(0.1), heads)
            p[pre + "attn.wo"] = normal(dim, dim)
            p[pre + "attn.bo"] = const(0.0, dim)
            p[pre + "cpb.w1"] = normal(2, config.cpb_hidden, std=0.5)
            p[pre + "cpb.b1"] = const(0.0, config.cpb_hidden)
            p[pre + "cpb.w2"] = normal(config.cpb_hidden, heads)
            p[pre + "norm1.gamma"] = const(1.0, dim)
            p[pre + "norm1.beta"] = const(0.0, dim)
            p[pre + "mlp.w1"] = normal(dim, hidden)
            p[pre + "mlp.b1"] = const(0.0, hidden)
            p[pre + "mlp.w2"] = normal(hidden, dim)
            p[pre + "mlp.b2"] = const(0.0, dim)
            p[pre + "norm2.gamma"] = const(1.0, dim)
            p[pre + "norm2.beta"] = const(0.0, dim)
        if s < len(plan) - 1:
            p[f"stages.{s}.merge.w"] = normal(4 * dim, 2 * dim)
            p[f"stages.{s}.merge.norm.gamma"] = const(1.0, 2 * dim)
            p[f"stages.{s}.merge.norm.beta"] = const(0.0, 2 * dim)
    last = plan[-1]["dim"]
    p["norm_f.gamma"] = const(1.0, last)
    p["norm_f.beta"] = const(0.0, last)
    p["head.w"] = normal(last, len(config.attribute_heads))
    p["head.b"] = const(0.0, len(config.attribute_heads))
    return p


def vision_block_forward(x: Tensor, w: dict[str, Tensor], heads: int, window: int, shift: int,
                         tau_min: float = 0.01, ln_eps: float = 1e-5) -> Tensor:
    """Residual-post-norm block: x + LN(WindowAttn(x)), then x + LN(MLP(x)).

    ``x`` is [B, Hg, Wg, C]; odd blocks pass ``shift = window // 2``.
    """
    b, hg, wg, c = x.shape
    dh = c // heads
    n = window * window
    xs = cyclic_shift(x, shift) if shift else x
    wins = window_partition(xs, window)
    qkv = F.linear(wins, w["attn.wqkv"], w["attn.bqkv"])
    qkv = F.transpose(F.reshape(qkv, (wins.shape[0], n, 3, heads, dh)), (2, 0, 3, 1, 4))
    q, k, v = F.getitem(qkv, 0), F.getitem(qkv, 1), F.getitem(qkv, 2)
    bias = log_cpb_bias(window, w["cpb.w1"], w["cpb.b1"], w["cpb.w2"], heads)
    mask = shift_mask(hg, wg, window, shift) if shift else None
    att = cosine_window_attention(q, k, v, w["attn.log_tau"], bias, mask, tau_min)
    att = F.reshape(F.transpose(att, (0, 2, 1, 3)), (wins.shape[0], n, c))
    att = F.linear(att, w["attn.wo"], w["attn.bo"])
    att = window_reverse(att, hg, wg, batch=b)
    if shift:
        att = cyclic_shift(att, -shift)
    x = F.add(x, F.layer_norm(att, w["norm1.gamma"], w["norm1.beta"], ln_eps))
    y = F.linear(F.gelu(F.linear(x, w["mlp.w1"], w["mlp.b1"])), w["mlp.w2"], w["mlp.b2"])
    return F.add(x, F.layer_norm(y, w["norm2.gamma"], w["norm2.beta"], ln_eps))


class VisionClassifier:
    """Multi-label image classifier with one sigmoid head per configured attribute."""

    kind = "vision"

    def __init__(self, config: VisionModelConfig, seed: int = 0, dtype=np.float32,
                 params: dict[str, Tensor] | None = None):
        self.config = config
        self.params = params if params is not None else init_vision_params(config, seed, dtype)
        self.metrics: dict = {}
        self.best_step: int | None = None

    @property
    def head_names(self) -> tuple[str, ...]:
        return self.config.attribute_heads

    def _sub(self, prefix: str) -> dict[str, Tensor]:
        return {k[len(prefix):]: v for k, v in self.params.items() if k.startswith(prefix)}

    def features(self, pixels: np.ndarray, trace: list | None = None) -> Tensor:
        """Token grid after the last stage, [B, Hg, Wg, C]."""
        cfg, p = self.config, self.params
        pixels = np.asarray(pixels)
        if pixels.ndim == 3:
            pixels = pixels[None]
        if pixels.shape[1:] != (cfg.image_size, cfg.image_size, cfg.in_chans):
            raise DecodeError(f"expected images of {cfg.image_size}x{cfg.image_size}x{cfg.in_chans}, "
                              f"got {pixels.shape[1:]}")
        dtype = p["patch.w"].dtype
        pixels = (pixels.astype(dtype) - np.asarray(cfg.pixel_mean, dtype)) / np.asarray(cfg.pixel_std, dtype)
        x = patch_embed(pixels, p["patch.w"], p["patch.b"], cfg.patch_size)
        x = F.layer_norm(x, p["patch_norm.gamma"], p["patch_norm.beta"], cfg.ln_eps)
        plan = cfg.stage_plan()
        for s, st in enumerate(plan):
            for j in range(st["depth"]):
                shift = st["shift"] if j % 2 else 0
                x = vision_block_forward(x, self._sub(f"stages.{s}.blocks.{j}."), st["heads"],
                                         st["window"], shift, cfg.tau_min, cfg.ln_eps)
            if trace is not None:
                trace.append(x.shape)
            if s < len(plan) - 1:
                x = patch_merge(x, p[f"stages.{s}.merge.w"])
                x = F.layer_norm(x, p[f"stages.{s}.merge.norm.gamma"], p[f"stages.{s}.merge.norm.beta"], cfg.ln_eps)
        return x

    def logits(self, batch: ImageBatch, training: bool = False, rng=None) -> Tensor:
        p = self.params
        x = self.features(batch.pixels)
        x = F.layer_norm(x, p["norm_f.gamma"], p["norm_f.beta"], self.config.ln_eps)
        pooled = F.mean(x, axis=(1, 2))
        return F.linear(pooled, p["head.w"], p["head.b"])

    def loss(self, batch: ImageBatch, class_weights=None, training: bool = True, rng=None) -> Tensor:
        weights = batch.mask
        if class_weights is not None:
            w_neg, w_pos = class_weights
            weights = batch.mask * np.where(batch.targets >= 0.5, w_pos, w_neg).astype(batch.mask.dtype)
        return F.binary_cross_entropy_logits(self.logits(batch, training, rng), batch.targets, weights)

    def predict_proba(self, batch: ImageBatch) -> np.ndarray:
        """Sigmoid probabilities, [B, n_heads]."""
        with no_grad():
            z = self.logits(batch).data.astype(np.float64)
        return 1.0 / (1.0 + np.exp(-z))

    def astype(self, dtype) -> "VisionClassifier":
        params = {k: Tensor(v.data.astype(dtype), requires_grad=True) for k, v in self.params.items()}
        return VisionClassifier(self.config, params=params)


def classify_image(pixels, model: VisionClassifier) -> dict:
    """Returns ``{"protest": p, "attributes": {name: p, ...}}`` for one image."""
    pixels = np.asarray(getattr(pixels, "pixels", pixels), dtype=np.float32)
    probs = model.predict_proba(ImageBatch(pixels[None]))[0]
    attrs = {name: float(pr) for name, pr in zip(model.head_names, probs)}
    return {"protest": attrs["protest"], "attributes": attrs}
