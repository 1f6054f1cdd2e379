"""Long-document protest classifier: token + position embeddings, pre-LN
sliding-window attention blocks with a global CLS token, and a 2-way head."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..corpus.vocab import CLS_ID, PAD_ID, Vocabulary
from ..errors import ConfigError, LengthError, VocabularyError
from ..tensor import Tensor, functional as F, no_grad
from .attention import GLOBAL, LOCAL, PAD, sliding_window_attention

LABELS = ("non-protest", "protest")


@dataclass
class TextModelConfig:
    vocab_size: int = 30003
    max_len: int = 512
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    window: int = 64
    global_positions: tuple[int, ...] = (0,)
    dropout: float = 0.1
    ln_eps: float = 1e-5

    def __post_init__(self):
        self.global_positions = tuple(int(p) for p in self.global_positions)
        self.validate()

    def validate(self) -> None:
        if self.window % 2 or not 2 <= self.window < self.max_len:
            raise ConfigError(f"window must be even with 2 <= window < max_len ({self.max_len}), got {self.window}")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if any(not 0 <= p < self.max_len for p in self.global_positions):
            raise ConfigError(f"global_positions {self.global_positions} outside [0, {self.max_len})")
        if 0 not in self.global_positions:
            raise ConfigError("position 0 (CLS) must have global attention")
        if self.vocab_size < 4 or self.n_layers < 1:
            raise ConfigError("vocab_size must be >= 4 and n_layers >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["global_positions"] = list(self.global_positions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TextModelConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown text config keys: {sorted(unknown)}")
        return cls(**known)


@dataclass
class TokenBatch:
    """Padded id matrix plus per-token attention flags (PAD / LOCAL / GLOBAL)."""

    ids: np.ndarray
    flags: np.ndarray
    labels: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.ids.shape[0]


def encode_text(text: str, vocab: Vocabulary, max_len: int) -> list[int]:
    """CLS followed by the first ``max_len - 1`` token ids."""
    return [CLS_ID] + vocab.encode(text)[: max_len - 1]


def make_flags(length: int, padded_len: int, global_positions: Sequence[int]) -> np.ndarray:
    flags = np.full(padded_len, PAD, dtype=np.int8)
    flags[:length] = LOCAL
    for p in global_positions:
        if p < length:
            flags[p] = GLOBAL
    return flags


def collate(sequences: Sequence[Sequence[int]], config: TextModelConfig, labels=None) -> TokenBatch:
    width = max(len(s) for s in sequences)
    ids = np.full((len(sequences), width), PAD_ID, dtype=np.int64)
    flags = np.zeros((len(sequences), width), dtype=np.int8)
    for i, seq in enumerate(sequences):
        ids[i, : len(seq)] = seq
        flags[i] = make_flags(len(seq), width, config.global_positions)
    lab = None if labels is None else np.asarray(labels, dtype=np.int64)
    return TokenBatch(ids, flags, lab)


def embed_sequence(ids, tok_emb: Tensor, pos_emb: Tensor, config: TextModelConfig,
                   training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """``tok_emb[ids[i]] + pos_emb[i]`` for ids shaped [len] or [batch, len]."""
    ids = np.asarray(ids, dtype=np.int64)
    length = ids.shape[-1]
    if length > config.max_len:
        raise LengthError(f"sequence of {length} tokens exceeds max_len {config.max_len}; truncate first")
    if ids.size and (ids.max() >= config.vocab_size or ids.min() < 0):
        bad = ids[(ids >= config.vocab_size) | (ids < 0)][0]
        raise VocabularyError(f"token id {bad} outside vocabulary of size {config.vocab_size}")
    x = F.add(F.embedding(tok_emb, ids), F.getitem(pos_emb, slice(0, length)))
    return F.dropout(x, config.dropout, rng, training)


def text_layer_forward(x: Tensor, w: dict[str, Tensor], config: TextModelConfig, flags,
                       training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Pre-LN block: x + Attn(LN(x)), then x + FFN(LN(x)) with a 4x GELU FFN.

    ``x`` is [len, d] or [batch, len, d]; ``w`` holds this layer's weights.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = F.reshape(x, (1,) + x.shape)
        flags = np.asarray(flags)[None, :]
    b, length, d = x.shape
    h = config.n_heads
    dh = d // h

    y = F.layer_norm(x, w["ln1.gamma"], w["ln1.beta"], config.ln_eps)
    qkv = F.linear(y, w["attn.wqkv"], w["attn.bqkv"])
    qkv = F.transpose(F.reshape(qkv, (b, length, 3, h, dh)), (2, 0, 3, 1, 4))
    q, k, v = F.getitem(qkv, 0), F.getitem(qkv, 1), F.getitem(qkv, 2)
    att = sliding_window_attention(q, k, v, config.window, flags)
    att = F.reshape(F.transpose(att, (0, 2, 1, 3)), (b, length, d))
    att = F.linear(att, w["attn.wo"], w["attn.bo"])
    x = F.add(x, F.dropout(att, config.dropout, rng, training))

    y = F.layer_norm(x, w["ln2.gamma"], w["ln2.beta"], config.ln_eps)
    y = F.gelu(F.linear(y, w["ffn.w1"], w["ffn.b1"]))
    y = F.linear(y, w["ffn.w2"], w["ffn.b2"])
    x = F.add(x, F.dropout(y, config.dropout, rng, training))
    return F.reshape(x, (length, d)) if squeeze else x


def init_text_params(config: TextModelConfig, seed: int = 0, dtype=np.float32,
                shapes_only: bool = False) -> dict:
    """Fresh parameters; with ``shapes_only`` returns name -> shape without allocating."""
    rng = np.random.default_rng(seed)
    d = config.d_model

    def normal(*shape):
        if shapes_only:
            return shape
        return Tensor((rng.standard_normal(shape) * 0.02).astype(dtype), requires_grad=True)

    def const(value, *shape):
        if shapes_only:
            return shape
        return Tensor(np.full(shape, value, dtype=dtype), requires_grad=True)

    p = {"tok_emb": normal(config.vocab_size, d), "pos_emb": normal(config.max_len, d)}
    for i in range(config.n_layers):
        pre = f"layers.{i}."
        p[pre + "ln1.gamma"] = const(1.0, d)
        p[pre + "ln1.beta"] = const(0.0, d)
        p[pre + "attn.wqkv"] = normal(d, 3 * d)
        p[pre + "attn.bqkv"] = const(0.0, 3 * d)
        p[pre + "attn.wo"] = normal(d, d)
        p[pre + "attn.bo"] = const(0.0, d)
        p[pre + "ln2.gamma"] = const(1.0, d)
        p[pre + "ln2.beta"] = const(0.0, d)
        p[pre + "ffn.w1"] = normal(d, 4 * d)
        p[pre + "ffn.b1"] = const(0.0, 4 * d)
        p[pre + "ffn.w2"] = normal(4 * d, d)
        p[pre + "ffn.b2"] = const(0.0, d)
    p["ln_f.gamma"] = const(1.0, d)
    p["ln_f.beta"] = const(0.0, d)
    p["head.w"] = normal(d, 2)
    p["head.b"] = const(0.0, 2)
    return p


class TextClassifier:
    """Binary protest / non-protest classifier over token sequences."""

    kind = "text"
    head_names = ("protest",)

    def __init__(self, config: TextModelConfig, seed: int = 0, dtype=np.float32,
                 params: dict[str, Tensor] | None = None):
        self.config = config
        self.params = params if params is not None else init_text_params(config, seed, dtype)
        self.metrics: dict = {}
        self.best_step: int | None = None

    def layer_weights(self, i: int) -> dict[str, Tensor]:
        pre = f"layers.{i}."
        return {k[len(pre):]: v for k, v in self.params.items() if k.startswith(pre)}

    def hidden(self, ids, flags, training: bool = False, rng=None) -> Tensor:
        p = self.params
        x = embed_sequence(ids, p["tok_emb"], p["pos_emb"], self.config, training, rng)
        for i in range(self.config.n_layers):
            x = text_layer_forward(x, self.layer_weights(i), self.config, flags, training, rng)
        return F.layer_norm(x, p["ln_f.gamma"], p["ln_f.beta"], self.config.ln_eps)

    def logits(self, batch: TokenBatch, training: bool = False, rng=None) -> Tensor:
        x = self.hidden(batch.ids, batch.flags, training, rng)
        cls = F.getitem(x, (slice(None), 0))
        return F.linear(cls, self.params["head.w"], self.params["head.b"])

    def loss(self, batch: TokenBatch, class_weights=None, training: bool = True, rng=None) -> Tensor:
        return F.cross_entropy_logits(self.logits(batch, training, rng), batch.labels, class_weights)

    def predict_proba(self, batch: TokenBatch) -> np.ndarray:
        """P(protest) per example."""
        with no_grad():
            z = self.logits(batch).data.astype(np.float64)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e[:, 1] / e.sum(axis=1)

    def predict_texts(self, texts: Sequence[str], vocab: Vocabulary, batch_size: int = 32) -> np.ndarray:
        seqs = [encode_text(t, vocab, self.config.max_len) for t in texts]
        out = [self.predict_proba(collate(seqs[i:i + batch_size], self.config))
               for i in range(0, len(seqs), batch_size)]
        return np.concatenate(out) if out else np.zeros(0)

    def astype(self, dtype) -> "TextClassifier":
        params = {k: Tensor(v.data.astype(dtype), requires_grad=True) for k, v in self.params.items()}
        return TextClassifier(self.config, params=params)


def classify_text(text: str, vocab: Vocabulary, model: TextClassifier) -> dict:
    """Label a raw article. ``probability`` is P(protest); ties go to non-protest."""
    prob = float(model.predict_texts([text], vocab)[0])
    label = LABELS[1] if prob > 0.5 else LABELS[0]
    return {"label": label, "probability": prob}
