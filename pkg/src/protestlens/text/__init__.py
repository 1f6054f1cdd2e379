from .attention import GLOBAL, LOCAL, PAD, attention_mask, dense_masked_attention, sliding_window_attention
from .model import (
    LABELS,
    TextClassifier,
    TextModelConfig,
    TokenBatch,
    classify_text,
    collate,
    embed_sequence,
    encode_text,
    make_flags,
    text_layer_forward,
)

__all__ = [
    "PAD", "LOCAL", "GLOBAL", "attention_mask", "dense_masked_attention", "sliding_window_attention",
    "LABELS", "TextClassifier", "TextModelConfig", "TokenBatch", "classify_text", "collate",
    "embed_sequence", "encode_text", "make_flags", "text_layer_forward",
]
