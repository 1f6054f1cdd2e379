"""Index-addressable datasets that turn example lists into model batches."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..corpus.vocab import Vocabulary
from ..text.model import TextModelConfig, collate, encode_text
from ..vision.model import ImageBatch, ImageExample, make_image_batch


class TextDataset:
    """Pre-tokenized articles. ``examples`` are dicts with ``text`` and ``label``."""

    def __init__(self, examples: Sequence[dict], vocab: Vocabulary, config: TextModelConfig):
        self.config = config
        self.vocab = vocab
        self.ids = [str(ex.get("id", i)) for i, ex in enumerate(examples)]
        self.sequences = [encode_text(ex["text"], vocab, config.max_len) for ex in examples]
        self.labels = np.array([int(ex.get("label", 0)) for ex in examples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.sequences)

    def batch(self, indices):
        indices = np.asarray(indices)
        return collate([self.sequences[i] for i in indices], self.config, self.labels[indices])


class ImageDataset:
    def __init__(self, examples: Sequence[ImageExample], heads: Sequence[str], ids: Sequence[str] | None = None):
        self.heads = tuple(heads)
        full = make_image_batch(examples, self.heads)
        self.pixels, self.targets, self.mask = full.pixels, full.targets, full.mask
        self.ids = list(ids) if ids is not None else [str(i) for i in range(len(examples))]
        self.labels = self.targets[:, self.heads.index("protest")]

    @classmethod
    def from_arrays(cls, pixels: np.ndarray, labels: Sequence[dict], heads: Sequence[str]) -> "ImageDataset":
        return cls([ImageExample(p, lab) for p, lab in zip(pixels, labels)], heads)

    def __len__(self) -> int:
        return self.pixels.shape[0]

    def batch(self, indices):
        indices = np.asarray(indices)
        return ImageBatch(self.pixels[indices], self.targets[indices], self.mask[indices])
