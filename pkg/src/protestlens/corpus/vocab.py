"""Word-level tokenizer and frequency-ranked vocabulary."""

from __future__ import annotations

import unicodedata
from collections import Counter
from pathlib import Path
from typing import Iterable

from ..errors import DecodeError, ParameterError

PAD_TOKEN, UNK_TOKEN, CLS_TOKEN = "[PAD]", "[UNK]", "[CLS]"
SPECIALS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN)
PAD_ID, UNK_ID, CLS_ID = 0, 1, 2


def _strip_punct(text: str) -> str:
    return "".join(" " if unicodedata.category(ch).startswith("P") else ch for ch in text)


def normalize_text(text: str) -> str:
    """NFKC, lowercase, punctuation to spaces, collapse whitespace."""
    text = unicodedata.normalize("NFKC", text).lower()
    return " ".join(_strip_punct(text).split())


def tokenize(text: str) -> list[str]:
    return normalize_text(text).split()


class Vocabulary:
    """Token <-> id map. Ids 0/1/2 are PAD/UNK/CLS."""

    def __init__(self, tokens: Iterable[str]):
        self.itos: list[str] = list(tokens)
        if tuple(self.itos[:3]) != SPECIALS:
            raise DecodeError(f"vocabulary must start with {SPECIALS}, got {self.itos[:3]}")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise DecodeError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, text: str) -> list[int]:
        return [self.id(t) for t in tokenize(text)]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.itos), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        try:
            lines = Path(path).read_text(encoding="utf-8").split("\n")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"{path}: vocabulary is not UTF-8 ({exc})") from None
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


def build_vocab(texts: Iterable[str], size: int = 30000) -> Vocabulary:
    """Top-``size`` tokens by frequency (ties lexicographic) after the specials.

    Pass only training-split texts; anything else maps to UNK at encode time.
    """
    if size < 10:
        raise ParameterError(f"vocabulary size must be >= 10, got {size}")
    counts: Counter[str] = Counter()
    n = 0
    for text in texts:
        counts.update(tokenize(text))
        n += 1
    if n == 0:
        raise ParameterError("cannot build a vocabulary from an empty training split")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
    return Vocabulary(list(SPECIALS) + [tok for tok, _ in ranked])
