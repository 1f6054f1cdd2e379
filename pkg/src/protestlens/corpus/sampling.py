"""Category-restricted negative sampling and stratified splitting."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import ParameterError, StratificationError
from .records import ArticleRecord, id_key

NEGATIVE_CATEGORIES = (
    "entertainment",
    "book reviews",
    "business",
    "classified",
    "finance",
    "sports",
    "real estate",
    "leisure",
    "obituary",
)
SPLITS = ("train", "val", "test")


def normalize_category(category: str) -> str:
    return " ".join(category.lower().replace("_", " ").replace("-", " ").split())


def largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    """Integer apportionment of ``total`` proportional to ``weights``; ties in
    the fractional part go to the earlier entry."""
    wsum = float(sum(weights))
    exact = [total * w / wsum for w in weights]
    counts = [math.floor(x) for x in exact]
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def sample_negatives(archive: Iterable[ArticleRecord], n: int, seed: int,
                     exclude_ids: Iterable[str] = (), allowlist: Sequence[str] = NEGATIVE_CATEGORIES,
                     log: list | None = None) -> list[ArticleRecord]:
    """Draw ``min(n, available)`` articles from allowlisted categories,
    apportioned across categories by availability. Output is sorted by id."""
    if n <= 0:
        raise ParameterError(f"number of negatives must be positive, got {n}")
    allowed = {normalize_category(c) for c in allowlist}
    excluded = set(exclude_ids)
    pools: dict[str, list[ArticleRecord]] = defaultdict(list)
    for a in sorted(archive, key=lambda a: id_key(a.article_id)):
        cat = normalize_category(a.category)
        if cat in allowed and a.article_id not in excluded and a.text.strip():
            pools[cat].append(a)
    cats = sorted(pools)
    available = sum(len(pools[c]) for c in cats)
    if available == 0:
        if log is not None:
            log.append({"kind": "empty_negative_pool", "allowlist": sorted(allowed)})
        return []
    k = min(n, available)
    quotas = largest_remainder(k, [len(pools[c]) for c in cats])
    rng = np.random.default_rng(seed)
    picked: list[ArticleRecord] = []
    for cat, q in zip(cats, quotas):
        pool = pools[cat]
        idx = rng.choice(len(pool), size=q, replace=False)
        picked.extend(pool[i] for i in sorted(idx))
    if log is not None and k < n:
        log.append({"kind": "negative_shortfall", "requested": n, "available": available})
    return sorted(picked, key=lambda a: id_key(a.article_id))


@dataclass
class LabeledCorpus:
    """Labeled examples ({id, text, label, source}) plus id -> split assignment."""

    examples: list[dict]
    splits: dict[str, str] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def split(self, name: str) -> list[dict]:
        return [ex for ex in self.examples if self.splits.get(ex["id"]) == name]


def split_dataset(corpus: LabeledCorpus, ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0) -> LabeledCorpus:
    """Stratified, seeded train/val/test assignment."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ParameterError(f"split ratios must be three positive numbers summing to 1, got {ratios}")
    ids_by_label: dict[int, list[str]] = defaultdict(list)
    seen: set[str] = set()
    for ex in corpus.examples:
        if ex["id"] in seen:
            raise ParameterError(f"duplicate example id {ex['id']!r}")
        seen.add(ex["id"])
        ids_by_label[int(ex["label"])].append(ex["id"])
    rng = np.random.default_rng(seed)
    splits: dict[str, str] = {}
    for label in sorted(ids_by_label):
        ids = sorted(ids_by_label[label], key=id_key)
        order = rng.permutation(len(ids))
        counts = largest_remainder(len(ids), ratios)
        if any(c == 0 for c in counts):
            raise StratificationError(
                f"label {label}: {len(ids)} examples cannot fill every split with ratios {ratios} (got {counts})")
        start = 0
        for name, c in zip(SPLITS, counts):
            for i in order[start:start + c]:
                splits[ids[i]] = name
            start += c
    return LabeledCorpus(corpus.examples, splits, dict(corpus.manifest))
