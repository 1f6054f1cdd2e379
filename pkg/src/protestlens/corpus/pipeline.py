"""End-to-end corpus construction: match, filter, sample negatives, split, write."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

from .. import __version__
from .matching import DEFAULT_FUZZY_THRESHOLD, filter_multi_event, match_records
from .records import ArticleRecord, EventRecord, id_key, read_articles, read_events, write_jsonl
from .sampling import NEGATIVE_CATEGORIES, SPLITS, LabeledCorpus, sample_negatives, split_dataset

log = logging.getLogger(__name__)

# negatives per positive in the reference collection (27,000 / 11,902)
NEGATIVE_RATIO = 27000 / 11902


def assemble_corpus(events: Sequence[EventRecord], articles: Sequence[ArticleRecord],
                    n_negatives: int | None = None, seed: int = 0,
                    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
                    allowlist: Sequence[str] = NEGATIVE_CATEGORIES) -> LabeledCorpus:
    """Matched single-event positives plus sampled negatives, unsplit.

    The provenance manifest counts every stage and lists each drop with its reason.
    """
    notes: list = []
    drops: list = []
    matches = match_records(events, articles, fuzzy_threshold, log=notes)
    kept = filter_multi_event(matches, events, log=drops)
    by_id = {a.article_id: a for a in articles}
    positives = []
    for m in kept:
        art = by_id[m.article_id]
        if not art.text.strip():
            drops.append({"event_id": m.event_id, "article_id": m.article_id, "reason": "empty_text"})
            continue
        positives.append({"id": art.article_id, "text": art.text, "label": 1, "source": "matched-positive"})

    matched_articles = {m.article_id for m in matches}
    if n_negatives is None:
        n_negatives = max(1, round(len(positives) * NEGATIVE_RATIO))
    negatives = sample_negatives(articles, n_negatives, seed, exclude_ids=matched_articles,
                                 allowlist=allowlist, log=notes)
    examples = positives + [
        {"id": a.article_id, "text": a.text, "label": 0, "source": "sampled-negative"} for a in negatives
    ]
    examples.sort(key=lambda ex: id_key(ex["id"]))

    n_exact = sum(m.match_kind == "exact" for m in matches)
    matched_events = {m.event_id for m in matches}
    manifest = {
        "counts": {
            "events": len(events),
            "articles": len(articles),
            "matches_exact": n_exact,
            "matches_fuzzy": len(matches) - n_exact,
            "matches_total": len(matches),
            "unmatched_events": sum(e.event_id not in matched_events for e in events),
            "dropped": len(drops),
            "matches_after_filter": len(positives),
            "positives": len(positives),
            "negatives_requested": n_negatives,
            "negatives": len(negatives),
        },
        "drops": drops,
        "notes": notes,
        "negative_categories": sorted(allowlist),
        "fuzzy_threshold": fuzzy_threshold,
    }
    return LabeledCorpus(examples, {}, manifest)


def build_corpus(events_path: str | Path, articles_path: str | Path, out_dir: str | Path,
                 n_negatives: int | None = None, seed: int = 0,
                 ratios: Sequence[float] = (0.8, 0.1, 0.1),
                 fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD) -> dict:
    """Read inputs, assemble and split the corpus, write
    ``corpus.{train,val,test}.jsonl`` and ``manifest.json``; returns the manifest."""
    warnings: list = []
    events = read_events(events_path, warnings)
    articles = read_articles(articles_path)
    corpus = assemble_corpus(events, articles, n_negatives, seed, fuzzy_threshold)
    corpus = split_dataset(corpus, ratios, seed)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    split_counts = {}
    for name in SPLITS:
        rows = corpus.split(name)
        write_jsonl(out / f"corpus.{name}.jsonl", rows)
        split_counts[name] = {"n": len(rows), "positives": sum(r["label"] for r in rows)}
    manifest = {
        "tool": "protestlens",
        "version": __version__,
        "inputs": {"events": str(events_path), "articles": str(articles_path)},
        "seed": seed,
        "ratios": list(ratios),
        **corpus.manifest,
        "splits": split_counts,
        "warnings": warnings,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    c = manifest["counts"]
    log.info("corpus: %d matches -> %d positives, %d negatives", c["matches_total"], c["positives"], c["negatives"])
    return manifest
