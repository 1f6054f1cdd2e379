"""Title-based record linkage between event rows and archive articles."""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import NamedTuple, Sequence

from .records import ArticleRecord, EventRecord, id_key
from .vocab import normalize_text

DEFAULT_FUZZY_THRESHOLD = 0.90


def normalize_title(title: str) -> str:
    """NFKC, lowercase, punctuation to spaces, collapsed and trimmed whitespace."""
    return normalize_text(title)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """1 - edit distance / longer length; two empty strings are identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


class Match(NamedTuple):
    event_id: str
    article_id: str
    match_kind: str  # "exact" | "fuzzy"


def match_records(events: Sequence[EventRecord], articles: Sequence[ArticleRecord],
                  threshold: float = DEFAULT_FUZZY_THRESHOLD, log: list | None = None) -> list[Match]:
    """Link events to articles on (normalized title, year).

    Pass 1 takes exact key matches; several events may share one article, which
    is how multi-event articles surface. Pass 2 matches the remaining events
    to not-yet-matched articles of the same year by normalized Levenshtein
    similarity >= ``threshold``; best candidate wins, ties go to the lower
    article id, and each article is used at most once.
    """
    arts = sorted(articles, key=lambda a: id_key(a.article_id))
    by_key: dict[tuple[str, int], ArticleRecord] = {}
    for a in arts:
        key = (normalize_title(a.title), a.year)
        if key in by_key:
            if log is not None:
                log.append({"kind": "ambiguous_title", "title": key[0], "year": key[1],
                            "kept": by_key[key].article_id, "ignored": a.article_id})
            continue
        by_key[key] = a

    matches: list[Match] = []
    used: set[str] = set()
    pending: list[EventRecord] = []
    for e in sorted(events, key=lambda e: id_key(e.event_id)):
        hit = by_key.get((normalize_title(e.article_title), e.year))
        if hit is None:
            pending.append(e)
        else:
            matches.append(Match(e.event_id, hit.article_id, "exact"))
            used.add(hit.article_id)

    by_year: dict[int, list[tuple[str, ArticleRecord]]] = defaultdict(list)
    for a in arts:
        by_year[a.year].append((normalize_title(a.title), a))
    for e in pending:
        title = normalize_title(e.article_title)
        best, best_sim = None, -1.0
        for cand_title, a in by_year.get(e.year, ()):
            if a.article_id in used:
                continue
            longest = max(len(title), len(cand_title))
            if longest and abs(len(title) - len(cand_title)) > (1 - threshold) * longest + 1e-9:
                continue
            sim = similarity(title, cand_title)
            if sim >= threshold and sim > best_sim:
                best, best_sim = a, sim
        if best is not None:
            matches.append(Match(e.event_id, best.article_id, "fuzzy"))
            used.add(best.article_id)
    return matches


def filter_multi_event(matches: Sequence[Match], events: Sequence[EventRecord],
                       log: list | None = None) -> list[Match]:
    """Drop matches whose event row reports more than one event in the article,
    or whose article is claimed by more than one event row."""
    by_id = {e.event_id: e for e in events}
    refs = Counter(m.article_id for m in matches)
    kept = []
    for m in matches:
        ev = by_id[m.event_id]
        reason = None
        if ev.events_in_article > 1:
            reason = "multi_event_record"
        elif refs[m.article_id] > 1:
            reason = "shared_article"
        if reason is None:
            kept.append(m)
        elif log is not None:
            log.append({"event_id": m.event_id, "article_id": m.article_id, "reason": reason})
    return kept
