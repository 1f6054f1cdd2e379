"""Event/article record types and their interchange formats (CSV, JSONL)."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import DecodeError

log = logging.getLogger(__name__)

EVENT_COLUMNS = ("event_id", "article_title", "year", "events_in_article")
EVENT_YEARS = (1960, 1995)


def id_key(value: str):
    """Sort key: numeric ids numerically, others lexicographically after them."""
    return (0, int(value), "") if value.isdigit() else (1, 0, value)


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    article_title: str
    year: int
    events_in_article: int = 1
    attributes: dict = field(default_factory=dict, compare=False, hash=False)


@dataclass(frozen=True)
class ArticleRecord:
    article_id: str
    title: str
    year: int
    text: str = ""
    category: str = ""


def read_events(path: str | Path, warnings: list | None = None) -> list[EventRecord]:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DecodeError(f"cannot read events file {path}: {exc.strerror}") from None
    events = []
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in EVENT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DecodeError(f"{path}: events CSV lacks columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                year = int(row["year"])
                count = int(row["events_in_article"])
            except (TypeError, ValueError):
                raise DecodeError(f"{path}:{lineno}: year and events_in_article must be integers") from None
            if count < 1:
                raise DecodeError(f"{path}:{lineno}: events_in_article must be >= 1, got {count}")
            if not EVENT_YEARS[0] <= year <= EVENT_YEARS[1]:
                msg = f"event {row['event_id']} year {year} outside {EVENT_YEARS[0]}-{EVENT_YEARS[1]}"
                log.warning(msg)
                if warnings is not None:
                    warnings.append(msg)
            extra = {k: v for k, v in row.items() if k not in EVENT_COLUMNS}
            events.append(EventRecord(row["event_id"].strip(), row["article_title"], year, count, extra))
    return events


def read_articles(path: str | Path) -> list[ArticleRecord]:
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DecodeError(f"cannot read articles file {path}: {exc.strerror}") from None
    articles = []
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                articles.append(ArticleRecord(str(row["id"]), row.get("title", ""), int(row["year"]),
                                              row.get("text", "") or "", row.get("category", "") or ""))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"{path}:{lineno}: bad article row ({exc})") from None
    return articles


def write_events(path: str | Path, events: Sequence[EventRecord]) -> None:
    extra_cols = sorted({k for e in events for k in e.attributes})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*EVENT_COLUMNS, *extra_cols])
        for e in events:
            writer.writerow([e.event_id, e.article_title, e.year, e.events_in_article,
                             *(e.attributes.get(c, "") for c in extra_cols)])


def write_articles(path: str | Path, articles: Iterable[ArticleRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in articles:
            row = {"id": a.article_id, "title": a.title, "year": a.year, "text": a.text, "category": a.category}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc.strerror}") from None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if line.strip():
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DecodeError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    return rows
