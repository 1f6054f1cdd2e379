"""Synthetic stand-ins for the licensed data: a scaled event/article fixture,
a planted-lexicon article corpus and blob-pattern protest images."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus.matching import normalize_title
from .corpus.records import ArticleRecord, EventRecord, write_articles, write_events
from .corpus.sampling import NEGATIVE_CATEGORIES

PROTEST_LEXICON = (
    "protest", "protesters", "demonstrators", "demonstration", "rally", "marched", "march",
    "picket", "picketers", "boycott", "activists", "chanting", "placards", "sit-in", "marchers",
)

FILLER = (
    "the", "a", "of", "and", "in", "to", "on", "for", "with", "at", "by", "from", "was", "were", "is",
    "said", "officials", "city", "county", "state", "new", "york", "year", "week", "monday", "tuesday",
    "wednesday", "thursday", "friday", "saturday", "sunday", "morning", "evening", "report", "plan",
    "council", "members", "public", "local", "national", "program", "meeting", "committee", "office",
    "building", "street", "avenue", "downtown", "residents", "people", "group", "according", "after",
    "before", "during", "about", "more", "than", "many", "several", "two", "three", "four", "hundred",
    "thousand", "million", "percent", "announced", "expected", "would", "could", "also", "today",
    "yesterday", "last", "first", "time", "spokesman", "director", "president", "mayor", "governor",
    "school", "hospital", "park", "center", "area", "region", "community", "service", "issue", "policy",
    "proposal", "statement", "decision", "hearing", "board", "department", "agency", "federal", "union",
    "workers", "company", "market", "season", "family", "children", "students", "church", "court",
)

CATEGORY_WORDS = {
    "entertainment": ("film", "actor", "theater", "premiere", "concert", "audience", "broadway", "comedy"),
    "book reviews": ("novel", "author", "chapter", "biography", "memoir", "publisher", "prose", "reader"),
    "business": ("earnings", "quarter", "shares", "merger", "executive", "revenue", "corporation", "profit"),
    "classified": ("apartment", "rent", "wanted", "sale", "listing", "bedroom", "contact", "salary"),
    "finance": ("bonds", "treasury", "yield", "interest", "dollar", "investors", "stocks", "index"),
    "sports": ("game", "inning", "coach", "playoff", "score", "team", "quarterback", "championship"),
    "real estate": ("mortgage", "property", "broker", "condominium", "housing", "tenants", "lease", "acre"),
    "leisure": ("travel", "garden", "recipe", "vacation", "hiking", "beach", "museum", "weekend"),
    "obituary": ("died", "survived", "funeral", "widow", "age", "career", "born", "buried"),
}

NEWS_CATEGORIES = ("national", "metro", "politics", "world")

_TITLE_WORDS = tuple(w for w in FILLER if len(w) > 3) + tuple(w for ws in CATEGORY_WORDS.values() for w in ws)


def _sentences(words: list[str]) -> str:
    out, i = [], 0
    while i < len(words):
        chunk = words[i:i + 12]
        out.append(" ".join(chunk).capitalize() + ".")
        i += 12
    return " ".join(out)


def protest_text(rng: np.random.Generator, length: int, n_keywords: int = 3, within: int | None = None) -> str:
    words = list(rng.choice(FILLER, size=length))
    span = min(length, within or length)
    for pos in rng.choice(span, size=min(n_keywords, span), replace=False):
        words[pos] = str(rng.choice(PROTEST_LEXICON))
    return _sentences(words)


def other_text(rng: np.random.Generator, length: int, category: str | None = None) -> str:
    words = list(rng.choice(FILLER, size=length))
    if category in CATEGORY_WORDS:
        for pos in rng.choice(length, size=max(1, length // 10), replace=False):
            words[pos] = str(rng.choice(CATEGORY_WORDS[category]))
    return _sentences(words)


def make_text_corpus(n_pos: int = 1190, n_neg: int = 2700, seed: int = 0,
                     min_len: int = 30, max_len: int = 120, plant_within: int = 100) -> list[dict]:
    """Labeled articles; positives carry 1-4 protest lexicon words placed within
    the first ``plant_within`` tokens, negatives come from the safe categories."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_pos):
        length = int(rng.integers(min_len, max_len + 1))
        text = protest_text(rng, length, int(rng.integers(1, 5)), plant_within)
        rows.append({"id": f"p{i:06d}", "text": text, "label": 1, "source": "synthetic-positive"})
    cats = list(CATEGORY_WORDS)
    for i in range(n_neg):
        length = int(rng.integers(min_len, max_len + 1))
        cat = cats[i % len(cats)]
        rows.append({"id": f"n{i:06d}", "text": other_text(rng, length, cat), "label": 0,
                     "source": "synthetic-negative"})
    order = rng.permutation(len(rows))
    return [rows[i] for i in order]


# ---------------------------------------------------------------------------
# event/article fixture shaped like the reference collection, scaled down


def _title(rng: np.random.Generator, taken: set[str]) -> str:
    while True:
        n = int(rng.integers(4, 7))
        title = " ".join(rng.choice(_TITLE_WORDS, size=n, replace=False)).title()
        if normalize_title(title) not in taken:
            taken.add(normalize_title(title))
            return title


def _typo(rng: np.random.Generator, title: str) -> str:
    chars = list(title)
    letters = [i for i, c in enumerate(chars) if c.isalpha() and 2 < i < len(chars) - 2]
    i = int(rng.choice(letters))
    repl = "qxzjkv".replace(chars[i].lower(), "")
    chars[i] = str(rng.choice(list(repl)))
    return "".join(chars)


def make_paper_fixture(seed: int = 2023, n_single_exact: int = 110, n_single_fuzzy: int = 9,
                       n_multi_record: int = 30, n_shared: int = 9, n_unmatched: int = 8,
                       n_wrong_year: int = 4, negative_pool: dict | None = None,
                       n_other_news: int = 60) -> tuple[list[EventRecord], list[ArticleRecord]]:
    """Events and archive articles whose pipeline counts are known by construction.

    Defaults give 110 + 9 + 30 + 2*9 = 167 matches, of which 30 multi-event rows
    and 18 shared-article rows are dropped, leaving 119 positives; the
    allowlisted pool holds 405 articles so 270 negatives can be drawn.
    """
    rng = np.random.default_rng(seed)
    pool = negative_pool or {c: 45 for c in NEGATIVE_CATEGORIES}
    taken: set[str] = set()
    events: list[EventRecord] = []
    articles: list[ArticleRecord] = []
    counter = {"e": 0, "a": 0}

    def new_article(title, year, text, category):
        counter["a"] += 1
        art = ArticleRecord(f"{counter['a']:05d}", title, year, text, category)
        articles.append(art)
        return art

    def new_event(title, year, count=1):
        counter["e"] += 1
        attrs = {"size": str(int(rng.integers(10, 5000))), "claims": str(rng.choice(["civil rights", "labor", "peace", "environment"])),
                 "location": str(rng.choice(["new york", "chicago", "boston", "washington"]))}
        events.append(EventRecord(f"E{counter['e']:05d}", title, year, count, attrs))

    def year():
        return int(rng.integers(1960, 1996))

    def news_article(title, y):
        cat = str(rng.choice(NEWS_CATEGORIES[:2]))
        return new_article(title, y, protest_text(rng, int(rng.integers(60, 160)), int(rng.integers(2, 5))), cat)

    for _ in range(n_single_exact):
        t, y = _title(rng, taken), year()
        news_article(t, y)
        new_event(t.upper() if rng.random() < 0.3 else t, y)
    for _ in range(n_single_fuzzy):
        t, y = _title(rng, taken), year()
        news_article(t, y)
        new_event(_typo(rng, t), y)
    for _ in range(n_multi_record):
        t, y = _title(rng, taken), year()
        news_article(t, y)
        new_event(t, y, count=int(rng.integers(2, 4)))
    for _ in range(n_shared):
        t, y = _title(rng, taken), year()
        news_article(t, y)
        new_event(t, y)
        new_event(t + "!", y)
    for _ in range(n_unmatched):
        new_event(_title(rng, taken), year())
    for _ in range(n_wrong_year):
        t, y = _title(rng, taken), int(rng.integers(1960, 1995))
        news_article(t, y)
        new_event(t, y + 1)
    for _ in range(n_other_news):
        t, y = _title(rng, taken), year()
        new_article(t, y, other_text(rng, int(rng.integers(60, 160))), str(rng.choice(NEWS_CATEGORIES[2:])))
    for cat, n in sorted(pool.items()):
        for _ in range(n):
            t, y = _title(rng, taken), year()
            new_article(t, y, other_text(rng, int(rng.integers(60, 160)), cat), cat.title())

    order = rng.permutation(len(articles))
    articles = [articles[i] for i in order]
    return events, articles


def write_paper_fixture(out_dir: str | Path, **kwargs) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events, articles = make_paper_fixture(**kwargs)
    write_events(out / "events.csv", events)
    write_articles(out / "articles.jsonl", articles)
    return out / "events.csv", out / "articles.jsonl"


def fixture_dir() -> Path:
    """Bundled copy of :func:`write_paper_fixture` output."""
    return Path(__file__).parent / "data" / "fixture"


# ---------------------------------------------------------------------------
# images


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    base = rng.uniform(0.25, 0.55, size=3)
    tilt = rng.uniform(-0.15, 0.15, size=(2, 3))
    img = base + yy[..., None] * tilt[0] + xx[..., None] * tilt[1]
    return img + rng.normal(0, 0.04, size=(size, size, 3))


def _disk(size, cy, cx, r):
    yy, xx = np.mgrid[0:size, 0:size]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def make_blob_images(n: int = 800, size: int = 64, seed: int = 0, positive_fraction: float = 0.5):
    """Images [n, size, size, 3] and label dicts.

    Protest images carry a bright high-contrast blob; non-protest images carry
    a faint low-contrast one. Sign (white bar), police (dark blue patch) and a
    soft violence score (red tint) appear only on protest images; some
    attribute labels are left absent to exercise masking.
    """
    rng = np.random.default_rng(seed)
    pixels = np.empty((n, size, size, 3), dtype=np.float32)
    labels = []
    n_pos = int(round(n * positive_fraction))
    flags = np.array([1] * n_pos + [0] * (n - n_pos))
    rng.shuffle(flags)
    for i, protest in enumerate(flags):
        img = _background(rng, size)
        r = rng.uniform(size / 8, size / 4)
        cy, cx = rng.uniform(r, size - r, size=2)
        blob = _disk(size, cy, cx, r)
        lab = {"protest": float(protest), "violence": 0.0, "sign": 0.0, "police": 0.0}
        if protest:
            img[blob] = rng.uniform(0.9, 1.0, size=3)
            if rng.random() < 0.5:
                y0, x0 = rng.integers(0, size - size // 4, size=2)
                img[y0:y0 + size // 8, x0:x0 + size // 4] = 1.0
                lab["sign"] = 1.0
            if rng.random() < 0.3:
                y0, x0 = rng.integers(0, size - size // 6, size=2)
                img[y0:y0 + size // 6, x0:x0 + size // 6] = (0.05, 0.05, 0.35)
                lab["police"] = 1.0
            v = float(rng.choice([0.0, 0.0, 0.5, 1.0]))
            img[..., 0] += 0.15 * v
            lab["violence"] = v
        else:
            img[blob] += rng.uniform(-0.06, 0.06)
        for key in ("violence", "sign", "police"):
            if rng.random() < 0.1:
                lab[key] = None
        pixels[i] = np.clip(img, 0.0, 1.0)
        labels.append(lab)
    return pixels, labels
