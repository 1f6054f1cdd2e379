import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from protestlens.corpus import (
    ArticleRecord,
    EventRecord,
    LabeledCorpus,
    Vocabulary,
    build_corpus,
    build_vocab,
    filter_multi_event,
    levenshtein,
    match_records,
    normalize_title,
    read_events,
    sample_negatives,
    similarity,
    split_dataset,
)
from protestlens.corpus.sampling import largest_remainder
from protestlens.errors import DecodeError, ParameterError, StratificationError
from protestlens.synthetic import fixture_dir


@pytest.mark.parametrize("raw, expected", [
    ("", ""),
    ("  Protest at CITY Hall!! ", "protest at city hall"),
    ("U.S.–China  talks", "u s china talks"),
    ("Ｍａｒｃｈ ON\tWashington", "march on washington"),  # full-width letters fold under NFKC
])
def test_normalize_title(raw, expected):
    assert normalize_title(raw) == expected


@pytest.mark.parametrize("a, b, d", [("", "abc", 3), ("kitten", "sitting", 3), ("flaw", "lawn", 2), ("same", "same", 0)])
def test_levenshtein(a, b, d):
    assert levenshtein(a, b) == d == levenshtein(b, a)


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="abc ", max_size=12), st.text(alphabet="abc ", max_size=12), st.text(alphabet="abc ", max_size=12))
def test_levenshtein_is_a_metric(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
    assert 0.0 <= similarity(a, b) <= 1.0


def _ev(eid, title, year=1970, n=1):
    return EventRecord(str(eid), title, year, n)


def _art(aid, title, year=1970, text="body", category="news"):
    return ArticleRecord(str(aid), title, year, text, category)


def test_identical_titles_match_exactly():
    assert match_records([_ev(1, "Students March")], [_art(9, "students march")]) == [("1", "9", "exact")]


def test_year_gate():
    assert match_records([_ev(1, "Students March", 1970)], [_art(9, "Students March", 1971)]) == []


def test_hand_built_fixture():
    events = [
        _ev(1, "Students rally against the draft"),
        _ev(2, "Farm workers strike in Delano"),
        _ev(3, "Tenants picket city housing office"),
        _ev(4, "Veterans march on the capitol today"),  # one typo away from article 14
        _ev(5, "Nothing matches this title at all"),
    ]
    articles = [
        _art(11, "Students Rally Against the Draft"),
        _art(12, "Farm Workers Strike in Delano!"),
        _art(13, "tenants picket city housing office"),
        _art(14, "Veterans marhc on the capitol today"),
        _art(15, "Stock prices fall sharply"),
    ]
    assert similarity(normalize_title(events[3].article_title), normalize_title(articles[3].title)) >= 0.9
    matches = match_records(events, articles)
    assert sorted(matches) == [("1", "11", "exact"), ("2", "12", "exact"), ("3", "13", "exact"),
                               ("4", "14", "fuzzy")]


def test_fuzzy_tie_goes_to_lower_article_id():
    events = [_ev(1, "mayor faces angry crowd at hall")]
    articles = [_art(30, "mayor faces angry crowd at hell"), _art(20, "mayor faces angry crowd at hill")]
    assert match_records(events, articles) == [("1", "20", "fuzzy")]


def test_fuzzy_matches_each_article_once():
    events = [_ev(1, "mayor faces angry crowd at hall"), _ev(2, "mayor faces angry crowd at hull")]
    matches = match_records(events, [_art(20, "mayor faces angry crowd at hill")])
    assert matches == [("1", "20", "fuzzy")]


def test_duplicate_article_titles_are_logged():
    notes = []
    matches = match_records([_ev(1, "Sit-in downtown")], [_art(8, "Sit in downtown"), _art(3, "sit-in downtown")],
                            log=notes)
    assert matches == [("1", "3", "exact")]
    assert notes[0]["kind"] == "ambiguous_title" and notes[0]["ignored"] == "8"


def test_filter_multi_event():
    events = [_ev(1, "a"), _ev(2, "b", n=2), _ev(3, "c"), _ev(4, "c")]
    matches = [("1", "10", "exact"), ("2", "20", "exact"), ("3", "30", "exact"), ("4", "30", "exact")]
    from protestlens.corpus import Match
    drops = []
    kept = filter_multi_event([Match(*m) for m in matches], events, log=drops)
    assert kept == [("1", "10", "exact")]
    assert sorted(d["reason"] for d in drops) == ["multi_event_record", "shared_article", "shared_article"]


def _archive():
    cats = ["sports"] * 30 + ["finance"] * 10 + ["Politics"] * 20 + ["Book Reviews"] * 10
    return [_art(i, f"t{i}", category=c) for i, c in enumerate(cats)]


def test_sports_only_archive():
    sports = [_art(i, f"t{i}", category="sports") for i in range(40)]
    got = sample_negatives(sports, 10, seed=0)
    assert len(got) == 10 and {a.category for a in got} == {"sports"}


def test_disallowed_category_never_sampled():
    got = sample_negatives(_archive(), 1000, seed=1)
    assert len(got) == 50
    assert all(a.category != "Politics" for a in got)


def test_sampling_is_proportional_and_deterministic():
    a = sample_negatives(_archive(), 10, seed=4)
    b = sample_negatives(_archive(), 10, seed=4)
    assert [x.article_id for x in a] == [x.article_id for x in b]
    counts = {c: sum(x.category == c for x in a) for c in ("sports", "finance", "Book Reviews")}
    assert counts == {"sports": 6, "finance": 2, "Book Reviews": 2}


def test_sampling_errors_and_empty_pool():
    with pytest.raises(ParameterError):
        sample_negatives(_archive(), 0, seed=0)
    log = []
    assert sample_negatives([_art(1, "x", category="politics")], 5, seed=0, log=log) == []
    assert log[0]["kind"] == "empty_negative_pool"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 200), st.lists(st.integers(1, 50), min_size=1, max_size=8))
def test_largest_remainder_conserves_total(total, weights):
    counts = largest_remainder(total, weights)
    assert sum(counts) == total
    exact = [total * w / sum(weights) for w in weights]
    assert all(abs(c - e) < 1 for c, e in zip(counts, exact))


def _corpus(n_pos, n_neg):
    ex = [{"id": str(i), "text": "t", "label": int(i < n_pos), "source": "x"} for i in range(n_pos + n_neg)]
    return LabeledCorpus(ex)


def test_split_counts():
    c = split_dataset(_corpus(50, 50), (0.8, 0.1, 0.1), seed=0)
    for name, n in (("train", 80), ("val", 10), ("test", 10)):
        rows = c.split(name)
        assert len(rows) == n
        assert abs(sum(r["label"] for r in rows) - n / 2) <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 80), st.integers(10, 80), st.integers(0, 1000))
def test_split_is_stratified_and_disjoint(n_pos, n_neg, seed):
    c = split_dataset(_corpus(n_pos, n_neg), (0.8, 0.1, 0.1), seed=seed)
    assert len(c.splits) == n_pos + n_neg
    frac = n_pos / (n_pos + n_neg)
    for name in ("train", "val", "test"):
        rows = c.split(name)
        assert abs(sum(r["label"] for r in rows) - frac * len(rows)) <= 1 + 1e-9
    assert split_dataset(_corpus(n_pos, n_neg), seed=seed).splits == c.splits


def test_split_errors():
    with pytest.raises(ParameterError):
        split_dataset(_corpus(5, 5), (1.0, 0.0, 0.0))
    with pytest.raises(StratificationError):
        split_dataset(_corpus(3, 50), (0.8, 0.1, 0.1))


def test_vocab_frequency_and_specials():
    assert build_vocab(["a a b"], size=100).itos == ["[PAD]", "[UNK]", "[CLS]", "a", "b"]
    assert build_vocab(["y x"], size=100).itos[3:] == ["x", "y"]


def test_vocab_no_leakage_and_errors(tmp_path):
    v = build_vocab(["protest march"], size=10)
    assert v.encode("protest riot") == [4, 1]  # march=3, protest=4 (tie broken lexicographically)
    with pytest.raises(ParameterError):
        build_vocab(["a"], size=9)
    with pytest.raises(ParameterError):
        build_vocab([], size=10)
    v.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt") == v
    (tmp_path / "bad.txt").write_text("a\nb\nc\n")
    with pytest.raises(DecodeError):
        Vocabulary.load(tmp_path / "bad.txt")


def test_events_csv_warns_on_out_of_range_year(tmp_path):
    (tmp_path / "e.csv").write_text("event_id,article_title,year,events_in_article,size\n1,A,1950,1,30\n")
    warnings = []
    (ev,) = read_events(tmp_path / "e.csv", warnings)
    assert ev.attributes == {"size": "30"}
    assert warnings


def test_fixture_counts_and_determinism(tmp_path):
    fx = fixture_dir()
    outs = []
    for run in ("a", "b"):
        manifest = build_corpus(fx / "events.csv", fx / "articles.jsonl", tmp_path / run, seed=5)
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / run).iterdir())})
    c = manifest["counts"]
    assert (c["matches_total"], c["positives"], c["negatives"]) == (167, 119, 270)
    assert c["matches_after_filter"] == c["positives"]
    assert outs[0] == outs[1]
    rows = [json.loads(line) for name, raw in outs[0].items() if name.endswith(".jsonl")
            for line in raw.decode().splitlines()]
    ids = [r["id"] for r in rows]
    assert len(ids) == len(set(ids)) == 389
    assert all(r["source"] in ("matched-positive", "sampled-negative") for r in rows)
