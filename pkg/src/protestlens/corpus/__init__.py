"""Training-corpus construction from event records and an article archive."""

from .matching import Match, filter_multi_event, levenshtein, match_records, normalize_title, similarity
from .pipeline import assemble_corpus, build_corpus
from .records import ArticleRecord, EventRecord, read_articles, read_events, read_jsonl, write_jsonl
from .sampling import NEGATIVE_CATEGORIES, LabeledCorpus, sample_negatives, split_dataset
from .vocab import Vocabulary, build_vocab, tokenize

__all__ = [
    "Match", "filter_multi_event", "levenshtein", "match_records", "normalize_title", "similarity",
    "assemble_corpus", "build_corpus", "ArticleRecord", "EventRecord", "read_articles", "read_events",
    "read_jsonl", "write_jsonl", "NEGATIVE_CATEGORIES", "LabeledCorpus", "sample_negatives",
    "split_dataset", "Vocabulary", "build_vocab", "tokenize",
]
