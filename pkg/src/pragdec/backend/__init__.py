"""Scoring backends: shared interface, local n-gram, remote HTTP client."""

from pragdec.backend.base import Backend, Context, conditional_ppl, score_sequence
from pragdec.backend.ngram import (
    BOS,
    EOS,
    UNK,
    EmptyCorpus,
    NGramModel,
    load_corpus,
    train_ngram,
    word_tokenize,
)
from pragdec.backend.remote import (
    ProtocolViolation,
    RemoteBackend,
    RemoteError,
    RemoteUnavailable,
)

__all__ = [
    "Backend",
    "Context",
    "score_sequence",
    "conditional_ppl",
    "NGramModel",
    "train_ngram",
    "load_corpus",
    "word_tokenize",
    "EmptyCorpus",
    "BOS",
    "EOS",
    "UNK",
    "RemoteBackend",
    "RemoteError",
    "RemoteUnavailable",
    "ProtocolViolation",
]
