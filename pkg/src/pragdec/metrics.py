"""Evaluation metrics and protocols: readability indices, Rouge-L, n-gram
novelty, prompt-likelihood classification, and pairwise preference scoring.

Readability uses its own documented segmentation (distinct from any backend
tokenizer): sentences split on runs of [.?!] at whitespace or end of text;
words are whitespace fields with edge punctuation stripped; letters are
alphabetic characters; syllables count vowel groups (aeiouy) minus a trailing
silent "e" when that leaves at least one syllable, minimum one per word.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from pragdec.backend.base import Backend, Context, score_sequence
from pragdec.engine import AttributeFrame, RationalityConfig, s1_score_sequence

_SENTENCE_SPLIT = re.compile(r"[.?!]+(?:\s+|$)")
_VOWEL_GROUPS = re.compile(r"[aeiouy]+")


class EmptyText(ValueError):
    """No countable words after segmentation."""


class TooShort(ValueError):
    """Text shorter than the requested n-gram order."""


@dataclass(frozen=True)
class ReadabilityReport:
    fre: float
    dcr: float
    gfi: float
    cli_index: float
    word_count: int
    sentence_count: int
    syllable_count: int
    complex_word_count: int
    difficult_word_count: int
    letter_count: int


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: str


@dataclass(frozen=True)
class PairExample:
    sent_more: str  # stereotypical member
    sent_less: str
    bias_type: str


# -- segmentation ---------------------------------------------------------------


def split_sentences(text: str) -> list[str]:
    parts = [p.strip() for p in _SENTENCE_SPLIT.split(text)]
    return [p for p in parts if p]


def split_words(text: str) -> list[str]:
    words = []
    for field in text.split():
        word = _strip_edge_punct(field)
        if word:
            words.append(word)
    return words


def _strip_edge_punct(field: str) -> str:
    start, end = 0, len(field)
    while start < end and not field[start].isalnum():
        start += 1
    while end > start and not field[end - 1].isalnum():
        end -= 1
    return field[start:end]


def count_syllables(word: str) -> int:
    w = word.lower()
    groups = len(_VOWEL_GROUPS.findall(w))
    if w.endswith("e") and groups > 1:
        groups -= 1
    return max(groups, 1)


# -- readability ------------------------------------------------------------------


def load_familiar_words(path: str | None = None) -> frozenset[str]:
    """One lowercase word per line; default list ships with the package."""
    if path is None:
        data = resources.files("pragdec").joinpath("data/familiar_words.txt")
        raw = data.read_text(encoding="utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    return frozenset(w.strip().lower() for w in raw.splitlines() if w.strip())


def readability(text: str, familiar_words: Iterable[str]) -> ReadabilityReport:
    words = split_words(text)
    if not words:
        raise EmptyText("no words to score")
    familiar = (
        familiar_words
        if isinstance(familiar_words, (set, frozenset))
        else frozenset(familiar_words)
    )
    sentences = max(1, len(split_sentences(text)))
    syllables = [count_syllables(w) for w in words]
    n_words = len(words)
    n_syll = sum(syllables)
    n_complex = sum(1 for s in syllables if s >= 3)
    n_letters = sum(1 for w in words for ch in w if ch.isalpha())
    n_difficult = sum(1 for w in words if w.lower() not in familiar)

    wps = n_words / sentences
    fre = 206.835 - 1.015 * wps - 84.6 * (n_syll / n_words)
    gfi = 0.4 * (wps + 100.0 * (n_complex / n_words))
    letters_per_100 = 100.0 * n_letters / n_words
    sents_per_100 = 100.0 * sentences / n_words
    cli_index = 0.0588 * letters_per_100 - 0.296 * sents_per_100 - 15.8
    difficult_frac = n_difficult / n_words
    dcr = 0.1579 * (100.0 * difficult_frac) + 0.0496 * wps
    if difficult_frac > 0.05:
        dcr += 3.6365
    return ReadabilityReport(
        fre=fre,
        dcr=dcr,
        gfi=gfi,
        cli_index=cli_index,
        word_count=n_words,
        sentence_count=sentences,
        syllable_count=n_syll,
        complex_word_count=n_complex,
        difficult_word_count=n_difficult,
        letter_count=n_letters,
    )


# -- overlap metrics ---------------------------------------------------------------


def _metric_tokens(text: str) -> list[str]:
    return [w.lower() for w in split_words(text)]


def rouge_l(candidate: str, reference: str) -> dict[str, float]:
    cand = _metric_tokens(candidate)
    ref = _metric_tokens(reference)
    if not cand or not ref:
        raise EmptyText("both texts need at least one word")
    # LCS length by the usual two-row DP
    prev = [0] * (len(ref) + 1)
    for c in cand:
        cur = [0]
        for j, r in enumerate(ref, start=1):
            cur.append(prev[j - 1] + 1 if c == r else max(prev[j], cur[j - 1]))
        prev = cur
    lcs = prev[-1]
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1}


def ngram_novelty(summary: str, source: str, n: int) -> float:
    """Fraction of the summary's n-grams (by position) absent from the
    source's n-gram set."""
    if n < 1:
        raise ValueError("n must be >= 1")
    summ = _metric_tokens(summary)
    if len(summ) < n:
        raise TooShort(f"summary has {len(summ)} tokens, needs {n}")
    src = _metric_tokens(source)
    source_grams = {tuple(src[i : i + n]) for i in range(len(src) - n + 1)}
    grams = [tuple(summ[i : i + n]) for i in range(len(summ) - n + 1)]
    novel = sum(1 for g in grams if g not in source_grams)
    return novel / len(grams)


# -- likelihood-based protocols -------------------------------------------------------


def classify(backend: Backend, frame2: AttributeFrame, text: str) -> str:
    """Two-way classification: the attribute whose control prompt gives the
    text the higher likelihood wins; an exact tie goes to the target."""
    if frame2.size != 2:
        raise ValueError("classify needs a frame with exactly two attributes")
    tokens = backend.tokenize(text)
    if not tokens:
        raise EmptyText("text tokenizes to nothing")
    scores = [
        score_sequence(backend, Context(a.prompt, ()), tokens)
        for a in frame2.attributes
    ]
    t = frame2.target_index
    other = 1 - t
    return frame2.attributes[t].name if scores[t] >= scores[other] else frame2.attributes[other].name


def accuracy(
    backend: Backend, frame2: AttributeFrame, dataset: Sequence[LabeledExample]
) -> float:
    if not dataset:
        raise ValueError("dataset must be non-empty")
    names = set(frame2.names)
    for ex in dataset:
        if ex.label not in names:
            raise ValueError(f"label {ex.label!r} not in frame attributes")
    hits = sum(1 for ex in dataset if classify(backend, frame2, ex.text) == ex.label)
    return hits / len(dataset)


def pairwise_bias_score(
    backend: Backend,
    frame: AttributeFrame | None,
    pairs: Sequence[PairExample],
    mode: str = "raw",
    rationality: RationalityConfig | None = None,
    content_ctx: Context | None = None,
) -> float:
    """Percentage of pairs where the scorer prefers the stereotypical member.

    mode "raw" scores plain sequence likelihood; mode "s1" scores under the
    controlled speaker for the given frame and rationality. Ties count as
    not-preferring (conservative), so degenerate identical pairs score 0.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    if mode not in ("raw", "s1"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "s1" and (frame is None or rationality is None):
        raise ValueError("s1 mode needs a frame and rationality config")
    ctx = content_ctx if content_ctx is not None else Context((), ())

    def score(text: str) -> float:
        tokens = backend.tokenize(text)
        if not tokens:
            raise EmptyText("pair member tokenizes to nothing")
        if mode == "raw":
            return score_sequence(backend, ctx, tokens)
        assert frame is not None and rationality is not None
        return s1_score_sequence(backend, frame, ctx, rationality, tokens)

    wins = sum(1 for p in pairs if score(p.sent_more) > score(p.sent_less))
    return 100.0 * wins / len(pairs)


# -- dataset files -----------------------------------------------------------------


def load_labeled_tsv(path: str) -> list[LabeledExample]:
    """TSV: text<TAB>label, one example per line."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 tab-separated fields")
            out.append(LabeledExample(text=parts[0], label=parts[1]))
    return out


def load_pairs_tsv(path: str) -> list[PairExample]:
    """TSV: sent_more<TAB>sent_less<TAB>bias_type, one pair per line."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            if not parts[0] or not parts[1]:
                raise ValueError(f"{path}:{lineno}: pair members must be non-empty")
            out.append(PairExample(sent_more=parts[0], sent_less=parts[1], bias_type=parts[2]))
    return out
