"""Trainable in-process n-gram model with Jelinek-Mercer interpolation.

Smoothing: P(w|h) = lam * P_add(w|h) + (1-lam) * P(w|h[1:]), applied from the
longest stored history down to the additive-delta unigram base, where
P_add(w|h) = (c(h,w) + delta) / (c(h,.) + delta * V). Every token therefore
has positive probability under every context, which the listener math relies
on (its denominators mix literal-speaker probabilities).

Tokenization is whitespace word-level, lowercased, with punctuation split into
separate tokens, so oracle values stay hand-checkable.
"""

from __future__ import annotations

import io
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from pragdec import _kernels
from pragdec.backend.base import Backend, Context
from pragdec.probcore import TokenDist, normalize

MAGIC = b"RSANG1"

BOS, EOS, UNK = 0, 1, 2
RESERVED = ("<s>", "</s>", "<unk>")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class EmptyCorpus(ValueError):
    """Training stream held no usable document."""


def word_tokenize(text: str) -> list[str]:
    """Lowercase; maximal word-character runs, punctuation as single tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class _SuccessorTable:
    ids: np.ndarray  # int64, sorted
    counts: np.ndarray  # float64, aligned with ids
    total: float


@dataclass
class NGramModel(Backend):
    """Word n-gram language model over a closed vocabulary with reserved
    BOS/EOS/UNK ids. Immutable after training."""

    order: int
    lam: float
    delta: float
    id_to_word: list[str]
    counts: dict[tuple[int, ...], Counter] = field(repr=False)

    kind = "ngram"

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must be in (0, 1)")
        if self.delta <= 0.0:
            raise ValueError("delta must be > 0")
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word)}
        self._tables: dict[tuple[int, ...], _SuccessorTable] = {}
        for ctx, ctr in self.counts.items():
            ids = np.array(sorted(ctr), dtype=np.int64)
            cnt = np.array([float(ctr[i]) for i in ids], dtype=np.float64)
            self._tables[ctx] = _SuccessorTable(ids, cnt, float(cnt.sum()))
        self._unigram = self._level_vector((), np.zeros(self.vocab_size), lam=1.0)
        self._empty_ids = np.empty(0, dtype=np.int64)
        self._empty_counts = np.empty(0, dtype=np.float64)

    # -- Backend surface ---------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return len(self.id_to_word)

    @property
    def bos_id(self) -> int:
        return BOS

    @property
    def eos_id(self) -> int:
        return EOS

    @property
    def tokenizer_descriptor(self) -> str:
        return "word-lower-punct-split"

    def tokenize(self, text: str) -> list[int]:
        return [self.word_to_id.get(w, UNK) for w in word_tokenize(text)]

    def token_text(self, token_id: int) -> str:
        return self.id_to_word[token_id]

    def next_dist(self, ctx: Context) -> TokenDist:
        history = ctx.full()[-(self.order - 1):] if self.order > 1 else ()
        probs = self._unigram
        for k in range(1, len(history) + 1):
            suffix = tuple(history[len(history) - k:])
            probs = self._level_vector(suffix, probs, self.lam)
        logp = np.log(probs)
        return normalize(TokenDist(logp))

    # -- internals ----------------------------------------------------------

    def _level_vector(self, history: tuple[int, ...], prev: np.ndarray, lam: float) -> np.ndarray:
        table = self._tables.get(history)
        if table is None:
            ids, counts, total = self._empty_ids, self._empty_counts, 0.0
        else:
            ids, counts, total = table.ids, table.counts, table.total
        return _kernels.jm_blend(prev, ids, counts, total, self.delta, lam)

    # -- serialization -------------------------------------------------------

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    def to_bytes(self) -> bytes:
        """Versioned binary container, byte-deterministic for a given model."""
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<IddI", self.order, self.lam, self.delta, self.vocab_size))
        for word in self.id_to_word:
            raw = word.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
        contexts = sorted(self.counts, key=lambda c: (len(c), c))
        buf.write(struct.pack("<I", len(contexts)))
        for ctx in contexts:
            ctr = self.counts[ctx]
            buf.write(struct.pack("<I", len(ctx)))
            buf.write(struct.pack(f"<{len(ctx)}I", *ctx) if ctx else b"")
            succ = sorted(ctr.items())
            buf.write(struct.pack("<I", len(succ)))
            for tok, cnt in succ:
                buf.write(struct.pack("<IQ", tok, cnt))
        return buf.getvalue()

    @classmethod
    def load(cls, path: str) -> "NGramModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    @classmethod
    def from_bytes(cls, raw: bytes) -> "NGramModel":
        view = io.BytesIO(raw)
        if view.read(len(MAGIC)) != MAGIC:
            raise ValueError("not a recognized model file (bad magic)")
        order, lam, delta, vocab_size = struct.unpack("<IddI", view.read(24))
        id_to_word = []
        for _ in range(vocab_size):
            (n,) = struct.unpack("<I", view.read(4))
            id_to_word.append(view.read(n).decode("utf-8"))
        (n_ctx,) = struct.unpack("<I", view.read(4))
        counts: dict[tuple[int, ...], Counter] = {}
        for _ in range(n_ctx):
            (clen,) = struct.unpack("<I", view.read(4))
            ctx = struct.unpack(f"<{clen}I", view.read(4 * clen)) if clen else ()
            (n_succ,) = struct.unpack("<I", view.read(4))
            ctr: Counter = Counter()
            for _ in range(n_succ):
                tok, cnt = struct.unpack("<IQ", view.read(12))
                ctr[tok] = cnt
            counts[tuple(ctx)] = ctr
        return cls(order=order, lam=lam, delta=delta, id_to_word=id_to_word, counts=counts)

    def export_text(self) -> str:
        """Plain-text dump for eyeball inspection of fixtures."""
        lines = [f"order={self.order} lam={self.lam} delta={self.delta} vocab={self.vocab_size}"]
        lines.append("[vocab]")
        lines.extend(f"{i}\t{w}" for i, w in enumerate(self.id_to_word))
        lines.append("[counts]")
        for ctx in sorted(self.counts, key=lambda c: (len(c), c)):
            ctboth = " ".join(self.id_to_word[t] for t in ctx) or "()"
            for tok, cnt in sorted(self.counts[ctx].items()):
                lines.append(f"{ctboth}\t{self.id_to_word[tok]}\t{cnt}")
        return "\n".join(lines) + "\n"


def train_ngram(
    corpus: Iterable[str],
    order: int,
    lam: float = 0.9,
    delta: float = 0.1,
) -> NGramModel:
    """Count-based training; each document is wrapped in BOS ... EOS.

    ``corpus`` yields one document per element (one per line in the file
    format). Documents that tokenize to nothing are skipped.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    id_to_word = list(RESERVED)
    word_to_id = {w: i for i, w in enumerate(id_to_word)}
    docs: list[list[int]] = []
    for doc in corpus:
        words = word_tokenize(doc)
        if not words:
            continue
        ids = []
        for w in words:
            if w not in word_to_id:
                word_to_id[w] = len(id_to_word)
                id_to_word.append(w)
            ids.append(word_to_id[w])
        docs.append(ids)
    if not docs:
        raise EmptyCorpus("corpus holds no non-empty document")

    counts: dict[tuple[int, ...], Counter] = {}
    for ids in docs:
        seq = [BOS, *ids, EOS]
        for i in range(1, len(seq)):
            for k in range(0, order):
                if i - k < 0:
                    break
                ctx = tuple(seq[i - k : i])
                counts.setdefault(ctx, Counter())[seq[i]] += 1
    return NGramModel(order=order, lam=lam, delta=delta, id_to_word=id_to_word, counts=counts)


def load_corpus(path: str) -> list[str]:
    """UTF-8 plain text, one document per line."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]
