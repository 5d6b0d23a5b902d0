"""Uniform next-token interface over the in-process n-gram model and the
remote logits client, plus sequence scoring and conditional perplexity."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from pragdec.probcore import TokenDist


@dataclass(frozen=True)
class Context:
    """Fixed conditioning (prompt) plus the tokens generated so far."""

    prompt_tokens: tuple[int, ...] = ()
    generated_tokens: tuple[int, ...] = ()

    def extended(self, token: int) -> "Context":
        return Context(self.prompt_tokens, self.generated_tokens + (token,))

    def full(self) -> tuple[int, ...]:
        return self.prompt_tokens + self.generated_tokens


class Backend(ABC):
    """A next-token-distribution provider.

    Implementations are shareable across concurrent readers; next_dist is a
    pure read of immutable state (the remote client serializes per-session
    appends internally).
    """

    kind: str = "abstract"

    @property
    @abstractmethod
    def vocab_size(self) -> int: ...

    @property
    @abstractmethod
    def bos_id(self) -> int: ...

    @property
    @abstractmethod
    def eos_id(self) -> int: ...

    @property
    def tokenizer_descriptor(self) -> str:
        return self.kind

    @abstractmethod
    def tokenize(self, text: str) -> list[int]: ...

    @abstractmethod
    def token_text(self, token_id: int) -> str: ...

    @abstractmethod
    def next_dist(self, ctx: Context) -> TokenDist:
        """Normalized distribution over the next token given ctx."""

    def next_dist_batch(self, ctxs: list[Context]) -> list[TokenDist]:
        """Evaluate several contexts; remote backends overlap the requests."""
        return [self.next_dist(c) for c in ctxs]

    def detokenize(self, token_ids: list[int] | tuple[int, ...]) -> str:
        reserved = {self.bos_id, self.eos_id}
        return " ".join(self.token_text(t) for t in token_ids if t not in reserved)


def score_sequence(backend: Backend, ctx: Context, tokens: list[int] | tuple[int, ...]) -> float:
    """Chain-rule log-probability of ``tokens`` continuing ``ctx``."""
    if len(tokens) == 0:
        raise ValueError("score_sequence requires at least one token")
    total = 0.0
    cur = ctx
    for t in tokens:
        d = backend.next_dist(cur)
        total += float(d.logp[t])
        cur = cur.extended(t)
    return total


def conditional_ppl(
    backend: Backend,
    prompt: list[int] | tuple[int, ...],
    continuation: list[int] | tuple[int, ...],
) -> float:
    """exp of the mean negative stepwise log-probability of the continuation."""
    n = len(continuation)
    if n < 1:
        raise ValueError("conditional_ppl requires a non-empty continuation")
    score = score_sequence(backend, Context(tuple(prompt)), continuation)
    return math.exp(-score / n)
