"""Log-domain probability primitives shared by every other module.

All distributions live in natural-log space as float64 vectors. Excluded
tokens carry the NEG_INF sentinel; code checks for it before any arithmetic
that could produce NaN. TokenDist arrays are frozen (read-only) after
construction so values can be shared across concurrent decode sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pragdec import _kernels

NEG_INF = float("-inf")


class EmptySupport(ValueError):
    """A distribution (or combination) has no token with finite probability."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TokenDist:
    """A log-probability vector over a vocabulary.

    ``normalized`` asserts logSumExp(logp) == 0 within 1e-6; constructors that
    set it are responsible for making it true.
    """

    logp: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "logp", _freeze(self.logp))
        if self.logp.ndim != 1 or self.logp.shape[0] < 1:
            raise ValueError("logp must be a non-empty 1-d vector")

    @property
    def vocab_size(self) -> int:
        return int(self.logp.shape[0])

    def probs(self) -> np.ndarray:
        out = np.exp(self.logp)
        out.flags.writeable = False
        return out

    def argmax(self) -> int:
        # np.argmax returns the lowest index on ties.
        return int(np.argmax(self.logp))


@dataclass
class Rng:
    """Deterministic, explicitly-seeded random stream (no global RNG).

    Same seed gives the identical sample stream across runs and platforms.
    Single-owner: never share one Rng between concurrent sessions.
    """

    seed: int
    algorithm: str = "pcg64"
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.algorithm != "pcg64":
            raise ValueError(f"unknown rng algorithm: {self.algorithm!r}")
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self) -> float:
        return float(self._gen.random())


def log_sum_exp(values: np.ndarray | list[float]) -> float:
    """log(sum(exp(values))), max-shifted; exact for a single element."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptySupport("log_sum_exp of an empty vector")
    if arr.size == 1:
        v = float(arr[0])
        if v == NEG_INF:
            raise EmptySupport("log_sum_exp: no finite entries")
        return v
    out = _kernels.logsumexp(np.ascontiguousarray(arr))
    if out == NEG_INF:
        raise EmptySupport("log_sum_exp: no finite entries")
    return out


def normalize(d: TokenDist) -> TokenDist:
    """Shift logp so the distribution sums to one; argmax is preserved."""
    lse = _kernels.logsumexp(d.logp)
    if lse == NEG_INF:
        raise EmptySupport("normalize: all tokens excluded")
    return TokenDist(d.logp - lse, normalized=True)


def truncate_top_k(d: TokenDist, k: int) -> TokenDist:
    """Keep the k most probable tokens (ties broken toward lower index)."""
    if not d.normalized:
        raise ValueError("truncate requires a normalized distribution")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= d.vocab_size:
        return normalize(d)
    # Stable sort on the negated vector keeps the lower index first on ties.
    order = np.argsort(-d.logp, kind="stable")
    keep = order[:k]
    logp = np.full(d.vocab_size, NEG_INF)
    logp[keep] = d.logp[keep]
    return normalize(TokenDist(logp))


def truncate_top_p(d: TokenDist, p: float) -> TokenDist:
    """Nucleus truncation: smallest probability-sorted prefix with mass >= p.

    The token at the cumulative boundary is always included, guaranteeing the
    kept mass reaches p even when the boundary lands inside that token.
    """
    if not d.normalized:
        raise ValueError("truncate requires a normalized distribution")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must be in (0, 1]")
    order = np.argsort(-d.logp, kind="stable")
    probs = np.exp(d.logp[order])
    cum = np.cumsum(probs)
    cut = int(np.searchsorted(cum, p, side="left"))
    cut = min(cut, d.vocab_size - 1)
    keep = order[: cut + 1]
    logp = np.full(d.vocab_size, NEG_INF)
    logp[keep] = d.logp[keep]
    return normalize(TokenDist(logp))


def draw(d: TokenDist, rng: Rng) -> int:
    """Sample a token index; ties in the CDF break toward the lower index."""
    if not d.normalized:
        raise ValueError("draw requires a normalized distribution")
    probs = np.exp(d.logp)
    if not np.any(probs > 0.0):
        raise EmptySupport("draw: all tokens excluded")
    cdf = np.cumsum(probs)
    u = rng.uniform() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="left"))
    idx = min(idx, d.vocab_size - 1)
    # u can land exactly on a zero-probability step (measure-zero); never
    # return an excluded token.
    while probs[idx] == 0.0:
        idx += 1
    return idx
