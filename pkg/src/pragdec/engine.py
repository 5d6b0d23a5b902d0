"""Pragmatic decoding core: literal speaker, incremental Bayesian listener,
and the controlled speaker that reweights content by the listener's posterior.

All distributions live in natural-log domain. The listener's belief is
per-decode-hypothesis state; nothing here is global or mutated in place.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from pragdec import _kernels
from pragdec.backend.base import Backend, Context
from pragdec.probcore import EmptySupport, TokenDist, log_sum_exp

CONTENT_PLACEHOLDER = "{content}"


class FrameError(ValueError):
    """Attribute frame config rejected at validation."""


class DegenerateEvidence(EmptySupport):
    """Observed token has zero probability under every attribute's speaker."""


class UnsupportedDepth(ValueError):
    """Recursion depth outside the implemented range (1 or 2)."""


# -- attribute frames ---------------------------------------------------------


@dataclass(frozen=True)
class Attribute:
    name: str
    prompt: tuple[int, ...]
    role: str  # "target" or "distractor"


@dataclass(frozen=True)
class AttributeFrame:
    """One target attribute plus at least one distractor, each with a
    content-free control-prompt token sequence."""

    attributes: tuple[Attribute, ...]

    def __post_init__(self) -> None:
        if len(self.attributes) < 2:
            raise FrameError("frame needs a target and at least one distractor")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise FrameError("attribute names must be unique")
        targets = [a for a in self.attributes if a.role == "target"]
        if len(targets) != 1:
            raise FrameError("frame must have exactly one target attribute")
        for a in self.attributes:
            if a.role not in ("target", "distractor"):
                raise FrameError(f"unknown role {a.role!r} for attribute {a.name!r}")
            if not a.name:
                raise FrameError("attribute names must be non-empty")
            if len(a.prompt) == 0:
                raise FrameError(f"attribute {a.name!r} has an empty prompt")

    @property
    def size(self) -> int:
        return len(self.attributes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def target_index(self) -> int:
        for i, a in enumerate(self.attributes):
            if a.role == "target":
                return i
        raise FrameError("no target attribute")  # unreachable after validation

    @property
    def target_name(self) -> str:
        return self.attributes[self.target_index].name


def frame_from_config(
    config: dict,
    backend: Backend,
    *,
    content_text: str | None = None,
    allow_content_placeholder: bool = False,
) -> AttributeFrame:
    """Build a frame from {"attributes": [{name, prompt, role}, ...]}.

    Prompts are text, tokenized by the backend. Control prompts are
    content-free by design; a literal "{content}" placeholder is rejected
    unless ``allow_content_placeholder`` is set, in which case it is replaced
    by ``content_text`` (the conditional-independence ablation).
    """
    entries = config.get("attributes")
    if not isinstance(entries, list) or not entries:
        raise FrameError("config lacks a non-empty 'attributes' list")
    attrs: list[Attribute] = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise FrameError("each attribute must be an object")
        try:
            name, prompt, role = entry["name"], entry["prompt"], entry["role"]
        except KeyError as exc:
            raise FrameError(f"attribute missing field {exc.args[0]!r}") from exc
        if not isinstance(prompt, str):
            raise FrameError(f"attribute {name!r} prompt must be a string")
        if CONTENT_PLACEHOLDER in prompt:
            if not allow_content_placeholder:
                raise FrameError(
                    f"attribute {name!r} prompt embeds {CONTENT_PLACEHOLDER!r}; "
                    "control prompts are content-free unless the ablation flag is set"
                )
            if content_text is None:
                raise FrameError("content placeholder used but no content_text given")
            prompt = prompt.replace(CONTENT_PLACEHOLDER, content_text)
        ids = tuple(backend.tokenize(prompt))
        if not ids:
            raise FrameError(f"attribute {name!r} prompt tokenizes to nothing")
        attrs.append(Attribute(name=str(name), prompt=ids, role=str(role)))
    return AttributeFrame(attributes=tuple(attrs))


def load_frame(path: str, backend: Backend, **kwargs) -> AttributeFrame:
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    return frame_from_config(config, backend, **kwargs)


# -- listener belief ----------------------------------------------------------


@dataclass(frozen=True)
class BeliefState:
    """Log posterior over the frame's attributes; always normalized."""

    log_posterior: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.log_posterior, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "log_posterior", arr)
        total = _kernels.logsumexp(arr)
        if not abs(total) <= 1e-9:
            raise ValueError(f"belief not normalized: logSumExp = {total!r}")

    @property
    def size(self) -> int:
        return int(self.log_posterior.shape[0])

    def posterior(self) -> np.ndarray:
        return np.exp(self.log_posterior)

    def prob(self, index: int) -> float:
        return float(np.exp(self.log_posterior[index]))


def uniform_belief(size: int) -> BeliefState:
    if size < 1:
        raise ValueError("belief needs at least one attribute")
    return BeliefState(np.full(size, -math.log(size)))


# -- rationality --------------------------------------------------------------


@dataclass(frozen=True)
class RationalityConfig:
    """Control strength: fixed alpha0, or per-step alpha in
    [alpha0, alpha0 + alpha1] set by the content/attribute ratios."""

    alpha0: float
    alpha1: float = 0.0
    mode: str = "fixed"  # "fixed" or "adaptive"; fixed ignores alpha1
    top_m: int = 5
    recursion_depth: int = 1
    inner_alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha0 < 0 or self.alpha1 < 0 or self.inner_alpha < 0:
            raise ValueError("rationality exponents must be >= 0")
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.top_m < 1:
            raise ValueError("top_m must be >= 1")
        if self.recursion_depth < 1:
            raise ValueError("recursion_depth must be >= 1")

    @property
    def alpha_max(self) -> float:
        return self.alpha0 + (self.alpha1 if self.mode == "adaptive" else 0.0)


@dataclass(frozen=True)
class StepOutcome:
    s1_dist: TokenDist
    alpha_used: float
    r_c: float
    r_a: float
    per_token_target_logposterior: np.ndarray
    # extras so a decoder can advance beliefs without re-querying the backend
    content_dist: TokenDist = field(repr=False, default=None)  # type: ignore[assignment]
    s0_dists: tuple[TokenDist, ...] = field(repr=False, default=())


# -- core operations ----------------------------------------------------------


def s0_next_all(
    backend: Backend, frame: AttributeFrame, generated: Sequence[int]
) -> list[TokenDist]:
    """Literal-speaker next-token distributions, one per attribute: the
    backend conditioned on each attribute's control prompt plus the shared
    generated tokens."""
    gen = tuple(generated)
    ctxs = [Context(prompt_tokens=a.prompt, generated_tokens=gen) for a in frame.attributes]
    return backend.next_dist_batch(ctxs)


def l1_step(
    belief: BeliefState, s0_dists: Sequence[TokenDist], observed_token: int
) -> BeliefState:
    """One Bayes update of the listener after seeing a token."""
    if len(s0_dists) != belief.size:
        raise ValueError("belief/attribute count mismatch")
    evidence = np.array([d.logp[observed_token] for d in s0_dists], dtype=np.float64)
    joint = belief.log_posterior + evidence
    try:
        total = log_sum_exp(joint)
    except EmptySupport as exc:
        raise DegenerateEvidence(
            f"token {observed_token} impossible under every attribute speaker"
        ) from exc
    return BeliefState(joint - total)


def fold_belief(
    backend: Backend, frame: AttributeFrame, tokens: Sequence[int]
) -> BeliefState:
    """Fold l1_step over a whole sequence from the uniform prior."""
    belief = uniform_belief(frame.size)
    toks = list(tokens)
    for i, tok in enumerate(toks):
        s0 = s0_next_all(backend, frame, toks[:i])
        belief = l1_step(belief, s0, tok)
    return belief


def sequence_target_posterior(
    backend: Backend, frame: AttributeFrame, tokens: Sequence[int]
) -> float:
    """Final listener probability of the target attribute after the sequence."""
    return fold_belief(backend, frame, tokens).prob(frame.target_index)


def s1_score_sequence(
    backend: Backend,
    frame: AttributeFrame,
    content_ctx: Context,
    cfg: RationalityConfig,
    tokens: Sequence[int],
) -> float:
    """Cumulative log probability of a fixed sequence under the controlled
    speaker, advancing the listener's belief with each scored token."""
    if not tokens:
        raise ValueError("tokens must be non-empty")
    belief = uniform_belief(frame.size)
    ctx = content_ctx
    total = 0.0
    for tok in tokens:
        out = rsa_step(backend, frame, ctx, belief, cfg)
        total += float(out.s1_dist.logp[tok])
        belief = l1_step(belief, out.s0_dists, tok)
        ctx = ctx.extended(tok)
    return total


def target_posterior_per_token(
    belief: BeliefState, s0_dists: Sequence[TokenDist], target_index: int
) -> np.ndarray:
    """Hypothetical next-step log posterior of the target, for every candidate
    token at once. Column v equals l1_step(belief, s0_dists, v) at the target;
    tokens impossible under every attribute get NEG_INF."""
    stacked = np.stack([d.logp for d in s0_dists])
    return _kernels.per_token_target_logpost(stacked, belief.log_posterior, target_index)


def s1_combine(
    content_dist: TokenDist, target_logposterior_per_token: np.ndarray, alpha: float
) -> TokenDist:
    """Controlled speaker: content log-prob plus alpha times the target's
    per-token log posterior, renormalized. alpha = 0 returns the content
    distribution untouched so the no-control path is bit-exact."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0.0 and content_dist.normalized:
        return content_dist
    combined = _kernels.combine_and_normalize(
        content_dist.logp, np.asarray(target_logposterior_per_token), alpha
    )
    if not np.isfinite(combined).any():
        raise EmptySupport("every token excluded after combination")
    return TokenDist(combined, normalized=True)


def _top_m_indices(logp: np.ndarray, m: int) -> np.ndarray:
    # stable sort: ties keep the lower token index, matching greedy/argmax
    order = np.argsort(-logp, kind="stable")
    return order[: min(m, logp.shape[0])]


def _adaptive_from(
    content_dist: TokenDist,
    target_logposterior_per_token: np.ndarray,
    cfg: RationalityConfig,
) -> tuple[float, float, float]:
    controlled = s1_combine(content_dist, target_logposterior_per_token, cfg.alpha0)
    top_plain = _top_m_indices(content_dist.logp, cfg.top_m)
    top_ctrl = _top_m_indices(controlled.logp, cfg.top_m)
    content_p = np.exp(content_dist.logp)
    target_p = np.exp(target_logposterior_per_token)

    num_c = float(content_p[top_ctrl].mean())
    den_c = float(content_p[top_plain].mean())
    r_c = num_c / den_c if den_c > 0 else 1.0
    num_a = float(target_p[top_ctrl].mean())
    den_a = float(target_p[top_plain].mean())
    if den_a > 0:
        r_a = num_a / den_a
    else:
        r_a = math.inf if num_a > 0 else 1.0

    r_c = min(r_c, 1.0)
    r_a = max(r_a, 1.0)
    alpha = cfg.alpha0 + (r_c / r_a) * cfg.alpha1
    alpha = min(max(alpha, cfg.alpha0), cfg.alpha0 + cfg.alpha1)
    return alpha, r_c, r_a


def adaptive_alpha(
    backend: Backend,
    frame: AttributeFrame,
    content_ctx: Context,
    belief: BeliefState,
    cfg: RationalityConfig,
) -> tuple[float, float, float]:
    """Per-step control strength from two ratios over simulated candidates:
    content consistency r_c (how much content probability the controlled top-m
    keeps) and attribute recognizability r_a (how much target posterior it
    gains). Returns (alpha, r_c, r_a) with alpha in [alpha0, alpha0+alpha1]."""
    if cfg.mode != "adaptive":
        raise ValueError("adaptive_alpha requires mode='adaptive'")
    dists = backend.next_dist_batch(
        [content_ctx]
        + [Context(a.prompt, content_ctx.generated_tokens) for a in frame.attributes]
    )
    tlp = target_posterior_per_token(belief, dists[1:], frame.target_index)
    return _adaptive_from(dists[0], tlp, cfg)


def rsa_step(
    backend: Backend,
    frame: AttributeFrame,
    content_ctx: Context,
    belief: BeliefState,
    cfg: RationalityConfig,
) -> StepOutcome:
    """One full controlled step. Issues the content and all attribute-prompt
    evaluations as a single backend batch; does not advance the belief (the
    caller does that with l1_step once a token is chosen)."""
    ctxs = [content_ctx] + [
        Context(a.prompt, content_ctx.generated_tokens) for a in frame.attributes
    ]
    dists = backend.next_dist_batch(ctxs)
    content_dist, s0_dists = dists[0], list(dists[1:])
    tlp = target_posterior_per_token(belief, s0_dists, frame.target_index)
    if cfg.mode == "adaptive":
        alpha, r_c, r_a = _adaptive_from(content_dist, tlp, cfg)
    else:
        alpha, r_c, r_a = cfg.alpha0, 1.0, 1.0
    s1 = s1_combine(content_dist, tlp, alpha)
    return StepOutcome(
        s1_dist=s1,
        alpha_used=alpha,
        r_c=r_c,
        r_a=r_a,
        per_token_target_logposterior=tlp,
        content_dist=content_dist,
        s0_dists=tuple(s0_dists),
    )


# -- depth-2 recursion ---------------------------------------------------------


@dataclass(frozen=True)
class DeepStepOutcome:
    s2_dist: TokenDist
    content_dist: TokenDist
    s0_dists: tuple[TokenDist, ...]
    s1_dists: tuple[TokenDist, ...]


def _deepen_parts(
    backend: Backend,
    frame: AttributeFrame,
    content_ctx: Context,
    beliefs: Sequence[BeliefState],
    cfg: RationalityConfig,
) -> DeepStepOutcome:
    if cfg.recursion_depth != 2:
        raise UnsupportedDepth(
            f"recursion depth {cfg.recursion_depth} not supported (only 1 or 2)"
        )
    if cfg.mode != "fixed":
        raise ValueError("depth-2 recursion runs in fixed mode only")
    k = frame.size
    if len(beliefs) != k + 1:
        raise ValueError("beliefs must be [outer] + one inner state per attribute")
    outer, inner = beliefs[0], beliefs[1:]
    if outer.size != k or any(b.size != k for b in inner):
        raise ValueError("belief size must equal the attribute count")

    ctxs = [content_ctx] + [
        Context(a.prompt, content_ctx.generated_tokens) for a in frame.attributes
    ]
    dists = backend.next_dist_batch(ctxs)
    content_dist, s0_dists = dists[0], list(dists[1:])

    # inner speakers: each attribute plays target at the fixed inner exponent
    s1_dists = []
    for i in range(k):
        tlp_i = target_posterior_per_token(inner[i], s0_dists, i)
        s1_dists.append(s1_combine(s0_dists[i], tlp_i, cfg.inner_alpha))

    # outer listener reasons about the inner speakers; outer speaker is fixed-mode
    l2_tlp = target_posterior_per_token(outer, s1_dists, frame.target_index)
    s2 = s1_combine(content_dist, l2_tlp, cfg.alpha0)
    return DeepStepOutcome(
        s2_dist=s2,
        content_dist=content_dist,
        s0_dists=tuple(s0_dists),
        s1_dists=tuple(s1_dists),
    )


def deepen(
    backend: Backend,
    frame: AttributeFrame,
    content_ctx: Context,
    beliefs: Sequence[BeliefState],
    cfg: RationalityConfig,
) -> TokenDist:
    """Second-order step: per-attribute inner speakers at cfg.inner_alpha, an
    outer listener over them, and an outer speaker at fixed cfg.alpha0.

    ``beliefs`` is [outer listener] + one inner listener per attribute, all
    advanced by the caller after each emitted token (outer over the inner
    speakers' dists, inner over the literal speakers').
    """
    return _deepen_parts(backend, frame, content_ctx, beliefs, cfg).s2_dist
