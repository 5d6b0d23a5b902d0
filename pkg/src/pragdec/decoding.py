"""Incremental decoding strategies over the controlled step: greedy, beam,
and nucleus, plus the sample-then-select reranker and trace export.

A decode session owns its belief state per hypothesis; beam hypotheses carry
divergent beliefs. Scores are cumulative natural-log probabilities under each
step's selection distribution before any truncation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from pragdec.backend.base import Backend, Context
from pragdec.engine import (
    AttributeFrame,
    BeliefState,
    RationalityConfig,
    _deepen_parts,
    l1_step,
    rsa_step,
    sequence_target_posterior,
    uniform_belief,
)
from pragdec.probcore import Rng, TokenDist, draw, truncate_top_p

STRATEGIES = ("greedy", "beam", "nucleus")


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str = "greedy"
    beam_size: int = 3
    p: float = 0.9
    max_new_tokens: int = 20
    seed: int = 0
    stop_tokens: frozenset[int] | None = None  # None: the backend's EOS
    length_normalization: bool = False

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


@dataclass(frozen=True)
class TraceStep:
    step: int
    token_id: int
    token_text: str
    alpha_used: float
    r_c: float
    r_a: float
    posterior: tuple[float, ...]  # listener belief after observing the token
    support_size: int  # finite-support size of the distribution drawn from


@dataclass(frozen=True)
class DecodeTrace:
    attribute_names: tuple[str, ...]
    steps: tuple[TraceStep, ...]


@dataclass(frozen=True)
class DecodedSequence:
    tokens: tuple[int, ...]
    score: float
    trace: DecodeTrace
    zero_length: bool  # stopped before emitting any non-stop token


# -- per-step drive: controlled (depth 1 or 2) or raw backend ------------------


@dataclass
class _StepEval:
    sel_dist: TokenDist
    alpha_used: float
    r_c: float
    r_a: float
    outer_evidence: tuple[TokenDist, ...]
    inner_evidence: tuple[TokenDist, ...]


class _Driver:
    def __init__(
        self,
        backend: Backend,
        frame: AttributeFrame | None,
        rationality: RationalityConfig | None,
    ) -> None:
        if (frame is None) != (rationality is None):
            raise ValueError("frame and rationality go together")
        self.backend = backend
        self.frame = frame
        self.rat = rationality
        self.depth2 = rationality is not None and rationality.recursion_depth == 2

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return self.frame.names if self.frame is not None else ()

    def initial_beliefs(self) -> tuple[BeliefState, ...]:
        if self.frame is None:
            return ()
        start = uniform_belief(self.frame.size)
        if self.depth2:
            return (start,) * (self.frame.size + 1)
        return (start,)

    def step(self, ctx: Context, beliefs: tuple[BeliefState, ...]) -> _StepEval:
        if self.frame is None:
            dist = self.backend.next_dist(ctx)
            return _StepEval(dist, 0.0, 1.0, 1.0, (), ())
        assert self.rat is not None
        if self.depth2:
            parts = _deepen_parts(self.backend, self.frame, ctx, beliefs, self.rat)
            return _StepEval(
                parts.s2_dist, self.rat.alpha0, 1.0, 1.0, parts.s1_dists, parts.s0_dists
            )
        out = rsa_step(self.backend, self.frame, ctx, beliefs[0], self.rat)
        assert self.rat.alpha0 <= out.alpha_used <= self.rat.alpha_max
        return _StepEval(
            out.s1_dist, out.alpha_used, out.r_c, out.r_a, out.s0_dists, ()
        )

    def advance(
        self, beliefs: tuple[BeliefState, ...], ev: _StepEval, token: int
    ) -> tuple[BeliefState, ...]:
        if self.frame is None:
            return ()
        if self.depth2:
            outer = l1_step(beliefs[0], ev.outer_evidence, token)
            inners = tuple(
                l1_step(b, ev.inner_evidence, token) for b in beliefs[1:]
            )
            return (outer, *inners)
        return (l1_step(beliefs[0], ev.outer_evidence, token),)


def _posterior_tuple(beliefs: tuple[BeliefState, ...]) -> tuple[float, ...]:
    if not beliefs:
        return ()
    return tuple(float(x) for x in beliefs[0].posterior())


def _support_size(dist: TokenDist) -> int:
    return int(np.isfinite(dist.logp).sum())


# -- strategies -----------------------------------------------------------------


def _run_sequential(
    driver: _Driver, content_ctx: Context, cfg: DecodeConfig, stop: frozenset[int], rng: Rng | None
) -> DecodedSequence:
    """Greedy and nucleus share this loop; nucleus passes the session rng."""
    ctx = content_ctx
    beliefs = driver.initial_beliefs()
    score = 0.0
    steps: list[TraceStep] = []
    tokens: list[int] = []
    for step_i in range(cfg.max_new_tokens):
        ev = driver.step(ctx, beliefs)
        if cfg.strategy == "nucleus":
            assert rng is not None
            pick_dist = truncate_top_p(ev.sel_dist, cfg.p)
            token = draw(pick_dist, rng)
        else:
            pick_dist = ev.sel_dist
            token = ev.sel_dist.argmax()
        score += float(ev.sel_dist.logp[token])
        beliefs = driver.advance(beliefs, ev, token)
        tokens.append(token)
        steps.append(
            TraceStep(
                step=step_i,
                token_id=token,
                token_text=driver.backend.token_text(token),
                alpha_used=ev.alpha_used,
                r_c=ev.r_c,
                r_a=ev.r_a,
                posterior=_posterior_tuple(beliefs),
                support_size=_support_size(pick_dist),
            )
        )
        ctx = ctx.extended(token)
        if token in stop:
            break
    trace = DecodeTrace(attribute_names=driver.attribute_names, steps=tuple(steps))
    zero = all(t in stop for t in tokens)
    return DecodedSequence(tokens=tuple(tokens), score=score, trace=trace, zero_length=zero)


@dataclass
class _Hyp:
    ctx: Context
    beliefs: tuple[BeliefState, ...]
    tokens: tuple[int, ...]
    score: float
    steps: tuple[TraceStep, ...]
    finished: bool


def _rank_key(cfg: DecodeConfig, h: _Hyp) -> float:
    if cfg.length_normalization and h.tokens:
        return h.score / len(h.tokens)
    return h.score


def _run_beam(
    driver: _Driver, content_ctx: Context, cfg: DecodeConfig, stop: frozenset[int]
) -> list[DecodedSequence]:
    width = cfg.beam_size
    active = [
        _Hyp(
            ctx=content_ctx,
            beliefs=driver.initial_beliefs(),
            tokens=(),
            score=0.0,
            steps=(),
            finished=False,
        )
    ]
    finished: list[_Hyp] = []
    for step_i in range(cfg.max_new_tokens):
        if not active:
            break
        # per-hypothesis top-width extensions suffice for the global top-width
        candidates: list[tuple[float, int, int]] = []  # (new score, hyp idx, token)
        evals: list[_StepEval] = []
        for hi, hyp in enumerate(active):
            ev = driver.step(hyp.ctx, hyp.beliefs)
            evals.append(ev)
            logp = ev.sel_dist.logp
            order = np.argsort(-logp, kind="stable")[:width]
            for t in order:
                if logp[t] == -np.inf:
                    continue
                candidates.append((hyp.score + float(logp[t]), hi, int(t)))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        next_active: list[_Hyp] = []
        for new_score, hi, token in candidates[:width]:
            hyp, ev = active[hi], evals[hi]
            beliefs = driver.advance(hyp.beliefs, ev, token)
            step = TraceStep(
                step=step_i,
                token_id=token,
                token_text=driver.backend.token_text(token),
                alpha_used=ev.alpha_used,
                r_c=ev.r_c,
                r_a=ev.r_a,
                posterior=_posterior_tuple(beliefs),
                support_size=_support_size(ev.sel_dist),
            )
            new_hyp = _Hyp(
                ctx=hyp.ctx.extended(token),
                beliefs=beliefs,
                tokens=hyp.tokens + (token,),
                score=new_score,
                steps=hyp.steps + (step,),
                finished=token in stop,
            )
            if new_hyp.finished:
                finished.append(new_hyp)
            else:
                next_active.append(new_hyp)
        active = next_active
        # scores only decrease with length, so once the best width finished
        # hypotheses beat every active one the search cannot improve
        if len(finished) >= width and active:
            floor = sorted((_rank_key(cfg, f) for f in finished), reverse=True)[width - 1]
            if max(_rank_key(cfg, h) for h in active) <= floor:
                break
    pool = finished + active
    pool.sort(key=lambda h: -_rank_key(cfg, h))
    out: list[DecodedSequence] = []
    for hyp in pool[:width]:
        trace = DecodeTrace(attribute_names=driver.attribute_names, steps=hyp.steps)
        zero = all(t in stop for t in hyp.tokens)
        out.append(
            DecodedSequence(tokens=hyp.tokens, score=hyp.score, trace=trace, zero_length=zero)
        )
    return out


def _run(driver: _Driver, content_ctx: Context, cfg: DecodeConfig) -> list[DecodedSequence]:
    stop = cfg.stop_tokens
    if stop is None:
        stop = frozenset({driver.backend.eos_id})
    if cfg.strategy == "beam":
        return _run_beam(driver, content_ctx, cfg, stop)
    rng = Rng(cfg.seed) if cfg.strategy == "nucleus" else None
    return [_run_sequential(driver, content_ctx, cfg, stop, rng)]


def decode(
    backend: Backend,
    frame: AttributeFrame,
    content_ctx: Context,
    rationality: RationalityConfig,
    cfg: DecodeConfig,
) -> list[DecodedSequence]:
    """Controlled decode. Returns hypotheses best-first (one for greedy and
    nucleus, up to beam_size for beam), each with its own step trace."""
    return _run(_Driver(backend, frame, rationality), content_ctx, cfg)


def decode_uncontrolled(
    backend: Backend, content_ctx: Context, cfg: DecodeConfig
) -> list[DecodedSequence]:
    """Raw backend decode with the same strategies and conventions."""
    return _run(_Driver(backend, None, None), content_ctx, cfg)


# -- sample-then-select --------------------------------------------------------


@dataclass(frozen=True)
class RerankResult:
    samples: tuple[DecodedSequence, ...]
    posteriors: tuple[float, ...]
    best_index: int

    @property
    def best(self) -> DecodedSequence:
        return self.samples[self.best_index]


def rerank_samples(
    backend: Backend,
    frame: AttributeFrame,
    content_ctx: Context,
    n: int,
    cfg: DecodeConfig,
) -> RerankResult:
    """Draw n uncontrolled samples, score each by the listener's final target
    posterior, keep the argmax (ties go to the earliest draw).

    All n samples share one rng stream in draw order, so growing n keeps the
    earlier samples identical.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if cfg.strategy != "nucleus":
        raise ValueError("rerank_samples needs a sampling strategy (nucleus)")
    stop = cfg.stop_tokens
    if stop is None:
        stop = frozenset({backend.eos_id})
    driver = _Driver(backend, None, None)
    rng = Rng(cfg.seed)
    samples = tuple(
        _run_sequential(driver, content_ctx, cfg, stop, rng) for _ in range(n)
    )
    posteriors = tuple(
        sequence_target_posterior(backend, frame, s.tokens) for s in samples
    )
    best = 0
    for i, p in enumerate(posteriors):
        if p > posteriors[best]:
            best = i
    return RerankResult(samples=samples, posteriors=posteriors, best_index=best)


# -- trace export ---------------------------------------------------------------


def export_trace(trace: DecodeTrace, format: str) -> bytes:
    """Serialize a trace: 'tsv' for eyeballing (fixed columns, one posterior
    column per attribute), 'json' for lossless round-trips."""
    if format == "tsv":
        header = ["step", "token_text", "token_id", "alpha_used", "r_c", "r_a"]
        header.extend(trace.attribute_names)
        lines = ["\t".join(header)]
        for s in trace.steps:
            row = [
                str(s.step),
                s.token_text,
                str(s.token_id),
                repr(s.alpha_used),
                repr(s.r_c),
                repr(s.r_a),
            ]
            row.extend(repr(p) for p in s.posterior)
            lines.append("\t".join(row))
        return ("\n".join(lines) + "\n").encode("utf-8")
    if format == "json":
        payload = {
            "attribute_names": list(trace.attribute_names),
            "steps": [
                {
                    "step": s.step,
                    "token_id": s.token_id,
                    "token_text": s.token_text,
                    "alpha_used": s.alpha_used,
                    "r_c": s.r_c,
                    "r_a": s.r_a,
                    "posterior": list(s.posterior),
                    "support_size": s.support_size,
                }
                for s in trace.steps
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2).encode("utf-8")
    raise ValueError(f"unknown trace format {format!r}")


def trace_from_json(data: bytes | str) -> DecodeTrace:
    payload = json.loads(data)
    steps = tuple(
        TraceStep(
            step=s["step"],
            token_id=s["token_id"],
            token_text=s["token_text"],
            alpha_used=s["alpha_used"],
            r_c=s["r_c"],
            r_a=s["r_a"],
            posterior=tuple(s["posterior"]),
            support_size=s["support_size"],
        )
        for s in payload["steps"]
    )
    return DecodeTrace(attribute_names=tuple(payload["attribute_names"]), steps=steps)
