"""Pragmatic controlled decoding over pluggable language-model backends."""

from pragdec.backend import (
    Backend,
    Context,
    EmptyCorpus,
    NGramModel,
    ProtocolViolation,
    RemoteBackend,
    RemoteError,
    RemoteUnavailable,
    conditional_ppl,
    load_corpus,
    score_sequence,
    train_ngram,
)
from pragdec.decoding import (
    DecodeConfig,
    DecodedSequence,
    DecodeTrace,
    RerankResult,
    TraceStep,
    decode,
    decode_uncontrolled,
    export_trace,
    rerank_samples,
    trace_from_json,
)
from pragdec.engine import (
    Attribute,
    AttributeFrame,
    BeliefState,
    DegenerateEvidence,
    FrameError,
    RationalityConfig,
    StepOutcome,
    UnsupportedDepth,
    adaptive_alpha,
    deepen,
    fold_belief,
    frame_from_config,
    l1_step,
    load_frame,
    rsa_step,
    s0_next_all,
    s1_combine,
    s1_score_sequence,
    sequence_target_posterior,
    target_posterior_per_token,
    uniform_belief,
)
from pragdec.metrics import (
    EmptyText,
    LabeledExample,
    PairExample,
    ReadabilityReport,
    TooShort,
    accuracy,
    classify,
    load_familiar_words,
    ngram_novelty,
    pairwise_bias_score,
    readability,
    rouge_l,
)
from pragdec.probcore import (
    NEG_INF,
    EmptySupport,
    Rng,
    TokenDist,
    draw,
    log_sum_exp,
    normalize,
    truncate_top_k,
    truncate_top_p,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # probability core
    "TokenDist", "Rng", "NEG_INF", "EmptySupport", "log_sum_exp", "normalize",
    "truncate_top_k", "truncate_top_p", "draw",
    # backends
    "Backend", "Context", "NGramModel", "train_ngram", "load_corpus",
    "EmptyCorpus", "RemoteBackend", "RemoteError", "RemoteUnavailable",
    "ProtocolViolation", "score_sequence", "conditional_ppl",
    # engine
    "Attribute", "AttributeFrame", "FrameError", "BeliefState",
    "RationalityConfig", "StepOutcome", "DegenerateEvidence",
    "UnsupportedDepth", "uniform_belief", "frame_from_config", "load_frame",
    "s0_next_all", "l1_step", "fold_belief", "sequence_target_posterior",
    "target_posterior_per_token", "s1_combine", "adaptive_alpha", "rsa_step",
    "deepen", "s1_score_sequence",
    # decoding
    "DecodeConfig", "DecodedSequence", "DecodeTrace", "TraceStep",
    "RerankResult", "decode", "decode_uncontrolled", "rerank_samples",
    "export_trace", "trace_from_json",
    # metrics
    "ReadabilityReport", "LabeledExample", "PairExample", "EmptyText",
    "TooShort", "readability", "load_familiar_words", "rouge_l",
    "ngram_novelty", "classify", "accuracy", "pairwise_bias_score",
]
