"""Command-line surface: train a model, generate controlled text, run the
evaluation protocols. One JSON config file per run; flags override config.

Reports are deterministic JSON (sorted keys, no timestamps) so identical runs
are byte-identical. stdout carries results only; diagnostics go to stderr.

Exit codes: 2 unreadable or malformed data, 3 write failure, 4 backend
failure, 5 invalid attribute frame.
"""

from __future__ import annotations

import hashlib
import json
import sys

import click

from pragdec.backend.base import Backend, Context, conditional_ppl
from pragdec.backend.ngram import BOS, EmptyCorpus, NGramModel, load_corpus, train_ngram
from pragdec.backend.remote import RemoteBackend, RemoteError
from pragdec.decoding import (
    DecodeConfig,
    decode,
    decode_uncontrolled,
    export_trace,
    rerank_samples,
)
from pragdec.engine import (
    AttributeFrame,
    FrameError,
    RationalityConfig,
    frame_from_config,
    load_frame,
)
from pragdec.metrics import (
    EmptyText,
    accuracy,
    load_familiar_words,
    load_labeled_tsv,
    load_pairs_tsv,
    pairwise_bias_score,
    readability,
)

EXIT_BAD_DATA = 2
EXIT_WRITE_FAILURE = 3
EXIT_BACKEND_FAILURE = 4
EXIT_BAD_FRAME = 5

SCHEMA_VERSION = 1


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    raise SystemExit(code)


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        _fail(EXIT_BAD_DATA, f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_BAD_DATA, f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        _fail(EXIT_BAD_DATA, "config must be a JSON object")
    return cfg


def _config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _build_backend(cfg: dict) -> Backend:
    spec = cfg.get("backend")
    if not isinstance(spec, dict) or "kind" not in spec:
        _fail(EXIT_BAD_DATA, "config needs backend.kind")
    kind = spec["kind"]
    if kind == "ngram":
        path = spec.get("model_path")
        if not path:
            _fail(EXIT_BAD_DATA, "ngram backend needs backend.model_path")
        try:
            return NGramModel.load(path)
        except OSError as exc:
            _fail(EXIT_BAD_DATA, f"cannot read model: {exc}")
        except ValueError as exc:
            _fail(EXIT_BAD_DATA, f"bad model file: {exc}")
    if kind == "remote":
        base_url = spec.get("base_url")
        if not base_url:
            _fail(EXIT_BAD_DATA, "remote backend needs backend.base_url")
        return RemoteBackend(
            base_url=base_url,
            model=spec.get("model"),
            timeout=float(spec.get("timeout", 30.0)),
        )
    _fail(EXIT_BAD_DATA, f"unknown backend kind {kind!r}")
    raise AssertionError  # unreachable


def _build_frame(cfg: dict, backend: Backend) -> AttributeFrame:
    spec = cfg.get("frame")
    if not isinstance(spec, dict):
        _fail(EXIT_BAD_FRAME, "config needs a frame object")
    allow = bool(spec.get("allow_content_placeholder", False))
    content_text = spec.get("content_text")
    try:
        if "path" in spec:
            return load_frame(
                spec["path"], backend,
                content_text=content_text, allow_content_placeholder=allow,
            )
        return frame_from_config(
            spec, backend, content_text=content_text, allow_content_placeholder=allow
        )
    except OSError as exc:
        _fail(EXIT_BAD_FRAME, f"cannot read frame: {exc}")
    except (FrameError, json.JSONDecodeError) as exc:
        _fail(EXIT_BAD_FRAME, f"invalid frame: {exc}")
    raise AssertionError  # unreachable


def _build_rationality(cfg: dict, overrides: dict) -> RationalityConfig:
    spec = dict(cfg.get("rationality", {}))
    spec.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RationalityConfig(
            alpha0=float(spec.get("alpha0", 0.0)),
            alpha1=float(spec.get("alpha1", 0.0)),
            mode=str(spec.get("mode", "fixed")),
            top_m=int(spec.get("top_m", 5)),
            recursion_depth=int(spec.get("recursion_depth", 1)),
            inner_alpha=float(spec.get("inner_alpha", 0.0)),
        )
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, f"bad rationality config: {exc}")
    raise AssertionError  # unreachable


def _build_decode(cfg: dict, overrides: dict) -> DecodeConfig:
    spec = dict(cfg.get("decode", {}))
    spec.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return DecodeConfig(
            strategy=str(spec.get("strategy", "greedy")),
            beam_size=int(spec.get("beam_size", 3)),
            p=float(spec.get("p", 0.9)),
            max_new_tokens=int(spec.get("max_new_tokens", 20)),
            seed=int(spec.get("seed", 0)),
            length_normalization=bool(spec.get("length_normalization", False)),
        )
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, f"bad decode config: {exc}")
    raise AssertionError  # unreachable


def _content_context(backend: Backend, prompt_text: str) -> Context:
    ids = backend.tokenize(prompt_text) if prompt_text else []
    if backend.kind == "ngram":
        # generation starts from document-initial statistics
        return Context(prompt_tokens=(BOS, *ids), generated_tokens=())
    return Context(prompt_tokens=tuple(ids), generated_tokens=())


def _emit_report(report: dict, cfg: dict, report_path: str | None) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "config_sha256": _config_hash(cfg)}
    payload.update(report)
    text = json.dumps(payload, sort_keys=True, indent=2)
    click.echo(text)
    if report_path:
        try:
            with open(report_path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            _fail(EXIT_WRITE_FAILURE, f"cannot write report: {exc}")


@click.group()
def main() -> None:
    """Pragmatic controlled decoding tools."""


@main.command()
@click.argument("corpus_path", type=str)
@click.option("--order", type=int, default=3, show_default=True)
@click.option("--lam", type=float, default=0.9, show_default=True)
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--out", "out_path", type=str, required=True)
def train(corpus_path: str, order: int, lam: float, delta: float, out_path: str) -> None:
    """Train an n-gram model on a one-document-per-line corpus."""
    try:
        docs = load_corpus(corpus_path)
    except OSError as exc:
        _fail(EXIT_BAD_DATA, f"cannot read corpus: {exc}")
    try:
        model = train_ngram(docs, order=order, lam=lam, delta=delta)
    except EmptyCorpus:
        _fail(EXIT_BAD_DATA, "empty corpus")
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))
    try:
        model.save(out_path)
    except OSError as exc:
        _fail(EXIT_WRITE_FAILURE, f"cannot write model: {exc}")
    entries = sum(len(c) for c in model.counts.values())
    report = {
        "vocab_size": model.vocab_size,
        "order": model.order,
        "contexts": len(model.counts),
        "ngram_entries": entries,
        "model_path": out_path,
    }
    click.echo(json.dumps(report, sort_keys=True, indent=2))


@main.command()
@click.option("--config", "config_path", type=str, required=True)
@click.option("--prompt", "prompt_text", type=str, default="")
@click.option("--alpha0", type=float, default=None)
@click.option("--alpha1", type=float, default=None)
@click.option("--mode", type=click.Choice(["fixed", "adaptive"]), default=None)
@click.option("--strategy", type=click.Choice(["greedy", "beam", "nucleus"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-new-tokens", "max_new_tokens", type=int, default=None)
@click.option("--trace-out", "trace_out", type=str, default=None)
@click.option("--trace-format", "trace_format", type=click.Choice(["json", "tsv"]), default=None)
def generate(
    config_path: str,
    prompt_text: str,
    alpha0: float | None,
    alpha1: float | None,
    mode: str | None,
    strategy: str | None,
    seed: int | None,
    max_new_tokens: int | None,
    trace_out: str | None,
    trace_format: str | None,
) -> None:
    """Decode controlled text for a prompt."""
    cfg = _load_config(config_path)
    backend = _build_backend(cfg)
    rationality = _build_rationality(cfg, {"alpha0": alpha0, "alpha1": alpha1, "mode": mode})
    dec = _build_decode(
        cfg, {"strategy": strategy, "seed": seed, "max_new_tokens": max_new_tokens}
    )
    output = cfg.get("output", {}) if isinstance(cfg.get("output"), dict) else {}
    trace_path = trace_out if trace_out is not None else output.get("trace_path")
    fmt = trace_format if trace_format is not None else output.get("trace_format", "json")
    try:
        ctx = _content_context(backend, prompt_text)
        if rationality.alpha0 == 0 and rationality.alpha1 == 0:
            results = decode_uncontrolled(backend, ctx, dec)
        else:
            frame = _build_frame(cfg, backend)
            results = decode(backend, frame, ctx, rationality, dec)
    except RemoteError as exc:
        _fail(EXIT_BACKEND_FAILURE, f"backend failure: {exc}")
    best = results[0]
    click.echo(backend.detokenize(best.tokens))
    if trace_path:
        try:
            with open(trace_path, "wb") as fh:
                fh.write(export_trace(best.trace, fmt))
        except OSError as exc:
            _fail(EXIT_WRITE_FAILURE, f"cannot write trace: {exc}")


@main.group(name="eval")
def eval_group() -> None:
    """Evaluation protocols."""


@eval_group.command(name="classify")
@click.option("--config", "config_path", type=str, required=True)
@click.option("--data", "data_path", type=str, required=True)
@click.option("--report-out", "report_out", type=str, default=None)
def eval_classify(config_path: str, data_path: str, report_out: str | None) -> None:
    """Accuracy of prompt-likelihood classification on a labeled TSV."""
    cfg = _load_config(config_path)
    backend = _build_backend(cfg)
    frame = _build_frame(cfg, backend)
    try:
        dataset = load_labeled_tsv(data_path)
        if not dataset:
            _fail(EXIT_BAD_DATA, "empty dataset")
        acc = accuracy(backend, frame, dataset)
    except OSError as exc:
        _fail(EXIT_BAD_DATA, f"cannot read data: {exc}")
    except (ValueError, EmptyText) as exc:
        _fail(EXIT_BAD_DATA, f"bad data file: {exc}")
    except RemoteError as exc:
        _fail(EXIT_BACKEND_FAILURE, f"backend failure: {exc}")
    _emit_report({"accuracy": acc, "examples": len(dataset)}, cfg, report_out)


@eval_group.command(name="pairs")
@click.option("--config", "config_path", type=str, required=True)
@click.option("--data", "data_path", type=str, required=True)
@click.option("--mode", type=click.Choice(["raw", "s1"]), default=None)
@click.option("--report-out", "report_out", type=str, default=None)
def eval_pairs(
    config_path: str, data_path: str, mode: str | None, report_out: str | None
) -> None:
    """Pairwise stereotype-preference percentage on a pairs TSV."""
    cfg = _load_config(config_path)
    backend = _build_backend(cfg)
    eval_cfg = cfg.get("eval", {}) if isinstance(cfg.get("eval"), dict) else {}
    use_mode = mode if mode is not None else eval_cfg.get("pair_mode", "raw")
    try:
        pairs = load_pairs_tsv(data_path)
        if not pairs:
            _fail(EXIT_BAD_DATA, "empty pairs file")
    except OSError as exc:
        _fail(EXIT_BAD_DATA, f"cannot read data: {exc}")
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, f"bad data file: {exc}")
    frame = None
    rationality = None
    if use_mode == "s1":
        frame = _build_frame(cfg, backend)
        rationality = _build_rationality(cfg, {})
    try:
        score = pairwise_bias_score(
            backend, frame, pairs, mode=use_mode,
            rationality=rationality, content_ctx=_content_context(backend, ""),
        )
    except EmptyText as exc:
        _fail(EXIT_BAD_DATA, f"bad data file: {exc}")
    except RemoteError as exc:
        _fail(EXIT_BACKEND_FAILURE, f"backend failure: {exc}")
    _emit_report({"score": score, "pairs": len(pairs), "mode": use_mode}, cfg, report_out)


@eval_group.command(name="readability")
@click.option("--data", "data_path", type=str, required=True)
@click.option("--familiar", "familiar_path", type=str, default=None)
@click.option("--report-out", "report_out", type=str, default=None)
def eval_readability(
    data_path: str, familiar_path: str | None, report_out: str | None
) -> None:
    """Readability indices of a plain-text file."""
    try:
        with open(data_path, "r", encoding="utf-8") as fh:
            text = fh.read()
        familiar = load_familiar_words(familiar_path)
        report = readability(text, familiar)
    except OSError as exc:
        _fail(EXIT_BAD_DATA, f"cannot read data: {exc}")
    except EmptyText as exc:
        _fail(EXIT_BAD_DATA, f"bad data file: {exc}")
    _emit_report(
        {
            "fre": report.fre,
            "dcr": report.dcr,
            "gfi": report.gfi,
            "cli": report.cli_index,
            "words": report.word_count,
            "sentences": report.sentence_count,
            "syllables": report.syllable_count,
        },
        {},
        report_out,
    )


@eval_group.command(name="ppl")
@click.option("--config", "config_path", type=str, required=True)
@click.option("--data", "data_path", type=str, required=True)
@click.option("--report-out", "report_out", type=str, default=None)
def eval_ppl(config_path: str, data_path: str, report_out: str | None) -> None:
    """Conditional perplexity over a TSV of prompt<TAB>continuation lines."""
    cfg = _load_config(config_path)
    backend = _build_backend(cfg)
    rows: list[tuple[str, str]] = []
    try:
        with open(data_path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    _fail(EXIT_BAD_DATA, f"{data_path}:{lineno}: expected 2 fields")
                rows.append((parts[0], parts[1]))
    except OSError as exc:
        _fail(EXIT_BAD_DATA, f"cannot read data: {exc}")
    if not rows:
        _fail(EXIT_BAD_DATA, "empty data file")
    ppls = []
    try:
        for prompt, continuation in rows:
            ctx = _content_context(backend, prompt)
            cont = backend.tokenize(continuation)
            if not cont:
                _fail(EXIT_BAD_DATA, "continuation tokenizes to nothing")
            ppls.append(conditional_ppl(backend, ctx.prompt_tokens, cont))
    except RemoteError as exc:
        _fail(EXIT_BACKEND_FAILURE, f"backend failure: {exc}")
    mean = sum(ppls) / len(ppls)
    _emit_report({"mean_ppl": mean, "ppl": ppls, "rows": len(rows)}, cfg, report_out)


@eval_group.command(name="rerank")
@click.option("--config", "config_path", type=str, required=True)
@click.option("--data", "data_path", type=str, required=True)
@click.option("--n", "n_samples", type=int, default=None)
@click.option("--report-out", "report_out", type=str, default=None)
def eval_rerank(
    config_path: str, data_path: str, n_samples: int | None, report_out: str | None
) -> None:
    """Sample-then-select decoding over a file of prompts, one per line."""
    cfg = _load_config(config_path)
    backend = _build_backend(cfg)
    frame = _build_frame(cfg, backend)
    eval_cfg = cfg.get("eval", {}) if isinstance(cfg.get("eval"), dict) else {}
    n = n_samples if n_samples is not None else int(eval_cfg.get("rerank_n", 10))
    dec = _build_decode(cfg, {"strategy": "nucleus"})
    try:
        prompts = [p for p in load_corpus(data_path) if p.strip()]
    except OSError as exc:
        _fail(EXIT_BAD_DATA, f"cannot read data: {exc}")
    if not prompts:
        _fail(EXIT_BAD_DATA, "empty data file")
    posteriors = []
    texts = []
    try:
        for prompt in prompts:
            res = rerank_samples(backend, frame, _content_context(backend, prompt), n, dec)
            posteriors.append(res.posteriors[res.best_index])
            texts.append(backend.detokenize(res.best.tokens))
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))
    except RemoteError as exc:
        _fail(EXIT_BACKEND_FAILURE, f"backend failure: {exc}")
    mean = sum(posteriors) / len(posteriors)
    _emit_report(
        {
            "mean_best_posterior": mean,
            "n_samples": n,
            "prompts": len(prompts),
            "best_posterior": posteriors,
            "best_text": texts,
        },
        cfg,
        report_out,
    )


if __name__ == "__main__":
    main()
