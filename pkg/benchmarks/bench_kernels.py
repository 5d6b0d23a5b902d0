"""Micro-benchmark: pure NumPy kernels vs the compiled extension.

Runs both implementations on identical inputs across a few vocabulary sizes
and prints nanoseconds per call plus the speedup. The composite row chains
the three kernels the way one controlled decode step does.

Usage: python3 benchmarks/bench_kernels.py [--repeat 2000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pragdec._kernels import _pure

try:
    from pragdec._kernels import _speedups
except ImportError:
    _speedups = None

K_ATTRS = 2
SIZES = (64, 512, 4096)


def make_inputs(vocab: int, rng: np.random.Generator) -> dict:
    def logdist(shape):
        x = rng.random(shape) + 1e-3
        x = np.log(x / x.sum(axis=-1, keepdims=True))
        return np.ascontiguousarray(x)

    nnz = max(4, vocab // 10)
    ids = np.sort(rng.choice(vocab, size=nnz, replace=False)).astype(np.int64)
    counts = rng.integers(1, 50, size=nnz).astype(np.float64)
    return {
        "content": logdist(vocab),
        "s0": logdist((K_ATTRS, vocab)),
        "belief": np.full(K_ATTRS, -np.log(K_ATTRS)),
        "prev": np.exp(logdist(vocab)),
        "ids": ids,
        "counts": counts,
        "total": float(counts.sum()),
    }


def bench(fn, repeat: int) -> float:
    fn()  # warm up; also surfaces shape errors before timing
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best * 1e9


def kernel_calls(mod, inp) -> dict:
    def composite():
        tpl = mod.per_token_target_logpost(inp["s0"], inp["belief"], 0)
        out = mod.combine_and_normalize(inp["content"], tpl, 5.0)
        mod.logsumexp(out)

    return {
        "logsumexp": lambda: mod.logsumexp(inp["content"]),
        "jm_blend": lambda: mod.jm_blend(
            inp["prev"], inp["ids"], inp["counts"], inp["total"], 0.1, 0.7
        ),
        "target_logpost": lambda: mod.per_token_target_logpost(
            inp["s0"], inp["belief"], 0
        ),
        "combine_normalize": lambda: mod.combine_and_normalize(
            inp["content"], mod.per_token_target_logpost(inp["s0"], inp["belief"], 0), 5.0
        ),
        "decode_step_composite": composite,
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=2000)
    args = parser.parse_args()

    if _speedups is None:
        print("compiled extension not available; showing pure timings only")

    rng = np.random.default_rng(7)
    header = f"{'kernel':24} {'vocab':>6} {'pure ns':>12} {'compiled ns':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for vocab in SIZES:
        inp = make_inputs(vocab, rng)
        pure_calls = kernel_calls(_pure, inp)
        fast_calls = kernel_calls(_speedups, inp) if _speedups else None
        for name, fn in pure_calls.items():
            pure_ns = bench(fn, args.repeat)
            if fast_calls:
                fast_ns = bench(fast_calls[name], args.repeat)
                print(
                    f"{name:24} {vocab:>6} {pure_ns:>12.0f} {fast_ns:>12.0f}"
                    f" {pure_ns / fast_ns:>7.2f}x"
                )
            else:
                print(f"{name:24} {vocab:>6} {pure_ns:>12.0f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
