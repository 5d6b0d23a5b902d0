"""Regenerate the shared wire-protocol test vectors.

Writes fixture.rsang (a tiny word n-gram model) and testvectors.json next to
this script. Both server implementations and the client stub suite consume the
same files, so any change here must keep them in sync; output is deterministic
and the committed copies are guarded by a regeneration test.

Usage: python3 gen_vectors.py [--out DIR]
"""

from __future__ import annotations

import argparse
import json
import pathlib

from pragdec.backend.base import Context
from pragdec.backend.ngram import train_ngram

MODEL_NAME = "fixture-v1"

CORPUS = [
    "the cat sat on the mat .",
    "the dog ran to the mat .",
    "a cat and a dog met .",
    "hello world said the cat .",
    "the cat saw the dog .",
]

TOKENIZE_TEXTS = [
    "the cat sat",
    "hello, world",
    "xyzzy unknown words",
    "x_1 and 42",
    "UPPER Case",
    "",
    "   ",
    "punct...here",
]

# (prompt_text, [append batches]); None entries never appear, every session
# starts with one implicit logprobs call before the first append
SESSIONS = [
    ("the cat", [["sat"], ["on", "the"]]),
    ("hello world said", []),
    ("", [["the"]]),
]


def build_vectors(model) -> dict:
    tokenize = [
        {"text": t, "token_ids": list(model.tokenize(t))} for t in TOKENIZE_TEXTS
    ]

    sessions = []
    for prompt_text, batches in SESSIONS:
        ids = list(model.tokenize(prompt_text))
        steps = []
        state = list(ids)

        def logprobs_now():
            dist = model.next_dist(Context(tuple(state), ()))
            return [float(x) for x in dist.logp]

        steps.append({"append": None, "logprobs": logprobs_now()})
        for batch in batches:
            batch_ids = [model.word_to_id[w] for w in batch]
            state.extend(batch_ids)
            steps.append({"append": batch_ids, "logprobs": logprobs_now()})
        sessions.append(
            {"prompt_text": prompt_text, "prompt_token_ids": ids, "steps": steps}
        )

    errors = [
        {
            "name": "unknown_session_logprobs",
            "endpoint": "logprobs",
            "body": {"session_id": "no-such-session"},
            "status": 404,
        },
        {
            "name": "unknown_session_append",
            "endpoint": "append",
            "body": {"session_id": "no-such-session", "token_ids": [3]},
            "status": 404,
        },
        {
            "name": "token_id_out_of_range",
            "endpoint": "append",
            "body": {"session_id": "$SID", "token_ids": [model.vocab_size]},
            "status": 422,
        },
        {
            "name": "token_id_negative",
            "endpoint": "append",
            "body": {"session_id": "$SID", "token_ids": [-1]},
            "status": 422,
        },
        {
            "name": "token_id_not_int",
            "endpoint": "append",
            "body": {"session_id": "$SID", "token_ids": ["three"]},
            "status": 422,
        },
        {
            "name": "wrong_model",
            "endpoint": "session",
            "body": {"model": "other-model", "prompt_text": "hi"},
            "status": 422,
        },
        {
            "name": "prompt_text_not_string",
            "endpoint": "session",
            "body": {"model": MODEL_NAME, "prompt_text": 5},
            "status": 422,
        },
        {
            "name": "tokenize_text_not_string",
            "endpoint": "tokenize",
            "body": {"text": 5},
            "status": 422,
        },
    ]

    return {
        "model_name": MODEL_NAME,
        "model_file": "fixture.rsang",
        "meta": {
            "model": MODEL_NAME,
            "vocab_size": model.vocab_size,
            "bos_id": model.bos_id,
            "eos_id": model.eos_id,
        },
        "health_required_fields": ["status", "model", "queue_depth"],
        "tolerances": {"logprob_abs": 1e-9, "normalization_abs": 1e-4},
        "tokenize": tokenize,
        "sessions": sessions,
        "errors": errors,
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(pathlib.Path(__file__).parent))
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model = train_ngram(CORPUS, order=3, lam=0.8, delta=0.1)
    (out / "fixture.rsang").write_bytes(model.to_bytes())
    vectors = build_vectors(model)
    text = json.dumps(vectors, sort_keys=True, indent=2) + "\n"
    (out / "testvectors.json").write_text(text, encoding="utf-8")
    print(f"wrote {out / 'fixture.rsang'} and {out / 'testvectors.json'}")


if __name__ == "__main__":
    main()
