"""Synthetic two-style corpus for desk-scale verification.

Each training line is "<style-tag> : w1 w2 ... wk". The two styles draw from
disjoint ~30-word lexicons plus a shared filler vocabulary; a line always
opens with a style word and style words tend to follow style words, so an
order-3 model both recognizes the style from the tag prompt and propagates it
once a style word has been emitted. Everything is generated from one seeded
rng, so fixtures are reproducible byte for byte.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

from pragdec.backend.ngram import NGramModel
from pragdec.probcore import Rng

FORMAL_WORDS = (
    "pursuant", "accordingly", "heretofore", "notwithstanding", "furthermore",
    "nevertheless", "consequently", "henceforth", "whereupon", "thereby",
    "herein", "thereof", "aforementioned", "stipulate", "adjudicate",
    "promulgate", "expedite", "facilitate", "endeavor", "ascertain",
    "commence", "terminate", "constitute", "delineate", "substantiate",
    "corroborate", "elucidate", "exemplify", "juxtapose", "extrapolate",
)

CASUAL_WORDS = (
    "yeah", "nah", "gonna", "wanna", "dude", "buddy", "cool", "awesome",
    "kinda", "sorta", "totally", "basically", "whatever", "stuff", "things",
    "guys", "okay", "yep", "nope", "hey", "wow", "super", "really", "pretty",
    "folks", "chill", "hang", "grab", "bunch", "crazy",
)

FILLER_WORDS = (
    "the", "a", "of", "to", "and", "in", "that", "it", "with", "for",
    "on", "this", "but", "be", "at", "by", "from", "or", "an", "so",
)

STYLES = ("formal", "casual")
_LEXICON = {"formal": FORMAL_WORDS, "casual": CASUAL_WORDS}

# line dynamics; tuned so uncontrolled decoding stays mostly in filler while
# a single style word makes further style words likely
P_STYLE_AFTER_STYLE = 0.6
P_STYLE_AFTER_FILLER = 0.5
MIN_WORDS, MAX_WORDS = 9, 16

# fixture training defaults; the lighter interpolation keeps listener
# posteriors off saturation, which the rationality ratios need
TRAIN_ORDER = 3
TRAIN_LAMBDA = 0.7
TRAIN_DELTA = 0.1


def _cumulative(weights: Sequence[float]) -> list[float]:
    out: list[float] = []
    total = 0.0
    for w in weights:
        total += w
        out.append(total)
    return out


# heavier head: word i carries weight 1/(i+1)
_STYLE_CUM = _cumulative([1.0 / (i + 1) for i in range(len(FORMAL_WORDS))])
_FILLER_CUM = _cumulative([1.0 / (i + 1) for i in range(len(FILLER_WORDS))])


def _pick(rng: Rng, words: Sequence[str], cum: Sequence[float], avoid: str | None) -> str:
    while True:
        u = rng.uniform() * cum[-1]
        word = words[min(bisect_left(cum, u), len(words) - 1)]
        if word != avoid:
            return word


@dataclass(frozen=True)
class TwoStyleCorpus:
    train_lines: tuple[str, ...]
    heldout: tuple[tuple[str, str], ...]  # (text, style)
    prompts: tuple[str, ...]  # filler-only generation openers
    lexicons: dict[str, tuple[str, ...]]
    filler: tuple[str, ...]


def _content_words(rng: Rng, style: str) -> list[str]:
    lexicon = _LEXICON[style]
    length = MIN_WORDS + int(rng.uniform() * (MAX_WORDS - MIN_WORDS + 1))
    length = min(length, MAX_WORDS)
    words: list[str] = []
    prev: str | None = None
    prev_was_style = False
    for i in range(length):
        if i == 0:
            take_style = True
        elif prev_was_style:
            take_style = rng.uniform() < P_STYLE_AFTER_STYLE
        else:
            take_style = rng.uniform() < P_STYLE_AFTER_FILLER
        if take_style:
            word = _pick(rng, lexicon, _STYLE_CUM, prev)
        else:
            word = _pick(rng, FILLER_WORDS, _FILLER_CUM, prev)
        words.append(word)
        prev = word
        prev_was_style = take_style
    return words


def build_two_style_corpus(
    seed: int = 20240601,
    lines_per_style: int = 2200,
    heldout_per_style: int = 100,
    n_prompts: int = 60,
) -> TwoStyleCorpus:
    rng = Rng(seed)
    train: list[str] = []
    heldout: list[tuple[str, str]] = []
    for style in STYLES:
        for _ in range(lines_per_style):
            train.append(f"{style} : " + " ".join(_content_words(rng, style)))
        for _ in range(heldout_per_style):
            heldout.append((" ".join(_content_words(rng, style)), style))
    prompts: list[str] = []
    for _ in range(n_prompts):
        k = 2 + int(rng.uniform() * 2)  # 2 or 3 filler words
        words: list[str] = []
        prev: str | None = None
        for _ in range(k):
            word = _pick(rng, FILLER_WORDS, _FILLER_CUM, prev)
            words.append(word)
            prev = word
        prompts.append(" ".join(words))
    return TwoStyleCorpus(
        train_lines=tuple(train),
        heldout=tuple(heldout),
        prompts=tuple(prompts),
        lexicons=dict(_LEXICON),
        filler=FILLER_WORDS,
    )


def frame_config(target: str) -> dict:
    """Frame over the two style tags with the given style as target."""
    if target not in STYLES:
        raise ValueError(f"target must be one of {STYLES}")
    attrs = []
    for style in STYLES:
        attrs.append(
            {
                "name": style,
                "prompt": f"{style} :",
                "role": "target" if style == target else "distractor",
            }
        )
    return {"attributes": attrs}


def lexicon_token_ids(model: NGramModel, style: str) -> frozenset[int]:
    ids = {model.word_to_id[w] for w in _LEXICON[style] if w in model.word_to_id}
    return frozenset(ids)


def lexicon_rate(model: NGramModel, tokens: Sequence[int], style: str) -> float:
    """Fraction of non-reserved generated tokens drawn from a style lexicon."""
    ids = lexicon_token_ids(model, style)
    content = [t for t in tokens if t > 2]  # skip BOS/EOS/UNK
    if not content:
        return 0.0
    return sum(1 for t in content if t in ids) / len(content)
