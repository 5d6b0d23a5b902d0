import numpy as np
import pytest

from pragdec.backend import Backend, Context, train_ngram
from pragdec.engine import frame_from_config
from pragdec.probcore import NEG_INF, TokenDist
from pragdec.synthcorpus import (
    TRAIN_DELTA,
    TRAIN_LAMBDA,
    TRAIN_ORDER,
    build_two_style_corpus,
    frame_config,
)

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture()
def record_criterion():
    """Acceptance tests call this once: record(name, ok) prints a summary line."""

    def record(name: str, ok: bool) -> None:
        _ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}")
        assert ok, f"acceptance criterion failed: {name}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_style():
    return build_two_style_corpus()


@pytest.fixture(scope="session")
def style_model(two_style):
    return train_ngram(
        two_style.train_lines,
        order=TRAIN_ORDER,
        lam=TRAIN_LAMBDA,
        delta=TRAIN_DELTA,
    )


@pytest.fixture(scope="session")
def formal_frame(style_model):
    return frame_from_config(frame_config("formal"), style_model)


@pytest.fixture(scope="session")
def tiny_ab_model():
    # The two-sentence corpus behind the hand-computed smoothing oracle.
    return train_ngram(["a b", "a b"], order=2)


class FixedChainBackend(Backend):
    """Degenerate backend: token (i + 1) mod V always follows token i.

    Every next-token distribution is a point mass, so any continuation that
    follows the chain has probability one and conditional perplexity exactly 1.
    """

    kind = "chain"

    def __init__(self, vocab: int = 5):
        self._vocab = vocab

    @property
    def vocab_size(self) -> int:
        return self._vocab

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return self._vocab - 1

    def tokenize(self, text: str) -> list[int]:
        return [int(t) % self._vocab for t in text.split()]

    def token_text(self, token_id: int) -> str:
        return str(token_id)

    def next_dist(self, ctx: Context) -> TokenDist:
        hist = ctx.full()
        last = hist[-1] if hist else self.bos_id
        logp = np.full(self._vocab, NEG_INF)
        logp[(last + 1) % self._vocab] = 0.0
        return TokenDist(logp, normalized=True)


@pytest.fixture(scope="session")
def chain_backend():
    return FixedChainBackend()


class TreeBackend(Backend):
    """Tiny context-dependent model with tie-free, reproducible distributions.

    Every context maps through a seeded generator to a softmax vector, so the
    full depth-3 search tree can be enumerated exactly in tests.
    """

    kind = "tree"

    def __init__(self, vocab: int = 5, salt: int = 0):
        self._vocab = vocab
        self._salt = salt

    @property
    def vocab_size(self) -> int:
        return self._vocab

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    def tokenize(self, text: str) -> list[int]:
        return [int(t) % self._vocab for t in text.split()]

    def token_text(self, token_id: int) -> str:
        return str(token_id)

    def next_dist(self, ctx: Context) -> TokenDist:
        seq = np.random.SeedSequence((self._salt, *ctx.full()))
        raw = np.random.Generator(np.random.PCG64(seq)).normal(size=self._vocab)
        logp = raw - float(np.log(np.exp(raw).sum()))
        return TokenDist(np.asarray(logp), normalized=True)


@pytest.fixture(scope="session")
def tree_backend():
    return TreeBackend()


class TableBackend(Backend):
    """Explicit lookup-table model over five tokens (bos 0, eos 1).

    The table maps full context tuples to probability rows; anything missing
    falls back to an eos-heavy default. Built so short sequences dominate:
    every globally top-3 completion starts from a top-3 first token, which
    makes beam(3) provably exact and lets tests enumerate the whole tree.
    """

    kind = "table"

    VOCAB = 5
    DEFAULT = (0.02, 0.75, 0.10, 0.08, 0.05)

    def __init__(self, table: dict[tuple[int, ...], tuple[float, ...]]):
        self._table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}

    @property
    def vocab_size(self) -> int:
        return self.VOCAB

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    def tokenize(self, text: str) -> list[int]:
        return [int(t) % self.VOCAB for t in text.split()]

    def token_text(self, token_id: int) -> str:
        return str(token_id)

    def next_dist(self, ctx: Context) -> TokenDist:
        row = self._table.get(ctx.full())
        if row is None:
            row = np.asarray(self.DEFAULT)
        return TokenDist(np.log(row / row.sum()), normalized=True)


@pytest.fixture(scope="session")
def table_backend():
    # Root spreads mass over the content tokens; the two attribute prompts (2,)
    # and (3,) disagree only about the first continuation token, so listener
    # evidence accrues at step one and the search stays benign for beam(3).
    return TableBackend(
        {
            (0,): (0.02, 0.10, 0.40, 0.30, 0.18),
            (2,): (0.02, 0.16, 0.50, 0.16, 0.16),
            (3,): (0.02, 0.16, 0.16, 0.50, 0.16),
        }
    )
