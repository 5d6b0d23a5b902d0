import numpy as np
import pytest
from stub_server import run_stub

from pragdec.backend import (
    Context,
    ProtocolViolation,
    RemoteBackend,
    RemoteError,
    RemoteUnavailable,
)
from pragdec.backend.remote import TOKEN_ENV_VAR


@pytest.fixture()
def stub(tiny_ab_model):
    with run_stub(tiny_ab_model) as (url, state):
        yield url, state


def make_client(url, **kw):
    kw.setdefault("timeout", 5.0)
    kw.setdefault("retry_sleep", 0.01)
    return RemoteBackend(url, **kw)


class TestMetadata:
    def test_meta_fields_mirror_backend(self, stub, tiny_ab_model):
        url, _ = stub
        client = make_client(url)
        assert client.vocab_size == tiny_ab_model.vocab_size
        assert client.bos_id == tiny_ab_model.bos_id
        assert client.eos_id == tiny_ab_model.eos_id
        assert client.tokenizer_descriptor == "remote:stub"

    def test_model_name_mismatch_rejected(self, stub):
        url, _ = stub
        client = make_client(url, model="other-model")
        with pytest.raises(ProtocolViolation):
            client.vocab_size

    def test_meta_fetched_once(self, stub):
        url, state = stub
        client = make_client(url)
        client.vocab_size
        client.bos_id
        metas = [p for (_, p) in state.requests if p == "/v1/meta"]
        assert len(metas) == 1


class TestTokenize:
    def test_agrees_with_local_tokenizer(self, stub, tiny_ab_model):
        url, _ = stub
        client = make_client(url)
        assert client.tokenize("a b a") == tiny_ab_model.tokenize("a b a")

    def test_token_text_is_numeric_placeholder(self, stub):
        url, _ = stub
        client = make_client(url)
        assert client.token_text(7) == "<7>"
        assert client.detokenize([1, 2]) == "<1> <2>"


class TestNextDist:
    def test_matches_local_model(self, stub, tiny_ab_model):
        url, _ = stub
        client = make_client(url)
        ids = tuple(client.tokenize("a b"))
        for generated in ((), tuple(tiny_ab_model.tokenize("a"))):
            remote = client.next_dist(Context(ids, generated))
            local = tiny_ab_model.next_dist(Context(ids, generated))
            np.testing.assert_allclose(remote.logp, local.logp, atol=1e-9)

    def test_prompt_must_come_from_own_tokenize(self, stub):
        url, _ = stub
        client = make_client(url)
        with pytest.raises(ValueError, match="tokenize"):
            client.next_dist(Context((3, 4), ()))

    def test_incremental_decode_reuses_one_session(self, stub):
        url, state = stub
        client = make_client(url)
        ids = tuple(client.tokenize("a"))
        ctx = Context(ids, ())
        for token in (4, 3, 4):
            client.next_dist(ctx)
            ctx = ctx.extended(token)
        opened = [p for (_, p) in state.requests if p == "/v1/session"]
        assert len(opened) == 1

    def test_beam_rewind_opens_second_session(self, stub):
        url, state = stub
        client = make_client(url)
        ids = tuple(client.tokenize("a"))
        deep = Context(ids, (4, 3))
        client.next_dist(deep)
        # Asking for a shorter history cannot reuse the longer session.
        client.next_dist(Context(ids, ()))
        opened = [p for (_, p) in state.requests if p == "/v1/session"]
        assert len(opened) == 2

    def test_expired_session_retried_fresh(self, stub, tiny_ab_model):
        url, state = stub
        client = make_client(url)
        ids = tuple(client.tokenize("a"))
        ctx = Context(ids, ())
        client.next_dist(ctx)
        state.sessions.clear()  # server lost everything
        remote = client.next_dist(ctx)
        local = tiny_ab_model.next_dist(ctx)
        np.testing.assert_allclose(remote.logp, local.logp, atol=1e-9)

    def test_batch_matches_single_calls(self, stub):
        url, _ = stub
        client = make_client(url)
        ids = tuple(client.tokenize("a b"))
        ctxs = [Context(ids, ()), Context(ids, (3,)), Context(ids, (3, 4))]
        batch = client.next_dist_batch(ctxs)
        for ctx, d in zip(ctxs, batch):
            np.testing.assert_array_equal(d.logp, client.next_dist(ctx).logp)


class TestFaults:
    def test_transient_busy_retried(self, stub):
        url, state = stub
        client = make_client(url)
        state.fail_503 = 2
        assert client.vocab_size > 0

    def test_persistent_busy_gives_unavailable(self, stub):
        url, state = stub
        client = make_client(url, ready_retries=2)
        state.fail_503 = 100
        with pytest.raises(RemoteUnavailable):
            client.vocab_size

    def test_unreachable_host(self):
        client = make_client("http://127.0.0.1:9", timeout=0.5)
        with pytest.raises(RemoteUnavailable):
            client.vocab_size

    @pytest.mark.parametrize("mode", ["unnormalized", "short", "nan"])
    def test_corrupt_vector_rejected(self, stub, mode):
        url, state = stub
        client = make_client(url)
        ids = tuple(client.tokenize("a"))
        state.corrupt = mode
        with pytest.raises(ProtocolViolation):
            client.next_dist(Context(ids, ()))

    def test_renormalizes_within_tolerance(self, stub, tiny_ab_model):
        url, state = stub
        client = make_client(url)
        ids = tuple(client.tokenize("a"))
        d = client.next_dist(Context(ids, ()))
        assert float(np.exp(d.logp).sum()) == pytest.approx(1.0, abs=1e-12)


class TestAuth:
    def test_missing_token_rejected(self, tiny_ab_model):
        with run_stub(tiny_ab_model, token="sekrit") as (url, _):
            client = make_client(url)
            with pytest.raises(RemoteError):
                client.vocab_size

    def test_explicit_token_accepted(self, tiny_ab_model):
        with run_stub(tiny_ab_model, token="sekrit") as (url, _):
            client = make_client(url, token="sekrit")
            assert client.vocab_size > 0

    def test_env_token_forwarded(self, tiny_ab_model, monkeypatch):
        monkeypatch.setenv(TOKEN_ENV_VAR, "sekrit")
        with run_stub(tiny_ab_model, token="sekrit") as (url, _):
            client = make_client(url)
            assert client.vocab_size > 0
