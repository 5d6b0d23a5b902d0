"""HTTP client for a logprob server speaking the versioned JSON protocol.

The server owns tokenization and next-token scoring behind stateful sessions:
the client opens a session for a prompt, appends generated tokens, and reads
back a full next-token logprob vector. Sessions are pooled per prompt so a
step-by-step decode appends one token per request instead of replaying the
prefix, and a beam rewind transparently falls back to a fresh session.

The protocol has no detokenize endpoint, so ``token_text`` renders numeric
placeholders; readable text for remote decodes comes from the server side.
"""

from __future__ import annotations

import json
import os
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import requests

from pragdec import _kernels
from pragdec.backend.base import Backend, Context
from pragdec.probcore import TokenDist, normalize

TOKEN_ENV_VAR = "RSA_REMOTE_TOKEN"

# A received logprob vector must already sum to 1 within this tolerance in
# probability space; the client still renormalizes exactly after checking.
NORMALIZATION_TOLERANCE = 1e-4


class RemoteError(RuntimeError):
    pass


class RemoteUnavailable(RemoteError):
    """Server unreachable, timing out, or persistently not ready."""


class ProtocolViolation(RemoteError):
    """Server responded, but outside the protocol contract."""


class _Status(Exception):
    def __init__(self, code: int, detail: str) -> None:
        super().__init__(f"HTTP {code}: {detail}")
        self.code = code


@dataclass
class _Session:
    session_id: str
    sent: list[int] = field(default_factory=list)


class RemoteBackend(Backend):
    """Backend over a remote scoring server.

    ``next_dist`` requires the prompt tokens of the context to have come from
    this client's own ``tokenize``, because sessions are opened by prompt text.
    """

    kind = "remote"

    def __init__(
        self,
        base_url: str,
        model: str | None = None,
        token: str | None = None,
        timeout: float = 30.0,
        max_sessions: int = 32,
        max_workers: int = 8,
        ready_retries: int = 5,
        retry_sleep: float = 0.2,
    ) -> None:
        self._base_url = base_url.rstrip("/")
        self._model = model
        self._timeout = timeout
        self._max_sessions = max_sessions
        self._max_workers = max_workers
        self._ready_retries = ready_retries
        self._retry_sleep = retry_sleep
        tok = token if token is not None else os.environ.get(TOKEN_ENV_VAR)
        self._headers = {"Accept-Encoding": "gzip"}
        if tok:
            self._headers["Authorization"] = f"Bearer {tok}"
        self._local = threading.local()
        self._lock = threading.Lock()
        self._meta: dict | None = None
        self._prompt_text: dict[tuple[int, ...], str] = {}
        # session_id -> (prompt key, session), oldest first
        self._pooled: OrderedDict[str, tuple[tuple[int, ...], _Session]] = OrderedDict()
        self._by_prompt: dict[tuple[int, ...], set[str]] = {}

    # -- transport -----------------------------------------------------------

    def _http(self) -> requests.Session:
        sess = getattr(self._local, "session", None)
        if sess is None:
            sess = requests.Session()
            sess.headers.update(self._headers)
            self._local.session = sess
        return sess

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = self._base_url + path
        last_status: _Status | None = None
        for attempt in range(self._ready_retries + 1):
            try:
                resp = self._http().request(
                    method, url, json=payload, timeout=self._timeout
                )
            except requests.RequestException as exc:
                raise RemoteUnavailable(f"{method} {path}: {exc}") from exc
            if resp.status_code == 503:
                last_status = _Status(503, resp.text[:200])
                if attempt < self._ready_retries:
                    time.sleep(self._retry_sleep * (attempt + 1))
                continue
            if resp.status_code >= 400:
                raise _Status(resp.status_code, resp.text[:200])
            try:
                body = resp.json()
            except (json.JSONDecodeError, ValueError) as exc:
                raise ProtocolViolation(f"{method} {path}: body is not JSON") from exc
            if not isinstance(body, dict):
                raise ProtocolViolation(f"{method} {path}: body is not an object")
            return body
        raise RemoteUnavailable(f"{method} {path}: server not ready ({last_status})")

    @staticmethod
    def _reject(exc: _Status, what: str) -> RemoteError:
        if exc.code in (404, 422):
            return ProtocolViolation(f"{what}: {exc}")
        return RemoteUnavailable(f"{what}: {exc}")

    # -- metadata ------------------------------------------------------------

    def _meta_info(self) -> dict:
        with self._lock:
            if self._meta is not None:
                return self._meta
        try:
            body = self._request("GET", "/v1/meta")
        except _Status as exc:
            raise self._reject(exc, "meta") from exc
        for key in ("model", "vocab_size", "bos_id", "eos_id"):
            if key not in body:
                raise ProtocolViolation(f"meta lacks {key!r}")
        for key in ("vocab_size", "bos_id", "eos_id"):
            if not isinstance(body[key], int):
                raise ProtocolViolation(f"meta field {key!r} is not an integer")
        if self._model is not None and body["model"] != self._model:
            raise ProtocolViolation(
                f"server hosts model {body['model']!r}, expected {self._model!r}"
            )
        with self._lock:
            self._meta = body
            if self._model is None:
                self._model = body["model"]
        return body

    @property
    def vocab_size(self) -> int:
        return self._meta_info()["vocab_size"]

    @property
    def bos_id(self) -> int:
        return self._meta_info()["bos_id"]

    @property
    def eos_id(self) -> int:
        return self._meta_info()["eos_id"]

    @property
    def tokenizer_descriptor(self) -> str:
        return f"remote:{self._meta_info()['model']}"

    # -- tokenization ----------------------------------------------------------

    def tokenize(self, text: str) -> list[int]:
        try:
            body = self._request("POST", "/v1/tokenize", {"text": text})
        except _Status as exc:
            raise self._reject(exc, "tokenize") from exc
        ids = body.get("token_ids")
        if not isinstance(ids, list) or not all(isinstance(t, int) for t in ids):
            raise ProtocolViolation("tokenize: token_ids is not a list of integers")
        with self._lock:
            self._prompt_text[tuple(ids)] = text
        return list(ids)

    def token_text(self, token_id: int) -> str:
        return f"<{token_id}>"

    def detokenize(self, token_ids) -> str:
        return " ".join(self.token_text(t) for t in token_ids)

    # -- session pool ------------------------------------------------------------

    def _claim(self, prompt_key: tuple[int, ...], generated: tuple[int, ...]) -> _Session | None:
        with self._lock:
            best_id: str | None = None
            best_len = -1
            for sid in self._by_prompt.get(prompt_key, ()):
                sess = self._pooled[sid][1]
                k = len(sess.sent)
                if k <= len(generated) and tuple(sess.sent) == generated[:k] and k > best_len:
                    best_id, best_len = sid, k
            if best_id is None:
                return None
            _, sess = self._pooled.pop(best_id)
            self._by_prompt[prompt_key].discard(best_id)
            return sess

    def _release(self, prompt_key: tuple[int, ...], sess: _Session) -> None:
        with self._lock:
            self._pooled[sess.session_id] = (prompt_key, sess)
            self._pooled.move_to_end(sess.session_id)
            self._by_prompt.setdefault(prompt_key, set()).add(sess.session_id)
            while len(self._pooled) > self._max_sessions:
                old_id, (old_key, _) = self._pooled.popitem(last=False)
                self._by_prompt.get(old_key, set()).discard(old_id)

    def _open_session(self, prompt_key: tuple[int, ...], text: str) -> _Session:
        try:
            body = self._request(
                "POST", "/v1/session", {"model": self._model, "prompt_text": text}
            )
        except _Status as exc:
            raise self._reject(exc, "session") from exc
        sid = body.get("session_id")
        ids = body.get("prompt_token_ids")
        if not isinstance(sid, str) or not isinstance(ids, list):
            raise ProtocolViolation("session: missing session_id or prompt_token_ids")
        if tuple(ids) != prompt_key:
            raise ProtocolViolation(
                "session: server tokenization of the prompt disagrees with the client's"
            )
        return _Session(session_id=sid)

    # -- scoring ------------------------------------------------------------------

    def next_dist(self, ctx: Context) -> TokenDist:
        self._meta_info()
        prompt_key = tuple(ctx.prompt_tokens)
        with self._lock:
            text = self._prompt_text.get(prompt_key)
        if text is None:
            raise ValueError(
                "remote contexts must use prompt tokens produced by this "
                "backend's tokenize()"
            )
        generated = tuple(ctx.generated_tokens)
        sess = self._claim(prompt_key, generated)
        fresh = sess is None
        if fresh:
            sess = self._open_session(prompt_key, text)
        try:
            dist = self._score_with(sess, generated)
        except _Status as exc:
            if exc.code == 404 and not fresh:
                # Pooled session expired server-side; retry once from scratch.
                sess = self._open_session(prompt_key, text)
                try:
                    dist = self._score_with(sess, generated)
                except _Status as exc2:
                    raise self._reject(exc2, "logprobs") from exc2
            else:
                raise self._reject(exc, "logprobs") from exc
        self._release(prompt_key, sess)
        return dist

    def _score_with(self, sess: _Session, generated: tuple[int, ...]) -> TokenDist:
        delta = generated[len(sess.sent):]
        if delta:
            body = self._request(
                "POST",
                "/v1/append",
                {"session_id": sess.session_id, "token_ids": [int(t) for t in delta]},
            )
            if body.get("ok") is not True:
                raise ProtocolViolation("append: server did not acknowledge")
            sess.sent.extend(int(t) for t in delta)
        body = self._request("POST", "/v1/logprobs", {"session_id": sess.session_id})
        if "vocab_size" not in body or "logprobs" not in body:
            raise ProtocolViolation("logprobs: missing vocab_size or logprobs")
        arr = np.asarray(body["logprobs"], dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != body["vocab_size"]:
            raise ProtocolViolation("logprobs: length disagrees with vocab_size")
        if arr.shape[0] != self.vocab_size:
            raise ProtocolViolation("logprobs: length disagrees with /v1/meta vocab_size")
        if np.isnan(arr).any() or (arr == np.inf).any():
            raise ProtocolViolation("logprobs: vector holds NaN or +inf")
        total = _kernels.logsumexp(arr)
        if abs(np.expm1(total)) > NORMALIZATION_TOLERANCE:
            raise ProtocolViolation(
                f"logprobs: vector sums to exp({total:.6g}), outside tolerance"
            )
        return normalize(TokenDist(arr))

    def next_dist_batch(self, ctxs: list[Context]) -> list[TokenDist]:
        if len(ctxs) <= 1:
            return [self.next_dist(c) for c in ctxs]
        self._meta_info()
        workers = min(self._max_workers, len(ctxs))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.next_dist, ctxs))
