"""Numpy implementations of the hot per-step kernels.

These are the reference semantics; the compiled extension in ``_speedups.pyx``
must match them to float64 round-off. All vectors are float64, C-contiguous.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

_NEG_INF = float("-inf")


def logsumexp(x: np.ndarray) -> float:
    """log(sum(exp(x))) by max-shift; -inf entries carry no mass.

    Returns -inf when every entry is -inf (caller decides whether that is an
    error).
    """
    m = np.max(x)
    if m == _NEG_INF:
        return _NEG_INF
    return float(m + np.log(np.sum(np.exp(x - m))))


def jm_blend(
    prev: np.ndarray,
    ids: np.ndarray,
    counts: np.ndarray,
    total: float,
    delta: float,
    lam: float,
) -> np.ndarray:
    """One interpolation level: lam * P_add(.|h) + (1-lam) * prev.

    P_add is additive-delta over the full vocabulary, (c(h,w)+delta)/(total+delta*V),
    well defined even for unseen histories (total=0). ``ids``/``counts`` hold
    the observed successors of h. Linear domain in and out.
    """
    v = prev.shape[0]
    denom = total + delta * v
    out = lam * (delta / denom) + (1.0 - lam) * prev
    if ids.shape[0]:
        out[ids] += lam * (counts / denom)
    return out


def per_token_target_logpost(s0_logp: np.ndarray, log_belief: np.ndarray, target: int) -> np.ndarray:
    """Hypothetical listener posterior on the target for every candidate token.

    s0_logp is (K, V): row a holds log P(token | history, attribute a). Entry v
    is the log-posterior the listener would place on the target after seeing
    token v. Columns where every attribute has -inf yield -inf (no speaker
    produces that token).
    """
    joint = log_belief[:, None] + s0_logp
    m = np.max(joint, axis=0)
    out = np.full(joint.shape[1], _NEG_INF)
    finite = m != _NEG_INF
    if np.any(finite):
        denom = m[finite] + np.log(np.sum(np.exp(joint[:, finite] - m[finite]), axis=0))
        out[finite] = joint[target, finite] - denom
    return out


def combine_and_normalize(content_logp: np.ndarray, tpl: np.ndarray, alpha: float) -> np.ndarray:
    """Renormalized content * posterior^alpha in log domain.

    Guards the 0 * -inf corner: with alpha == 0 the posterior term vanishes
    even for excluded tokens. Returns all -inf when nothing has support.
    """
    if alpha == 0.0:
        out = content_logp.copy()
    else:
        out = content_logp + alpha * tpl
    lse = logsumexp(out)
    if lse == _NEG_INF:
        return np.full_like(out, _NEG_INF)
    return out - lse
