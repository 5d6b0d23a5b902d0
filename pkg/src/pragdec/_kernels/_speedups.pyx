# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: fused single-pass versions of the numpy reference in
``_pure``. Semantics must match _pure to float64 round-off."""

from libc.math cimport exp, log, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


cdef double _lse(const double* x, Py_ssize_t n) noexcept nogil:
    cdef double m = -INFINITY
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        if x[i] > m:
            m = x[i]
    if m == -INFINITY:
        return -INFINITY
    for i in range(n):
        if x[i] != -INFINITY:
            s += exp(x[i] - m)
    return m + log(s)


def logsumexp(cnp.ndarray[double, ndim=1] x not None):
    return _lse(<const double*> x.data, x.shape[0])


def jm_blend(
    cnp.ndarray[double, ndim=1] prev not None,
    cnp.ndarray[long, ndim=1] ids not None,
    cnp.ndarray[double, ndim=1] counts not None,
    double total,
    double delta,
    double lam,
):
    cdef Py_ssize_t v = prev.shape[0]
    cdef Py_ssize_t m = ids.shape[0]
    cdef double denom = total + delta * v
    cdef double base = lam * (delta / denom)
    cdef double keep = 1.0 - lam
    cdef cnp.ndarray[double, ndim=1] out = np.empty(v, dtype=np.float64)
    cdef Py_ssize_t i
    with nogil:
        for i in range(v):
            out[i] = base + keep * prev[i]
        for i in range(m):
            out[ids[i]] += lam * (counts[i] / denom)
    return out


def per_token_target_logpost(
    cnp.ndarray[double, ndim=2] s0_logp not None,
    cnp.ndarray[double, ndim=1] log_belief not None,
    Py_ssize_t target,
):
    cdef Py_ssize_t k = s0_logp.shape[0]
    cdef Py_ssize_t v = s0_logp.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(v, dtype=np.float64)
    cdef Py_ssize_t a, j
    cdef double m, s, term
    with nogil:
        for j in range(v):
            m = -INFINITY
            for a in range(k):
                term = log_belief[a] + s0_logp[a, j]
                if term > m:
                    m = term
            if m == -INFINITY:
                out[j] = -INFINITY
                continue
            s = 0.0
            for a in range(k):
                term = log_belief[a] + s0_logp[a, j]
                if term != -INFINITY:
                    s += exp(term - m)
            out[j] = (log_belief[target] + s0_logp[target, j]) - (m + log(s))
    return out


def combine_and_normalize(
    cnp.ndarray[double, ndim=1] content_logp not None,
    cnp.ndarray[double, ndim=1] tpl not None,
    double alpha,
):
    cdef Py_ssize_t v = content_logp.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(v, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double lse
    with nogil:
        if alpha == 0.0:
            for i in range(v):
                out[i] = content_logp[i]
        else:
            for i in range(v):
                out[i] = content_logp[i] + alpha * tpl[i]
        lse = _lse(<const double*> out.data, v)
        if lse == -INFINITY:
            for i in range(v):
                out[i] = -INFINITY
        else:
            for i in range(v):
                out[i] -= lse
    return out
