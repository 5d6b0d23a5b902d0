"""Kernel selection: compiled extension when available, numpy otherwise.

Set PRAGDEC_PURE=1 to force the numpy path (used by the benchmark and by
tests that compare the two implementations).
"""

import os

if os.environ.get("PRAGDEC_PURE"):
    from pragdec._kernels import _pure as _impl
else:
    try:
        from pragdec._kernels import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        from pragdec._kernels import _pure as _impl

BACKEND = _impl.BACKEND
logsumexp = _impl.logsumexp
jm_blend = _impl.jm_blend
per_token_target_logpost = _impl.per_token_target_logpost
combine_and_normalize = _impl.combine_and_normalize

__all__ = [
    "BACKEND",
    "logsumexp",
    "jm_blend",
    "per_token_target_logpost",
    "combine_and_normalize",
]
