"""Similarity-search kernel dispatch.

The compiled extension (BLAS products fused with a single-pass argmax
scan; needs scipy at import) is preferred when present; a blocked numpy
implementation provides identical results otherwise. Setting the
environment variable ``FRAMEBANK_PURE=1`` forces the numpy path, which is
also what the benchmark uses to compare the two.
"""

from __future__ import annotations

import os

import numpy as np

Array = np.ndarray

try:
    from framebank import _simkernel
except ImportError:
    _simkernel = None

_BLOCK_ROWS = 2048


def have_compiled_kernel() -> bool:
    return _simkernel is not None


def _active_impl() -> str:
    if _simkernel is None or os.environ.get("FRAMEBANK_PURE") == "1":
        return "python"
    return "compiled"


def argmax_similarity_python(
    cur: Array,
    cur_norms: Array,
    mem: Array,
    mem_norms: Array,
    normalize: bool,
) -> tuple[Array, Array]:
    """Blocked matrix-product search: per current row, the best-scoring
    memory row (ties -> lowest index) and its score."""
    n, d = cur.shape
    if mem.shape[1] != d:
        raise ValueError("dimension mismatch between current and memory tokens")
    if mem.shape[0] == 0:
        raise ValueError("memory is empty")
    if normalize:
        # a zero norm implies an all-zero row, so guarding the divisor is enough
        cur_safe = cur / np.where(cur_norms == 0.0, 1.0, cur_norms)[:, None]
    else:
        cur_safe = cur
    best_idx = np.zeros(n, dtype=np.intp)
    best_score = np.full(n, -np.inf)
    for start in range(0, mem.shape[0], _BLOCK_ROWS):
        block = mem[start : start + _BLOCK_ROWS]
        scores = cur_safe @ block.T
        if normalize:
            block_norms = mem_norms[start : start + _BLOCK_ROWS]
            zero = block_norms == 0.0
            scores /= np.where(zero, 1.0, block_norms)[None, :]
            scores[:, zero] = 0.0
        local_idx = np.argmax(scores, axis=1)
        local_best = scores[np.arange(n), local_idx]
        better = local_best > best_score
        best_score = np.where(better, local_best, best_score)
        best_idx = np.where(better, local_idx + start, best_idx)
    return best_idx, best_score


def argmax_similarity(
    cur: Array,
    cur_norms: Array,
    mem: Array,
    mem_norms: Array,
    normalize: bool = True,
    impl: str = "auto",
) -> tuple[Array, Array]:
    """Best memory row per current token.

    impl: "auto" (compiled when built, unless FRAMEBANK_PURE=1),
    "compiled", or "python".
    """
    if impl == "auto":
        impl = _active_impl()
    if impl == "compiled":
        if _simkernel is None:
            raise RuntimeError("compiled kernel not built; reinstall with Cython available")
        cur = np.ascontiguousarray(cur, dtype=np.float64)
        mem = np.ascontiguousarray(mem, dtype=np.float64)
        cur_norms = np.ascontiguousarray(cur_norms, dtype=np.float64)
        mem_norms = np.ascontiguousarray(mem_norms, dtype=np.float64)
        out_idx = np.empty(cur.shape[0], dtype=np.intp)
        out_score = np.empty(cur.shape[0], dtype=np.float64)
        _simkernel.argmax_similarity(
            cur, cur_norms, mem, mem_norms, normalize, out_idx, out_score
        )
        return out_idx, out_score
    if impl == "python":
        return argmax_similarity_python(cur, cur_norms, mem, mem_norms, normalize)
    raise ValueError(f"unknown kernel impl {impl!r}")
