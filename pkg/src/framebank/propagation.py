"""Most-similar token propagation against the feature memory.

Each current-frame token is either kept or replaced by an exact copy of
its best-matching cached token — never a blend — and only when the match
score clears the similarity threshold. A deliberately naive per-token
reference implementation (``propagate_bruteforce``) pins the contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from framebank import kernels
from framebank.memory import FeatureTokenMap, MemoryBank

Array = np.ndarray

SIMILARITIES = ("cosine", "dot")


@dataclass(frozen=True)
class PropagationConfig:
    lam: float = 0.9
    similarity: str = "cosine"

    def __post_init__(self) -> None:
        if not np.isfinite(self.lam):
            raise ValueError("similarity threshold must be finite")
        if self.similarity not in SIMILARITIES:
            raise ValueError(
                f"unknown similarity {self.similarity!r}; expected one of {SIMILARITIES}"
            )


@dataclass
class PropagationResult:
    """Per-token outcome of one propagation pass.

    source_frame/source_token are -1 where the token kept itself;
    best_similarity always carries the best score found, even below the
    threshold (or -1.0 when the bank was empty and nothing was searched).
    """

    tokens_out: Array
    source_frame: Array
    source_token: Array
    best_similarity: Array

    def source(self, i: int) -> Optional[tuple[int, int]]:
        if self.source_frame[i] < 0:
            return None
        return int(self.source_frame[i]), int(self.source_token[i])

    @property
    def replaced_fraction(self) -> float:
        return float(np.mean(self.source_frame >= 0))


def similarity_scores(current: FeatureTokenMap, memory_tokens: Array) -> Array:
    """Cosine similarity of every current row against every memory row.

    Zero-norm rows on either side score 0 against everything.
    """
    if memory_tokens.ndim != 2 or memory_tokens.shape[0] == 0:
        raise ValueError("memory is empty")
    if memory_tokens.shape[1] != current.dim:
        raise ValueError(
            f"dimension mismatch: current {current.dim}, memory {memory_tokens.shape[1]}"
        )
    cur_norms = current.row_norms()
    mem_norms = np.linalg.norm(memory_tokens, axis=1)
    scores = current.tokens @ memory_tokens.T
    scores /= np.where(cur_norms == 0.0, 1.0, cur_norms)[:, None]
    scores /= np.where(mem_norms == 0.0, 1.0, mem_norms)[None, :]
    return scores


def select_best(scores: Array) -> tuple[Array, Array]:
    """Per row, the maximizing column and its score; ties break to the
    lowest column index."""
    if scores.ndim != 2 or scores.shape[1] == 0:
        raise ValueError("score matrix must have at least one column")
    idx = np.argmax(scores, axis=1)
    return idx, scores[np.arange(scores.shape[0]), idx]


def _identity_result(current: FeatureTokenMap) -> PropagationResult:
    n = current.n_tokens
    return PropagationResult(
        tokens_out=current.tokens.copy(),
        source_frame=np.full(n, -1, dtype=np.intp),
        source_token=np.full(n, -1, dtype=np.intp),
        best_similarity=np.full(n, -1.0),
    )


def propagate(
    current: FeatureTokenMap,
    bank: MemoryBank,
    cfg: PropagationConfig = PropagationConfig(),
    impl: str = "auto",
) -> PropagationResult:
    """Replace each token with its best cached match when the score
    reaches the threshold; otherwise keep the input token. An empty bank
    yields the identity."""
    if len(bank) == 0:
        return _identity_result(current)
    mem_tokens, mem_norms, prov_frames, prov_tokens = bank.concat_arrays()
    if mem_tokens.shape[1] != current.dim:
        raise ValueError(
            f"dimension mismatch: current {current.dim}, bank {mem_tokens.shape[1]}"
        )
    best_idx, best_score = kernels.argmax_similarity(
        current.tokens,
        current.row_norms(),
        mem_tokens,
        mem_norms,
        normalize=cfg.similarity == "cosine",
        impl=impl,
    )
    replaced = best_score >= cfg.lam
    tokens_out = current.tokens.copy()
    tokens_out[replaced] = mem_tokens[best_idx[replaced]]
    source_frame = np.where(replaced, prov_frames[best_idx], -1)
    source_token = np.where(replaced, prov_tokens[best_idx], -1)
    return PropagationResult(
        tokens_out=tokens_out,
        source_frame=source_frame.astype(np.intp),
        source_token=source_token.astype(np.intp),
        best_similarity=best_score,
    )


def propagate_bruteforce(
    current: FeatureTokenMap,
    bank: MemoryBank,
    cfg: PropagationConfig = PropagationConfig(),
) -> PropagationResult:
    """Reference oracle: explicit per-token scan over every stored row,
    no batching, no cached norms. Same contract as propagate."""
    if len(bank) == 0:
        return _identity_result(current)
    rows: list[tuple[int, int, Array]] = []
    for entry in bank.entries:
        if entry.dim != current.dim:
            raise ValueError(
                f"dimension mismatch: current {current.dim}, bank {entry.dim}"
            )
        for k in range(entry.n_tokens):
            rows.append((entry.frame_index, k, entry.tokens[k]))

    n = current.n_tokens
    tokens_out = current.tokens.copy()
    source_frame = np.full(n, -1, dtype=np.intp)
    source_token = np.full(n, -1, dtype=np.intp)
    best_similarity = np.empty(n)
    for i in range(n):
        cur_row = current.tokens[i]
        best = None
        best_j = -1
        for j, (_, _, mem_row) in enumerate(rows):
            if cfg.similarity == "cosine":
                na = float(np.sqrt(np.dot(cur_row, cur_row)))
                nb = float(np.sqrt(np.dot(mem_row, mem_row)))
                score = 0.0 if na == 0.0 or nb == 0.0 else float(np.dot(cur_row, mem_row)) / (na * nb)
            else:
                score = float(np.dot(cur_row, mem_row))
            if best is None or score > best:
                best = score
                best_j = j
        best_similarity[i] = best
        if best >= cfg.lam:
            frame, k, mem_row = rows[best_j]
            tokens_out[i] = mem_row
            source_frame[i] = frame
            source_token[i] = k
    return PropagationResult(
        tokens_out=tokens_out,
        source_frame=source_frame,
        source_token=source_token,
        best_similarity=best_similarity,
    )
