"""Bounded spatio-temporal feature memory.

A ``MemoryBank`` keeps per-frame spatial-attention token maps in frame
order, capped at a fixed capacity. When full, an insertion scans the
stored neighbor distances from newest to oldest and evicts the right
endpoint of the first gap that is no wider than the gap to the incoming
frame; the very first stored frame is never an eviction candidate. If
every stored gap is wider, the incoming frame is dropped (reported, not
raised). Over consecutive-frame streams this keeps the retained frames
spread roughly evenly from the start of the video to the present.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

Array = np.ndarray

METRICS = ("frame-gap", "mean-token-cosine-distance")


@dataclass
class FeatureTokenMap:
    """One frame's spatial-attention tokens (n_tokens x dim) for one layer."""

    frame_index: int
    layer_id: str
    tokens: Array
    norms: Optional[Array] = None

    def __post_init__(self) -> None:
        self.tokens = np.ascontiguousarray(self.tokens, dtype=np.float64)
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1 or self.tokens.shape[1] < 1:
            raise ValueError(f"tokens must be a nonempty 2-D matrix, got shape {self.tokens.shape}")
        if not np.all(np.isfinite(self.tokens)):
            raise ValueError("tokens must be finite")
        if self.norms is not None:
            self.norms = np.ascontiguousarray(self.norms, dtype=np.float64)
            expected = np.linalg.norm(self.tokens, axis=1)
            scale = np.maximum(expected, 1e-300)
            if self.norms.shape != expected.shape or np.any(
                np.abs(self.norms - expected) > 1e-6 * scale
            ):
                raise ValueError("supplied norms do not match token rows")

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    def row_norms(self) -> Array:
        """Euclidean norm per token row, computed once and cached."""
        if self.norms is None:
            self.norms = np.linalg.norm(self.tokens, axis=1)
        return self.norms


def _mean_row_cosine(a: FeatureTokenMap, b: FeatureTokenMap) -> float:
    ma = a.tokens.mean(axis=0)
    mb = b.tokens.mean(axis=0)
    na = float(np.linalg.norm(ma))
    nb = float(np.linalg.norm(mb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(ma @ mb) / (na * nb)


def entry_distance(a: FeatureTokenMap, b: FeatureTokenMap, metric: str) -> float:
    """Distance between two stored frames under the bank's eviction metric."""
    if metric == "frame-gap":
        return float(abs(a.frame_index - b.frame_index))
    if metric == "mean-token-cosine-distance":
        if a.tokens.shape[1] != b.tokens.shape[1]:
            raise ValueError(
                f"token dim mismatch {a.tokens.shape[1]} vs {b.tokens.shape[1]}"
            )
        return 1.0 - _mean_row_cosine(a, b)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class InsertReport:
    admitted: bool
    evicted_frame: Optional[int] = None


@dataclass
class MemoryBank:
    """Ordered, capacity-bounded sequence of FeatureTokenMap entries.

    Single-writer: insertions must arrive in strictly increasing frame
    order. All entries share (n_tokens, dim, layer_id).
    """

    capacity: int
    metric: str = "frame-gap"
    entries: list[FeatureTokenMap] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        self._concat_cache: Optional[tuple[Array, Array, Array, Array]] = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def frame_indices(self) -> list[int]:
        return [e.frame_index for e in self.entries]

    def _check_compatible(self, entry: FeatureTokenMap) -> None:
        if not self.entries:
            return
        head = self.entries[0]
        if entry.frame_index <= self.entries[-1].frame_index:
            raise ValueError(
                f"frame_index {entry.frame_index} not greater than last stored "
                f"{self.entries[-1].frame_index}"
            )
        if entry.tokens.shape != head.tokens.shape:
            raise ValueError(
                f"token shape {entry.tokens.shape} incompatible with bank "
                f"shape {head.tokens.shape}"
            )
        if entry.layer_id != head.layer_id:
            raise ValueError(
                f"layer_id {entry.layer_id!r} does not match bank layer {head.layer_id!r}"
            )

    def insert(self, entry: FeatureTokenMap) -> InsertReport:
        """Admit a new frame, possibly evicting one stored frame.

        Below capacity the entry is appended. At capacity, with stored
        neighbor gaps k_1..k_{n-1} and k' the gap between the newest stored
        frame and the candidate, the scan runs j = n-1 down to 1 and evicts
        the (j+1)-th stored entry at the first j with k_j <= k'. When no
        such j exists the candidate is not admitted.
        """
        entry.row_norms()  # cache norms at insertion; the propagation search reuses them
        self._check_compatible(entry)
        if len(self.entries) < self.capacity:
            self.entries.append(entry)
            self._concat_cache = None
            return InsertReport(admitted=True)

        gaps = [
            entry_distance(self.entries[j], self.entries[j + 1], self.metric)
            for j in range(len(self.entries) - 1)
        ]  # gaps[j-1] is the 1-based k_j
        k_new = entry_distance(self.entries[-1], entry, self.metric)
        for j in range(len(self.entries) - 1, 0, -1):
            if gaps[j - 1] <= k_new:
                evicted = self.entries.pop(j)  # the 1-based entry j+1
                self.entries.append(entry)
                self._concat_cache = None
                return InsertReport(admitted=True, evicted_frame=evicted.frame_index)
        return InsertReport(admitted=False)

    def concat_tokens(self) -> tuple[Array, list[tuple[int, int]]]:
        """All stored token rows stacked in (entry, token) order, with
        (frame_index, token_index) provenance per row."""
        if not self.entries:
            raise ValueError("bank is empty")
        matrix = np.concatenate([e.tokens for e in self.entries], axis=0)
        provenance = [
            (e.frame_index, i) for e in self.entries for i in range(e.n_tokens)
        ]
        return matrix, provenance

    def concat_arrays(self) -> tuple[Array, Array, Array, Array]:
        """(tokens, norms, provenance frames, provenance token indices) as
        contiguous arrays, cached between insertions for the search kernel."""
        if not self.entries:
            raise ValueError("bank is empty")
        if self._concat_cache is None:
            tokens = np.ascontiguousarray(
                np.concatenate([e.tokens for e in self.entries], axis=0)
            )
            norms = np.concatenate([e.row_norms() for e in self.entries])
            frames = np.concatenate(
                [np.full(e.n_tokens, e.frame_index, dtype=np.intp) for e in self.entries]
            )
            token_idx = np.concatenate(
                [np.arange(e.n_tokens, dtype=np.intp) for e in self.entries]
            )
            self._concat_cache = (tokens, norms, frames, token_idx)
        return self._concat_cache

    def retained_floats(self) -> int:
        """Number of float64 values currently held (the storage counter)."""
        return sum(e.tokens.size for e in self.entries)
