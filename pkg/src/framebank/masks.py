"""Instance masks from cross-attention, with temporal overlap.

Mask extraction thresholds the per-pixel attention mass on selected
prompt words. Because single-frame masks tend to lose fragments, two
consecutive frames' mask contours are merged and hole-filled to produce
the final per-frame instance mask.

Raw query/key products are normalized with a scaled row softmax before
thresholding so the threshold acts on probabilities; the unnormalized
product is available behind ``mode="raw"`` for ablation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Array = np.ndarray

_NEIGHBORS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_NEIGHBORS_8 = _NEIGHBORS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def _neighbors(connectivity: int):
    if connectivity == 4:
        return _NEIGHBORS_4
    if connectivity == 8:
        return _NEIGHBORS_8
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


@dataclass
class BinaryMask:
    bits: Array

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2 or self.bits.shape[0] < 1 or self.bits.shape[1] < 1:
            raise ValueError(f"mask must be a nonempty 2-D grid, got shape {self.bits.shape}")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def pixel_count(self) -> int:
        return int(self.bits.sum())

    def complement(self) -> "BinaryMask":
        return BinaryMask(~self.bits)


@dataclass
class AttentionRecord:
    """Cross-attention Q/K for one (frame, step, layer, head).

    q maps spatial tokens to the key dimension, k maps prompt words to it;
    n_tokens must equal h * w of the declared spatial shape.
    """

    frame_index: int
    step_index: int
    layer_id: str
    head_index: int
    q: Array
    k: Array
    spatial_shape: tuple[int, int]

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=np.float64)
        self.k = np.asarray(self.k, dtype=np.float64)
        h, w = self.spatial_shape
        if self.q.ndim != 2 or self.k.ndim != 2:
            raise ValueError("q and k must be 2-D")
        if self.q.shape[1] != self.k.shape[1]:
            raise ValueError(
                f"key-dim mismatch: q {self.q.shape[1]} vs k {self.k.shape[1]}"
            )
        if self.q.shape[0] != h * w:
            raise ValueError(
                f"q has {self.q.shape[0]} tokens but spatial shape {h}x{w} needs {h * w}"
            )
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.k))):
            raise ValueError("attention matrices must be finite")

    @property
    def n_words(self) -> int:
        return self.k.shape[0]


@dataclass
class WordSelection:
    flags: Array

    def __post_init__(self) -> None:
        self.flags = np.asarray(self.flags)
        if not np.all(np.isin(self.flags, (0, 1))):
            raise ValueError("selection flags must be 0/1")
        self.flags = self.flags.astype(np.float64)
        if self.flags.ndim != 1 or self.flags.sum() < 1:
            raise ValueError("at least one word must be selected")

    @classmethod
    def from_indices(cls, indices: Iterable[int], n_words: int) -> "WordSelection":
        flags = np.zeros(n_words)
        for i in indices:
            if not 0 <= i < n_words:
                raise ValueError(f"word index {i} out of range [0, {n_words})")
            flags[i] = 1.0
        return cls(flags)


@dataclass(frozen=True)
class MaskConfig:
    """Aggregation policy: which steps/layers feed the attention mean and
    the threshold applied to the selected-word mass."""

    tau: float = 0.3
    step_range: tuple[int, int] = (0, 0)
    layer_set: tuple[str, ...] = ()
    reduce: str = "mean"

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.step_range[0] > self.step_range[1]:
            raise ValueError(f"empty step range {self.step_range}")
        if not self.layer_set:
            raise ValueError("layer_set must be nonempty")
        if self.reduce != "mean":
            raise ValueError(f"unsupported reduce {self.reduce!r}")


def attention_prob(rec: AttentionRecord, mode: str = "softmax") -> Array:
    """Token-to-word attention map. Softmax rows are probability
    distributions over words; raw mode returns the plain product."""
    logits = rec.q @ rec.k.T
    if mode == "raw":
        return logits
    if mode != "softmax":
        raise ValueError(f"unknown mode {mode!r}")
    logits = logits / np.sqrt(rec.q.shape[1])
    logits -= logits.max(axis=1, keepdims=True)
    expd = np.exp(logits)
    return expd / expd.sum(axis=1, keepdims=True)


def upsample_prob(prob: Array, shape: tuple[int, int], target: tuple[int, int]) -> Array:
    """Nearest-neighbor upsample of a token-major probability map to a
    finer spatial grid (exact integer scale)."""
    h, w = shape
    H, W = target
    if (h, w) == (H, W):
        return prob
    if H < h or W < w or H % h or W % w:
        raise ValueError(f"cannot upsample {h}x{w} to {H}x{W}: non-integer scale")
    grid = prob.reshape(h, w, -1)
    grid = np.repeat(np.repeat(grid, H // h, axis=0), W // w, axis=1)
    return grid.reshape(H * W, -1)


def aggregate(records: Sequence[AttentionRecord], cfg: MaskConfig, mode: str = "softmax") -> tuple[Array, tuple[int, int]]:
    """Mean attention map over all heads of the selected steps/layers,
    upsampled to the largest spatial shape among them. Returns the map
    and that shape."""
    lo, hi = cfg.step_range
    chosen = [
        r for r in records if lo <= r.step_index <= hi and r.layer_id in cfg.layer_set
    ]
    if not chosen:
        raise ValueError(
            f"no attention records selected (steps {cfg.step_range}, layers {cfg.layer_set})"
        )
    target = max((r.spatial_shape for r in chosen), key=lambda s: s[0] * s[1])
    total = np.zeros((target[0] * target[1], chosen[0].n_words))
    for r in chosen:
        if r.n_words != total.shape[1]:
            raise ValueError("records disagree on word count")
        total += upsample_prob(attention_prob(r, mode), r.spatial_shape, target)
    return total / len(chosen), target


def extract_mask(prob: Array, sel: WordSelection, tau: float, shape: tuple[int, int]) -> BinaryMask:
    """Threshold the summed selected-word mass per pixel (strict >)."""
    h, w = shape
    if prob.shape[0] != h * w:
        raise ValueError(f"prob has {prob.shape[0]} rows but shape {h}x{w} needs {h * w}")
    if prob.shape[1] != len(sel.flags):
        raise ValueError(
            f"prob has {prob.shape[1]} words but selection has {len(sel.flags)}"
        )
    mass = prob @ sel.flags
    return BinaryMask((mass > tau).reshape(h, w))


def _label_components(bits: Array, connectivity: int) -> list[list[tuple[int, int]]]:
    nbrs = _neighbors(connectivity)
    h, w = bits.shape
    seen = np.zeros_like(bits, dtype=bool)
    components = []
    for sy in range(h):
        for sx in range(w):
            if not bits[sy, sx] or seen[sy, sx]:
                continue
            comp = []
            queue = deque([(sy, sx)])
            seen[sy, sx] = True
            while queue:
                y, x = queue.popleft()
                comp.append((y, x))
                for dy, dx in nbrs:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            components.append(comp)
    return components


def contours(mask: BinaryMask, connectivity: int = 4) -> list[set[tuple[int, int]]]:
    """Per connected component, the set of its pixels that touch background
    or the image border."""
    nbrs = _neighbors(connectivity)
    bits = mask.bits
    h, w = bits.shape
    result = []
    for comp in _label_components(bits, connectivity):
        edge = set()
        for y, x in comp:
            for dy, dx in nbrs:
                ny, nx = y + dy, x + dx
                if not (0 <= ny < h and 0 <= nx < w) or not bits[ny, nx]:
                    edge.add((y, x))
                    break
        result.append(edge)
    return result


def contour_mask(mask: BinaryMask, connectivity: int = 4) -> BinaryMask:
    """Union of all component contours as a mask."""
    bits = np.zeros_like(mask.bits)
    for edge in contours(mask, connectivity):
        for y, x in edge:
            bits[y, x] = True
    return BinaryMask(bits)


def fill(mask: BinaryMask, connectivity: int = 4) -> BinaryMask:
    """Foreground plus every hole it encloses: the complement is flooded
    from the image border and whatever the flood cannot reach is set."""
    bits = mask.bits
    h, w = bits.shape
    nbrs = _neighbors(connectivity)
    outside = np.zeros_like(bits)
    queue: deque[tuple[int, int]] = deque()
    for y in range(h):
        for x in (0, w - 1):
            if not bits[y, x] and not outside[y, x]:
                outside[y, x] = True
                queue.append((y, x))
    for x in range(w):
        for y in (0, h - 1):
            if not bits[y, x] and not outside[y, x]:
                outside[y, x] = True
                queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        for dy, dx in nbrs:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not bits[ny, nx] and not outside[ny, nx]:
                outside[ny, nx] = True
                queue.append((ny, nx))
    return BinaryMask(~outside)


def temporal_overlap(mask_prev: BinaryMask, mask_cur: BinaryMask, connectivity: int = 4) -> BinaryMask:
    """Union of both masks plus any region enclosed by their combined
    contours; recovers parts missing from one frame's mask when the other
    frame closes the gap."""
    if mask_prev.bits.shape != mask_cur.bits.shape:
        raise ValueError(
            f"mask shape mismatch {mask_prev.bits.shape} vs {mask_cur.bits.shape}"
        )
    union_contours = BinaryMask(
        contour_mask(mask_prev, connectivity).bits | contour_mask(mask_cur, connectivity).bits
    )
    filled = fill(union_contours, connectivity)
    return BinaryMask(filled.bits | mask_prev.bits | mask_cur.bits)


def upsample_nearest(mask: BinaryMask, target: tuple[int, int]) -> BinaryMask:
    """Expand each source pixel into an (H/h x W/w) block; the target must
    be an exact multiple of the source."""
    h, w = mask.bits.shape
    H, W = target
    if H < h or W < w or H % h or W % w:
        raise ValueError(f"cannot upsample {h}x{w} to {H}x{W}: non-integer scale")
    return BinaryMask(np.repeat(np.repeat(mask.bits, H // h, axis=0), W // w, axis=1))
