"""Per-frame edit orchestration.

Each frame is inverted to noise under the source conditioning, then
sampled under the edit conditioning. A sampling-step hook receives the
backend's feature/attention observations and, in order: propagates the
spatial tokens against the per-layer memory banks, pushes the propagated
tokens back to the backend, captures the designated step's tokens for the
bank update (committed when the frame finishes, so a frame never matches
against itself), accumulates attention for mask extraction, and injects
source-latent background once a mask is finalized and the step falls in
the injection window.

``replay_edit`` applies the same memory/propagation/mask machinery to
recorded feature dumps instead of a live backend; no latents are sampled.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from framebank.blend import InjectionWindow, in_window, inject_background
from framebank.diffusion import (
    DenoiserBackend,
    GuidanceConfig,
    GuidedBackend,
    NoiseSchedule,
    ddim_invert,
    ddim_sample,
    ddim_step,
    make_linear_schedule,
)
from framebank.masks import (
    AttentionRecord,
    BinaryMask,
    MaskConfig,
    WordSelection,
    aggregate,
    extract_mask,
    temporal_overlap,
    upsample_nearest,
)
from framebank.memory import METRICS, FeatureTokenMap, MemoryBank
from framebank.propagation import PropagationConfig, propagate
from framebank.tensorio import ManifestError, ManifestRecord, read_manifest, read_tensor

Array = np.ndarray


@dataclass
class LatentVideo:
    frames: list[Array]

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError("video needs at least one frame")
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.shape != shape:
                raise ValueError(f"frame {i} shape {f.shape} != frame 0 shape {shape}")
            if not np.all(np.isfinite(f)):
                raise ValueError(f"frame {i} has non-finite values")

    @property
    def frame_shape(self) -> tuple[int, ...]:
        return self.frames[0].shape

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class StepObservations:
    """What an observing backend surfaces after one noise prediction."""

    features: dict[str, FeatureTokenMap] = field(default_factory=dict)
    attention: list[AttentionRecord] = field(default_factory=list)


@dataclass
class EditConfig:
    steps: int = 50
    guidance: float = 7.5
    lam: float = 0.9
    sfm_len: int = 5
    sfm_metric: str = "frame-gap"
    sfm_update_step: Optional[int] = None  # 1-based completed sampling step; None = midpoint
    tau: float = 0.3
    mask_start: float = 0.0  # aggregation window, elapsed-step fractions
    mask_end: float = 0.5
    mask_layers: Optional[tuple[str, ...]] = None  # None = auto (side-16 layers if present)
    inject_start: float = 0.2
    inject_end: float = 1.0
    seed: int = 0
    similarity: str = "cosine"
    attention_mode: str = "softmax"
    connectivity: int = 4
    beta_start: float = 0.00085
    beta_end: float = 0.012
    cache_src_trajectory: bool = True

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.guidance < 0:
            raise ValueError(f"guidance must be >= 0, got {self.guidance}")
        if self.sfm_len < 1:
            raise ValueError(f"sfm_len must be >= 1, got {self.sfm_len}")
        if self.sfm_metric not in METRICS:
            raise ValueError(f"unknown sfm_metric {self.sfm_metric!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if not 0.0 <= self.mask_start <= self.mask_end <= 1.0:
            raise ValueError("mask aggregation window must satisfy 0 <= start <= end <= 1")
        if not 0.0 <= self.inject_start <= self.inject_end <= 1.0:
            raise ValueError("injection window must satisfy 0 <= start <= end <= 1")
        if self.sfm_update_step is not None and not 1 <= self.sfm_update_step <= self.steps:
            raise ValueError(f"sfm_update_step must be in [1, {self.steps}]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        # delegate range checks to the component configs
        PropagationConfig(lam=self.lam, similarity=self.similarity)
        InjectionWindow(self.inject_start, self.inject_end)

    def schedule(self) -> NoiseSchedule:
        return make_linear_schedule(self.steps, self.beta_start, self.beta_end)

    def propagation(self) -> PropagationConfig:
        return PropagationConfig(lam=self.lam, similarity=self.similarity)

    def window(self) -> InjectionWindow:
        return InjectionWindow(self.inject_start, self.inject_end)

    def update_step(self) -> int:
        return self.sfm_update_step if self.sfm_update_step is not None else (self.steps + 1) // 2

    def aggregation_steps(self) -> tuple[int, int]:
        """Completed-step range [lo, hi] over which attention is pooled."""
        lo = max(1, math.ceil(self.mask_start * self.steps))
        hi = max(lo, math.floor(self.mask_end * self.steps))
        return lo, min(hi, self.steps)


@dataclass
class StepRecord:
    frame: int
    step: int  # completed sampling steps, 1-based
    latent_norm: float
    replaced_fraction: Optional[float]
    injected: bool


@dataclass
class FrameRecord:
    frame: int
    replacement_rate: Optional[float]
    evictions: dict[str, Optional[int]]
    dropped_layers: list[str]
    mask_pixels: int


@dataclass
class EditReport:
    steps: list[StepRecord] = field(default_factory=list)
    frames: list[FrameRecord] = field(default_factory=list)
    retained_per_layer: dict[str, int] = field(default_factory=dict)
    peak_retained_floats: int = 0
    transient_floats: int = 0
    wall_time_s: float = 0.0
    designated_features: dict[str, list[FeatureTokenMap]] = field(default_factory=dict)

    def to_jsonl(self) -> str:
        """Deterministic line-delimited form. Volatile fields (wall time)
        stay out so identical runs serialize identically."""
        lines = []
        for s in self.steps:
            lines.append(
                json.dumps(
                    {
                        "kind": "step",
                        "frame": s.frame,
                        "step": s.step,
                        "latent_norm": s.latent_norm,
                        "replaced_fraction": s.replaced_fraction,
                        "injected": s.injected,
                    }
                )
            )
        for f in self.frames:
            lines.append(
                json.dumps(
                    {
                        "kind": "frame",
                        "frame": f.frame,
                        "replacement_rate": f.replacement_rate,
                        "evictions": f.evictions,
                        "dropped_layers": f.dropped_layers,
                        "mask_pixels": f.mask_pixels,
                    }
                )
            )
        lines.append(
            json.dumps(
                {
                    "kind": "run",
                    "retained_per_layer": self.retained_per_layer,
                    "peak_retained_floats": self.peak_retained_floats,
                    "transient_floats": self.transient_floats,
                }
            )
        )
        return "\n".join(lines) + "\n"


def _auto_layers(records: Sequence[AttentionRecord]) -> tuple[str, ...]:
    """Default layer choice: spatial side 16 when available, else all."""
    side16 = {r.layer_id for r in records if r.spatial_shape[0] == 16}
    if side16:
        return tuple(sorted(side16))
    return tuple(sorted({r.layer_id for r in records}))


class _FrameMaskTracker:
    """Carries the previous frame's raw extracted mask and produces the
    temporally overlapped mask for the current frame."""

    def __init__(self, cfg: EditConfig, words: Optional[WordSelection], default_indices=(1,)):
        self.cfg = cfg
        self.words = words
        self.default_indices = default_indices
        self.prev_raw: Optional[BinaryMask] = None

    def selection(self, n_words: int) -> WordSelection:
        if self.words is None:
            self.words = WordSelection.from_indices(self.default_indices, n_words)
        return self.words

    def finalize(self, records: Sequence[AttentionRecord]) -> BinaryMask:
        cfg = self.cfg
        layers = cfg.mask_layers or _auto_layers(records)
        steps = sorted({r.step_index for r in records})
        mask_cfg = MaskConfig(
            tau=cfg.tau,
            step_range=(steps[0], steps[-1]),
            layer_set=tuple(layers),
        )
        prob, shape = aggregate(records, mask_cfg, mode=cfg.attention_mode)
        raw = extract_mask(prob, self.selection(prob.shape[1]), cfg.tau, shape)
        prev = self.prev_raw if self.prev_raw is not None else raw
        if prev.bits.shape != raw.bits.shape:
            raise ValueError("mask spatial shape drifted between frames")
        overlapped = temporal_overlap(prev, raw, cfg.connectivity)
        self.prev_raw = raw
        return overlapped


def edit_video(
    src: LatentVideo,
    src_cond: object,
    edit_cond: object,
    cfg: EditConfig,
    backend: DenoiserBackend,
    uncond: object = None,
    word_selection: Optional[WordSelection] = None,
) -> tuple[LatentVideo, list[BinaryMask], EditReport]:
    """Edit every frame of ``src``; see the module docstring for the
    per-step hook order. Frames run strictly sequentially because both the
    memory bank and the temporal mask overlap chain on frame order."""
    t0 = time.perf_counter()
    sched = cfg.schedule()
    T = cfg.steps
    prop_cfg = cfg.propagation()
    window = cfg.window()
    update_step = cfg.update_step()
    agg_lo, agg_hi = cfg.aggregation_steps()

    banks: dict[str, MemoryBank] = {}
    tracker = _FrameMaskTracker(cfg, word_selection)
    report = EditReport()
    edited: list[Array] = []
    masks: list[BinaryMask] = []
    latent_hw = src.frame_shape[-2:]

    if cfg.guidance != 1.0 and uncond is not None:
        sample_backend: DenoiserBackend = GuidedBackend(
            backend, uncond, GuidanceConfig(cfg.guidance)
        )
    else:
        sample_backend = backend

    for f in range(len(src)):
        begin = getattr(backend, "begin_frame", None)
        if begin is not None:
            begin(f)
        try:
            traj = ddim_invert(src.frames[f], backend, sched, src_cond)
        except Exception as exc:
            raise RuntimeError(f"frame {f}: inversion failed") from exc
        if cfg.cache_src_trajectory:
            src_latent_at = traj.__getitem__
        else:
            # memory/speed trade-off: hold only the clean latent and re-run
            # the (deterministic) inversion prefix whenever a source latent
            # is needed, keeping per-frame storage independent of T
            z_clean, z_noisy = traj[0], traj[-1]

            def src_latent_at(level_index: int, _z0=z_clean) -> Array:
                z = _z0
                for target in range(level_index):
                    eps = backend.predict_noise(z, target, src_cond)
                    z = ddim_step(z, eps, target - 1, target, sched)
                return z

            traj = [z_clean, z_noisy]

        frame_attn: list[AttentionRecord] = []
        pending: dict[str, FeatureTokenMap] = {}
        frame_mask: Optional[BinaryMask] = None
        frame_mask_small_pixels = 0
        replaced_fractions: list[float] = []

        def hook(t: int, latent: Array, obs: object) -> Optional[Array]:
            nonlocal frame_mask, frame_mask_small_pixels
            s = T - t  # completed steps
            step_replaced: Optional[float] = None
            if isinstance(obs, StepObservations):
                fractions = []
                for layer_id in sorted(obs.features):
                    fmap = obs.features[layer_id]
                    bank = banks.get(layer_id)
                    if bank is None:
                        bank = banks[layer_id] = MemoryBank(
                            capacity=cfg.sfm_len, metric=cfg.sfm_metric
                        )
                    result = propagate(fmap, bank, prop_cfg)
                    accept = getattr(backend, "accept_features", None)
                    if accept is not None:
                        accept(layer_id, result.tokens_out)
                    fractions.append(result.replaced_fraction)
                    if s == update_step:
                        pending[layer_id] = FeatureTokenMap(
                            frame_index=f, layer_id=layer_id, tokens=result.tokens_out
                        )
                if fractions:
                    step_replaced = float(np.mean(fractions))
                    replaced_fractions.append(step_replaced)
                if agg_lo <= s <= agg_hi:
                    frame_attn.extend(obs.attention)
            if s == agg_hi and frame_attn:
                small = tracker.finalize(frame_attn)
                frame_mask_small_pixels = small.pixel_count()
                frame_mask = upsample_nearest(small, latent_hw)
            out = None
            injected = False
            if frame_mask is not None and in_window(s / T, window):
                src_latent = src_latent_at(t)
                out = inject_background(latent, src_latent, frame_mask, s / T, window)
                injected = True
            report.steps.append(
                StepRecord(
                    frame=f,
                    step=s,
                    latent_norm=float(np.linalg.norm(out if out is not None else latent)),
                    replaced_fraction=step_replaced,
                    injected=injected,
                )
            )
            return out

        try:
            z = ddim_sample(traj[-1], sample_backend, sched, edit_cond, step_hooks=[hook])
        except Exception as exc:
            raise RuntimeError(f"frame {f}: sampling failed") from exc
        if z.shape != src.frame_shape:
            raise RuntimeError(f"frame {f}: latent shape drifted to {z.shape}")
        edited.append(z)

        evictions: dict[str, Optional[int]] = {}
        dropped: list[str] = []
        for layer_id in sorted(pending):
            rep = banks[layer_id].insert(pending[layer_id])
            evictions[layer_id] = rep.evicted_frame
            if not rep.admitted:
                dropped.append(layer_id)
            report.designated_features.setdefault(layer_id, []).append(pending[layer_id])
        if frame_mask is None:
            frame_mask = BinaryMask(np.ones(latent_hw, dtype=bool))
        masks.append(frame_mask)
        report.frames.append(
            FrameRecord(
                frame=f,
                replacement_rate=(
                    float(np.mean(replaced_fractions)) if replaced_fractions else None
                ),
                evictions=evictions,
                dropped_layers=dropped,
                mask_pixels=frame_mask_small_pixels,
            )
        )
        retained = {layer: bank.retained_floats() for layer, bank in banks.items()}
        report.retained_per_layer = retained
        report.peak_retained_floats = max(
            report.peak_retained_floats, sum(retained.values())
        )
        transient = (len(traj) + 1) * int(np.prod(src.frame_shape))
        report.transient_floats = max(report.transient_floats, transient)

    report.wall_time_s = time.perf_counter() - t0
    return LatentVideo(edited), masks, report


# ---------------------------------------------------------------------------
# replay over recorded feature dumps


def _records_by_frame(records: Sequence[ManifestRecord]):
    frames: dict[int, list[ManifestRecord]] = {}
    for r in records:
        frames.setdefault(r.frame_index, []).append(r)
    return dict(sorted(frames.items()))


def replay_edit(
    record_dir: str | Path,
    cfg: EditConfig,
    word_indices: Sequence[int] = (1,),
) -> tuple[dict[tuple[int, int, str], Array], list[BinaryMask], EditReport]:
    """Run memory/propagation/mask extraction over a recorded run.

    Every frame must carry the same (step, layer, kind) grid as the first
    frame; a missing tuple is an error naming it. Returns propagated
    feature tensors keyed by (frame, step, layer), the per-frame masks,
    and the report.
    """
    t0 = time.perf_counter()
    record_dir = Path(record_dir)
    manifest_path = record_dir / "manifest.tsv"
    if not manifest_path.is_file():
        raise ManifestError(f"no manifest at {manifest_path}")
    records = read_manifest(manifest_path)
    by_frame = _records_by_frame(records)
    if not by_frame:
        raise ManifestError("manifest has no records")

    first = next(iter(by_frame.values()))
    grid = sorted({(r.step_index, r.layer_id, r.kind) for r in first})
    feature_grid = [(s, l) for s, l, k in grid if k == "spatial_features"]
    attn_grid = [(s, l) for s, l, k in grid if k == "cross_q"]
    for s, l in attn_grid:
        if (s, l, "cross_k") not in grid:
            raise ManifestError(f"missing record step={s} layer={l} kind=cross_k")

    for frame_index, frame_records in by_frame.items():
        have = {(r.step_index, r.layer_id, r.kind) for r in frame_records}
        for s, l, k in grid:
            if (s, l, k) not in have:
                raise ManifestError(
                    f"missing record frame={frame_index} step={s} layer={l} kind={k}"
                )

    def load(frame: int, step: int, layer: str, kind: str) -> tuple[Array, tuple[int, int]]:
        rec = next(
            r
            for r in by_frame[frame]
            if r.step_index == step and r.layer_id == layer and r.kind == kind
        )
        return read_tensor(record_dir / rec.path), rec.spatial_shape

    steps_present = sorted({s for s, _ in feature_grid})
    if cfg.sfm_update_step is not None and 1 <= cfg.sfm_update_step <= len(steps_present):
        designated = steps_present[cfg.sfm_update_step - 1]
    else:
        designated = steps_present[(len(steps_present) - 1) // 2] if steps_present else None

    banks: dict[str, MemoryBank] = {}
    prop_cfg = cfg.propagation()
    report = EditReport()
    features_out: dict[tuple[int, int, str], Array] = {}
    masks: list[BinaryMask] = []
    tracker: Optional[_FrameMaskTracker] = None
    words = list(word_indices)
    shapes: dict[str, tuple[int, ...]] = {}

    for f, frame_records in by_frame.items():
        pending: dict[str, FeatureTokenMap] = {}
        replaced: list[float] = []
        for step, layer in feature_grid:
            tokens, _ = load(f, step, layer, "spatial_features")
            if tokens.ndim != 2:
                raise ManifestError(
                    f"spatial_features frame={f} step={step} layer={layer} must be 2-D"
                )
            if layer in shapes and shapes[layer] != tokens.shape:
                raise ManifestError(
                    f"shape drift frame={f} layer={layer}: {tokens.shape} vs {shapes[layer]}"
                )
            shapes[layer] = tokens.shape
            fmap = FeatureTokenMap(frame_index=f, layer_id=layer, tokens=tokens)
            bank = banks.get(layer)
            if bank is None:
                bank = banks[layer] = MemoryBank(capacity=cfg.sfm_len, metric=cfg.sfm_metric)
            result = propagate(fmap, bank, prop_cfg)
            features_out[(f, step, layer)] = result.tokens_out
            replaced.append(result.replaced_fraction)
            if step == designated:
                pending[layer] = FeatureTokenMap(frame_index=f, layer_id=layer, tokens=result.tokens_out)
            report.steps.append(
                StepRecord(
                    frame=f,
                    step=step,
                    latent_norm=float(np.linalg.norm(result.tokens_out)),
                    replaced_fraction=result.replaced_fraction,
                    injected=False,
                )
            )

        attn_records: list[AttentionRecord] = []
        for step, layer in attn_grid:
            q, shape = load(f, step, layer, "cross_q")
            k, _ = load(f, step, layer, "cross_k")
            attn_records.append(
                AttentionRecord(
                    frame_index=f,
                    step_index=step,
                    layer_id=layer,
                    head_index=0,
                    q=q,
                    k=k,
                    spatial_shape=shape,
                )
            )
        mask_pixels = 0
        if attn_records:
            if tracker is None:
                tracker = _FrameMaskTracker(cfg, None, default_indices=tuple(words))
            mask = tracker.finalize(attn_records)
            mask_pixels = mask.pixel_count()
            masks.append(mask)

        evictions: dict[str, Optional[int]] = {}
        dropped: list[str] = []
        for layer_id in sorted(pending):
            rep = banks[layer_id].insert(pending[layer_id])
            evictions[layer_id] = rep.evicted_frame
            if not rep.admitted:
                dropped.append(layer_id)
            report.designated_features.setdefault(layer_id, []).append(pending[layer_id])
        report.frames.append(
            FrameRecord(
                frame=f,
                replacement_rate=float(np.mean(replaced)) if replaced else None,
                evictions=evictions,
                dropped_layers=dropped,
                mask_pixels=mask_pixels,
            )
        )
        retained = {layer: bank.retained_floats() for layer, bank in banks.items()}
        report.retained_per_layer = retained
        report.peak_retained_floats = max(report.peak_retained_floats, sum(retained.values()))

    report.wall_time_s = time.perf_counter() - t0
    return features_out, masks, report


# ---------------------------------------------------------------------------
# deterministic synthetic backend


class SyntheticEditBackend:
    """Observing toy backend with analytic features and attention.

    Token vectors live on interleaved cos/sin coordinate pairs whose phase
    advances by ``drift_rate`` per frame, so every token is exactly unit
    norm and the cosine between a token and its successor-frame self is
    exactly cos(drift_rate). Cross-attention carries a one-hot hotspot on
    ``hotspot_word`` that moves one token per frame. Noise predictions are
    zero by default, or a flat conditioning-scaled value in "cond" mode so
    that edit and source trajectories genuinely diverge.
    """

    def __init__(
        self,
        seed: int = 0,
        latent_shape: tuple[int, int, int] = (4, 16, 16),
        grid: tuple[int, int] = (8, 8),
        feature_dim: int = 16,
        n_words: int = 4,
        drift_rate: float = 0.05,
        layers: tuple[str, ...] = ("sa.mid",),
        hotspot_word: int = 1,
        eps_mode: str = "zero",
    ):
        if feature_dim % 2:
            raise ValueError("feature_dim must be even")
        if eps_mode not in ("zero", "cond"):
            raise ValueError(f"unknown eps_mode {eps_mode!r}")
        self.seed = seed
        self.latent_shape = latent_shape
        self.grid = grid
        self.feature_dim = feature_dim
        self.n_words = n_words
        self.drift_rate = drift_rate
        self.layers = layers
        self.hotspot_word = hotspot_word
        self.eps_mode = eps_mode
        self.key_dim = max(n_words, 4)
        self.frame_index = 0
        self.accepted: dict[tuple[int, str], Array] = {}
        self._last_obs: Optional[StepObservations] = None
        self._bases: dict[int, tuple[Array, Array]] = {}

    def begin_frame(self, frame_index: int) -> None:
        self.frame_index = frame_index

    def accept_features(self, layer_id: str, tokens: Array) -> None:
        self.accepted[(self.frame_index, layer_id)] = tokens

    def _token_planes(self, layer_idx: int) -> tuple[Array, Array]:
        # per-token orthonormal 2-D rotation planes; random directions keep
        # cross-token similarity low so matches track each token's own history
        cached = self._bases.get(layer_idx)
        if cached is None:
            n = self.grid[0] * self.grid[1]
            rng = np.random.default_rng(1_000_003 * (self.seed + 1) + layer_idx)
            u = rng.standard_normal((n, self.feature_dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            w = rng.standard_normal((n, self.feature_dim))
            w -= np.sum(w * u, axis=1, keepdims=True) * u
            w /= np.linalg.norm(w, axis=1, keepdims=True)
            cached = self._bases[layer_idx] = (u, w)
        return cached

    def features_for(self, frame_index: int, layer_idx: int) -> Array:
        # rotate each token inside its own plane by drift_rate per frame:
        # exactly unit norm, and cos(token_f, token_{f+1}) == cos(drift_rate)
        u, w = self._token_planes(layer_idx)
        angle = frame_index * self.drift_rate
        return np.cos(angle) * u + np.sin(angle) * w

    def hotspot(self, frame_index: int) -> int:
        n = self.grid[0] * self.grid[1]
        return (self.seed + frame_index) % n

    def _attention(self, frame_index: int, step: int, layer_id: str) -> AttentionRecord:
        n = self.grid[0] * self.grid[1]
        q = np.zeros((n, self.key_dim))
        q[:, 0] = 30.0
        spot = self.hotspot(frame_index)
        q[spot, 0] = 0.0
        q[spot, self.hotspot_word] = 30.0
        k = np.eye(self.n_words, self.key_dim)
        return AttentionRecord(
            frame_index=frame_index,
            step_index=step,
            layer_id=layer_id,
            head_index=0,
            q=q,
            k=k,
            spatial_shape=self.grid,
        )

    def predict_noise(self, latent: Array, t: int, cond: object) -> Array:
        if latent.shape != self.latent_shape:
            raise ValueError(
                f"latent shape {latent.shape} does not match configured {self.latent_shape}"
            )
        obs = StepObservations()
        for idx, layer_id in enumerate(self.layers):
            obs.features[layer_id] = FeatureTokenMap(
                frame_index=self.frame_index,
                layer_id=layer_id,
                tokens=self.features_for(self.frame_index, idx),
            )
            obs.attention.append(self._attention(self.frame_index, t, layer_id))
        self._last_obs = obs
        if self.eps_mode == "zero" or cond is None:
            return np.zeros(self.latent_shape)
        return float(cond) * 0.02 * np.ones(self.latent_shape)

    def collect_observations(self) -> Optional[StepObservations]:
        return self._last_obs


def toy_feature_backend(
    seed: int = 0, drift_rate: float = 0.05, **kwargs
) -> SyntheticEditBackend:
    return SyntheticEditBackend(seed=seed, drift_rate=drift_rate, **kwargs)
