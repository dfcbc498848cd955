"""Zero-shot video-editing consistency engine.

Core pieces: a bounded per-layer feature memory with an evenness-
preserving eviction policy, most-similar token propagation against it,
cross-attention mask extraction with temporal overlap, masked background
injection, and a DDIM inversion/sampling loop over pluggable denoiser
backends (analytic toys or recorded dumps).
"""

from framebank.blend import InjectionWindow, in_window, inject_background
from framebank.diffusion import (
    DenoiserBackend,
    GuidanceConfig,
    GuidedBackend,
    NoiseSchedule,
    combine_guidance,
    ddim_invert,
    ddim_sample,
    ddim_step,
    make_linear_schedule,
    toy_attractor_backend,
    toy_constant_backend,
)
from framebank.masks import (
    AttentionRecord,
    BinaryMask,
    MaskConfig,
    WordSelection,
    aggregate,
    attention_prob,
    contour_mask,
    contours,
    extract_mask,
    fill,
    temporal_overlap,
    upsample_nearest,
)
from framebank.memory import FeatureTokenMap, InsertReport, MemoryBank, entry_distance
from framebank.metrics import psnr, ssim, token_drift
from framebank.pipeline import (
    EditConfig,
    EditReport,
    LatentVideo,
    StepObservations,
    SyntheticEditBackend,
    edit_video,
    replay_edit,
    toy_feature_backend,
)
from framebank.propagation import (
    PropagationConfig,
    PropagationResult,
    propagate,
    propagate_bruteforce,
    select_best,
    similarity_scores,
)
from framebank.tensorio import (
    ManifestRecord,
    read_manifest,
    read_mask_pgm,
    read_tensor,
    write_manifest,
    write_mask_pgm,
    write_tensor,
)

__version__ = "0.1.0"
