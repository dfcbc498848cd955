"""Quality metrics computable without external models.

PSNR and SSIM take an optional region mask restricting which pixels
(PSNR) or window centers (SSIM) contribute, which is how background-only
scores are produced: pass the complement of the instance mask. Token
drift is the mean adjacent-frame token cosine, a cheap temporal-
consistency proxy.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from framebank.masks import BinaryMask
from framebank.memory import FeatureTokenMap

Array = np.ndarray

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_image(a: Array) -> Array:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[None, :, :]
    if a.ndim != 3:
        raise ValueError(f"expected (C, H, W) or (H, W) image, got shape {a.shape}")
    if a.min() < -1e-9 or a.max() > 1.0 + 1e-9:
        raise ValueError("image values must lie in [0, 1]")
    return a


def psnr(a: Array, b: Array, region: Optional[BinaryMask] = None) -> float:
    """10*log10(1/MSE) with unit dynamic range, capped at 99.0 dB.

    region, when given, selects the pixels entering the MSE (all channels
    of a selected pixel count)."""
    a = _check_image(a)
    b = _check_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    sq = (a - b) ** 2
    if region is not None:
        if region.bits.shape != a.shape[-2:]:
            raise ValueError(
                f"region {region.bits.shape} does not match image {a.shape[-2:]}"
            )
        if not region.bits.any():
            raise ValueError("empty region")
        sq = sq[:, region.bits]
    mse = float(sq.mean())
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def _gaussian_kernel(size: int, sigma: float) -> Array:
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _local_means(img: Array, kernel: Array) -> Array:
    # valid-mode windowed weighted mean; images here are small enough that
    # the strided-window tensordot is fast and dependency-free
    windows = np.lib.stride_tricks.sliding_window_view(img, kernel.shape)
    return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))


def ssim(a: Array, b: Array, region: Optional[BinaryMask] = None) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
    K2=0.03, unit dynamic range; channels are scored independently and
    averaged. region restricts which window centers contribute."""
    a = _check_image(a)
    b = _check_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    h, w = a.shape[-2:]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than SSIM window {SSIM_WINDOW}")
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    pad = (SSIM_WINDOW - 1) // 2

    if region is not None:
        if region.bits.shape != (h, w):
            raise ValueError(f"region {region.bits.shape} does not match image ({h}, {w})")
        centers = region.bits[pad : h - pad, pad : w - pad]
        if not centers.any():
            raise ValueError("empty region after window clipping")
    else:
        centers = None

    per_channel = []
    for ca, cb in zip(a, b):
        mu_a = _local_means(ca, kernel)
        mu_b = _local_means(cb, kernel)
        mu_aa = _local_means(ca * ca, kernel)
        mu_bb = _local_means(cb * cb, kernel)
        mu_ab = _local_means(ca * cb, kernel)
        var_a = mu_aa - mu_a**2
        var_b = mu_bb - mu_b**2
        cov = mu_ab - mu_a * mu_b
        ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
            (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        )
        per_channel.append(
            float(ssim_map.mean() if centers is None else ssim_map[centers].mean())
        )
    return float(np.mean(per_channel))


def token_drift(features: Sequence[FeatureTokenMap]) -> float:
    """Mean cosine between corresponding tokens of adjacent frames."""
    if len(features) < 2:
        raise ValueError("token drift needs at least 2 frames")
    shape = features[0].tokens.shape
    total = 0.0
    count = 0
    for prev, cur in zip(features, features[1:]):
        if prev.tokens.shape != shape or cur.tokens.shape != shape:
            raise ValueError("all frames must share the token-map shape")
        num = np.sum(prev.tokens * cur.tokens, axis=1)
        denom = prev.row_norms() * cur.row_norms()
        cos = np.where(denom == 0.0, 0.0, num / np.where(denom == 0.0, 1.0, denom))
        total += float(cos.sum())
        count += cos.size
    return total / count
