"""Masked injection of source latents into the edited trajectory.

Inside the configured step window, mask-clear cells of the edited latent
are overwritten with the source latent for the same step, preserving the
background while the masked region keeps the edit. Outside the window the
edited latent passes through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from framebank.masks import BinaryMask

Array = np.ndarray


@dataclass(frozen=True)
class InjectionWindow:
    """Active interval over elapsed sampling-step fraction (inclusive).

    The default starts after the first 20% of steps so early semantic
    restructuring is left alone; both endpoints are configurable, so the
    window can be placed anywhere in the schedule.
    """

    start_fraction: float = 0.2
    end_fraction: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.start_fraction <= self.end_fraction <= 1.0:
            raise ValueError(
                f"need 0 <= start <= end <= 1, got [{self.start_fraction}, {self.end_fraction}]"
            )


def in_window(step_pos: float, window: InjectionWindow) -> bool:
    return window.start_fraction <= step_pos <= window.end_fraction


def inject_background(
    z_edit: Array,
    z_src: Array,
    mask: BinaryMask,
    step_pos: float,
    window: InjectionWindow,
) -> Array:
    """mask-set cells keep the edit, mask-clear cells take the source;
    identity outside the window. The mask broadcasts across channels."""
    if z_edit.shape != z_src.shape:
        raise ValueError(f"latent shape mismatch {z_edit.shape} vs {z_src.shape}")
    if z_edit.shape[-2:] != mask.bits.shape:
        raise ValueError(
            f"mask {mask.bits.shape} does not match latent spatial dims {z_edit.shape[-2:]}"
        )
    if not in_window(step_pos, window):
        return z_edit
    return np.where(mask.bits, z_edit, z_src)
