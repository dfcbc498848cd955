"""DDIM core: noise schedules, the shared inversion/sampling update rule,
classifier-free guidance, and analytic toy denoiser backends.

The update rule is implemented in its rescale form

    z_next = sqrt(abar_next / abar_cur) * z
              + (sqrt(1 - abar_next) - sqrt(abar_next / abar_cur) * sqrt(1 - abar_cur)) * eps

which is algebraically identical to the x0-prediction form
``sqrt(abar_next) * x0_hat + sqrt(1 - abar_next) * eps`` with
``x0_hat = (z - sqrt(1 - abar_cur) * eps) / sqrt(abar_cur)`` but is exact
(bitwise identity) for a no-op step where both levels coincide.

Timesteps are integer indices ``0 .. T-1`` over the schedule; index ``-1``
denotes the clean boundary with cumulative signal coefficient exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

Array = np.ndarray

# Hook called after every sampling step with (timestep just consumed,
# post-step latent, backend observations or None). A non-None return
# value replaces the latent.
StepHook = Callable[[int, Array, object], Optional[Array]]


class DenoiseLoopError(RuntimeError):
    """Backend or hook failure, annotated with the step it occurred at."""


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear-in-beta diffusion schedule.

    ``alpha_bar[t]`` is the cumulative product of ``1 - betas[s]`` for
    ``s <= t``; it is strictly decreasing and confined to (0, 1).
    """

    betas: Array
    alpha_bar: Array

    @property
    def num_steps(self) -> int:
        return len(self.betas)

    def alpha_bar_at(self, t: int) -> float:
        """Cumulative signal coefficient at schedule index t; t = -1 is the
        clean boundary and returns exactly 1.0."""
        if t == -1:
            return 1.0
        if not 0 <= t < self.num_steps:
            raise ValueError(f"timestep {t} out of range [-1, {self.num_steps - 1}]")
        return float(self.alpha_bar[t])

    def validate(self) -> None:
        if self.betas.shape != self.alpha_bar.shape or self.betas.ndim != 1:
            raise ValueError("betas and alpha_bar must be 1-D and equal length")
        if not (np.all(self.alpha_bar > 0) and np.all(self.alpha_bar < 1)):
            raise ValueError("alpha_bar must lie strictly inside (0, 1)")
        if not np.all(np.diff(self.alpha_bar) < 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        recon = np.concatenate(([1.0], self.alpha_bar[:-1])) * (1.0 - self.betas)
        if not np.allclose(recon, self.alpha_bar, rtol=1e-12, atol=0):
            raise ValueError("alpha_bar inconsistent with betas")


def make_linear_schedule(
    num_steps: int, beta_start: float = 0.00085, beta_end: float = 0.012
) -> NoiseSchedule:
    """Linearly spaced betas with the cumulative alpha_bar product."""
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"betas must satisfy 0 < beta_start <= beta_end < 1, "
            f"got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, num_steps, dtype=np.float64)
    alpha_bar = np.cumprod(1.0 - betas)
    sched = NoiseSchedule(betas=betas, alpha_bar=alpha_bar)
    sched.validate()
    return sched


@dataclass(frozen=True)
class GuidanceConfig:
    scale: float = 7.5

    def __post_init__(self) -> None:
        if self.scale < 0:
            raise ValueError(f"guidance scale must be >= 0, got {self.scale}")


def combine_guidance(eps_uncond: Array, eps_cond: Array, cfg: GuidanceConfig) -> Array:
    """Classifier-free guidance: uncond + scale * (cond - uncond)."""
    if eps_uncond.shape != eps_cond.shape:
        raise ValueError(
            f"shape mismatch {eps_uncond.shape} vs {eps_cond.shape}"
        )
    return eps_uncond + cfg.scale * (eps_cond - eps_uncond)


def ddim_step(z_t: Array, eps: Array, t: int, t_next: int, sched: NoiseSchedule) -> Array:
    """One deterministic DDIM update between schedule indices t and t_next.

    t_next < t denoises, t_next > t noises (inversion); t_next == t is an
    exact identity. Index -1 addresses the clean boundary (alpha_bar = 1).
    """
    if z_t.shape != eps.shape:
        raise ValueError(f"latent/noise shape mismatch {z_t.shape} vs {eps.shape}")
    abar_cur = sched.alpha_bar_at(t)
    abar_next = sched.alpha_bar_at(t_next)
    factor = math.sqrt(abar_next / abar_cur)
    eps_coef = math.sqrt(1.0 - abar_next) - factor * math.sqrt(1.0 - abar_cur)
    return factor * z_t + eps_coef * eps


@runtime_checkable
class DenoiserBackend(Protocol):
    """Noise-prediction interface.

    Implementations must return a prediction of the same shape as the
    latent and be deterministic for fixed inputs. Backends that expose
    ``collect_observations()`` additionally emit per-step feature/attention
    observations which the edit pipeline consumes; plain backends do not.
    """

    def predict_noise(self, latent: Array, t: int, cond: object) -> Array: ...


def _collect(backend: object) -> object:
    collect = getattr(backend, "collect_observations", None)
    return collect() if collect is not None else None


def ddim_invert(
    z0: Array, backend: DenoiserBackend, sched: NoiseSchedule, cond: object
) -> list[Array]:
    """Run the update rule with increasing timesteps, returning the whole
    trajectory [clean, level 0, ..., level T-1] (T + 1 latents).

    The noise estimate for each step is taken at the current latent
    (first-order inversion, no correction iterations).
    """
    if not np.all(np.isfinite(z0)):
        raise ValueError("z0 must be finite")
    traj = [z0]
    z = z0
    for target in range(sched.num_steps):
        try:
            eps = backend.predict_noise(z, target, cond)
        except Exception as exc:
            raise DenoiseLoopError(f"backend failed at inversion step t={target}") from exc
        z = ddim_step(z, eps, target - 1, target, sched)
        traj.append(z)
    return traj


def ddim_sample(
    zT: Array,
    backend: DenoiserBackend,
    sched: NoiseSchedule,
    cond: object,
    step_hooks: Sequence[StepHook] = (),
) -> Array:
    """Run the update rule with decreasing timesteps from the fully noised
    latent down to the clean boundary.

    After each step every hook is invoked with (consumed timestep, latent,
    observations); a hook may return a replacement latent, which feeds the
    next step. Observations come from the backend when it exposes an
    observation channel, else None.
    """
    if not np.all(np.isfinite(zT)):
        raise ValueError("zT must be finite")
    z = zT
    for t in range(sched.num_steps - 1, -1, -1):
        try:
            eps = backend.predict_noise(z, t, cond)
        except Exception as exc:
            raise DenoiseLoopError(f"backend failed at sampling step t={t}") from exc
        z = ddim_step(z, eps, t, t - 1, sched)
        obs = _collect(backend)
        for hook in step_hooks:
            try:
                replacement = hook(t, z, obs)
            except Exception as exc:
                raise DenoiseLoopError(f"step hook failed at sampling step t={t}") from exc
            if replacement is not None:
                z = replacement
    return z


class ConstantNoiseBackend:
    """Predicts a fixed noise grid regardless of latent and timestep.

    Because the prediction is input-independent, inversion followed by
    sampling reproduces the input exactly (up to float rounding), which
    makes this the reference backend for round-trip checks.
    """

    def __init__(self, eps_value: Array):
        if not np.all(np.isfinite(eps_value)):
            raise ValueError("eps_value must be finite")
        self._eps = np.asarray(eps_value, dtype=np.float64)

    def predict_noise(self, latent: Array, t: int, cond: object) -> Array:
        if latent.shape != self._eps.shape:
            raise ValueError(
                f"latent shape {latent.shape} does not match eps shape {self._eps.shape}"
            )
        return self._eps


def toy_constant_backend(eps_value: Array) -> ConstantNoiseBackend:
    return ConstantNoiseBackend(eps_value)


class AttractorBackend:
    """Predicts eps = (z - sqrt(abar_t) * mu) / sqrt(1 - abar_t).

    The implied clean-latent estimate is exactly mu at every step, so
    sampling from any starting noise converges to mu.
    """

    def __init__(self, target_mean: Array, sched: NoiseSchedule):
        if not np.all(np.isfinite(target_mean)):
            raise ValueError("target_mean must be finite")
        self._mu = np.asarray(target_mean, dtype=np.float64)
        self._sched = sched

    def predict_noise(self, latent: Array, t: int, cond: object) -> Array:
        if latent.shape != self._mu.shape:
            raise ValueError(
                f"latent shape {latent.shape} does not match target shape {self._mu.shape}"
            )
        abar = self._sched.alpha_bar_at(t)
        return (latent - math.sqrt(abar) * self._mu) / math.sqrt(1.0 - abar)


def toy_attractor_backend(target_mean: Array, sched: NoiseSchedule) -> AttractorBackend:
    return AttractorBackend(target_mean, sched)


class GuidedBackend:
    """Wraps a backend with classifier-free guidance combination.

    Each prediction queries the inner backend twice (unconditional then
    conditional) and extrapolates between the two estimates.
    """

    def __init__(self, inner: DenoiserBackend, uncond: object, cfg: GuidanceConfig):
        self._inner = inner
        self._uncond = uncond
        self._cfg = cfg

    def predict_noise(self, latent: Array, t: int, cond: object) -> Array:
        eps_u = self._inner.predict_noise(latent, t, self._uncond)
        eps_c = self._inner.predict_noise(latent, t, cond)
        return combine_guidance(eps_u, eps_c, self._cfg)

    def collect_observations(self) -> object:
        return _collect(self._inner)
