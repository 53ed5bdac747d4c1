"""Conditional generation: shape completion with a fixed partial input, and
controlled completion by interpolating time-T latents.

A completion task arranges the cloud as x0 = (z0, x~0): the M fixed partial
points occupy rows [0, M), the free points rows [M, M + n_free). The fixed
rows are never noised. During sampling, every reverse step runs on the full
cloud and the fixed rows are immediately overwritten with z0, so each
denoiser call sees the clean partial shape. During training, only free rows
are corrupted and only free-row outputs enter the loss.

Draw order for `complete` (rng = default_rng(seed)): free-row init of shape
(n_free, 3) first, then one full-cloud z per reverse step (t > 1), matching
`generate` exactly when M = 0. `decode_latent` and `interpolate_complete`
skip the init draw (the latent is given) and share the per-step stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import ancestral_loop, p_sample_step, q_sample
from .schedule import NoiseSchedule
from .training import TrainConfig, AdamState, train_step

__all__ = [
    "CompletionTask", "conditional_train_step", "complete", "complete_many",
    "latent_encode", "decode_latent", "interpolate_complete",
]


@dataclass
class CompletionTask:
    """Fixed partial points plus the number of free points to synthesize.

    M = 0 (empty z0) is the documented degenerate case in which completion
    reduces to unconditional generation.
    """

    z0: np.ndarray
    n_free: int

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=np.float64).reshape(-1, 3)
        self.n_free = int(self.n_free)
        if self.n_free < 1:
            raise ValueError(f"n_free must be >= 1, got {self.n_free}")
        if not np.all(np.isfinite(self.z0)):
            raise ValueError("z0 contains non-finite coordinates")

    @property
    def m(self) -> int:
        return int(self.z0.shape[0])

    @property
    def n_total(self) -> int:
        return self.m + self.n_free


def conditional_train_step(model, batch: np.ndarray, m: int,
                           rng: np.random.Generator, sched: NoiseSchedule,
                           config: TrainConfig, state: AdamState) -> float:
    """One optimization step on (B, N, 3) clouds whose first m rows are the
    fixed partials. Identical to the unconditional step at m = 0 (shared
    implementation, shared draw order)."""
    return train_step(model, batch, rng, sched, config, state, m_fixed=m)


def complete(denoiser, task: CompletionTask, sched: NoiseSchedule, seed: int,
             final_noise: bool = False) -> np.ndarray:
    """Sample one completion: rows [0, M) of the result equal z0 bit-exactly,
    rows [M, N) are synthesized by the reverse chain."""
    rng = np.random.default_rng(seed)
    x_free = rng.standard_normal((task.n_free, 3))
    x = np.concatenate([task.z0, x_free], axis=0)
    return ancestral_loop(denoiser, x, sched, rng, fixed=task.z0,
                          final_noise=final_noise)


def complete_many(denoiser, task: CompletionTask, sched: NoiseSchedule,
                  seeds, final_noise: bool = False) -> list[np.ndarray]:
    """One completion per seed, all chains advanced through shared batched
    denoiser calls (same per-chain draw order as `complete`)."""
    rngs = [np.random.default_rng(s) for s in seeds]
    m = task.m
    xs = np.stack([np.concatenate([task.z0, rng.standard_normal((task.n_free, 3))])
                   for rng in rngs])
    batch_fn = getattr(denoiser, "epsilon_batch", None)
    for t in range(sched.T, 0, -1):
        if batch_fn is not None:
            eps_hat = np.asarray(batch_fn(xs, t), dtype=np.float64)
        else:
            eps_hat = np.stack([np.asarray(denoiser(x, t), dtype=np.float64) for x in xs])
        if t > 1 or final_noise:
            z = np.stack([rng.standard_normal(xs.shape[1:]) for rng in rngs])
        else:
            z = np.zeros_like(xs)
        xs = p_sample_step(xs, t, eps_hat, z, sched)
        if m > 0:
            xs[:, :m] = task.z0
    return [xs[i] for i in range(xs.shape[0])]


def latent_encode(x0_hat: np.ndarray, sched: NoiseSchedule, eps: np.ndarray) -> np.ndarray:
    """Time-T latent of a completed shape: sqrt(ab_T) x0 + sqrt(1 - ab_T) eps."""
    return q_sample(x0_hat, sched.T, eps, sched)


def decode_latent(denoiser, latent: np.ndarray, z0: np.ndarray | None,
                  sched: NoiseSchedule, seed: int,
                  final_noise: bool = False) -> np.ndarray:
    """Reverse chain started from a given time-T latent (no init draw); z0
    rows, when given, are held fixed as in `complete`."""
    latent = np.asarray(latent, dtype=np.float64)
    rng = np.random.default_rng(seed)
    fixed = None if z0 is None else np.asarray(z0, dtype=np.float64).reshape(-1, 3)
    return ancestral_loop(denoiser, latent, sched, rng, fixed=fixed,
                          final_noise=final_noise)


def interpolate_complete(denoiser, latent_a: np.ndarray, latent_b: np.ndarray,
                         lam: float, z0: np.ndarray, sched: NoiseSchedule,
                         seed: int, final_noise: bool = False) -> np.ndarray:
    """Decode the convex combination (1-lam) latent_a + lam latent_b with z0
    rows re-fixed at every step. The endpoints lam=0 and lam=1 reproduce
    decode_latent of the corresponding latent bit-exactly (handled as exact
    copies, so no arithmetic perturbs them)."""
    a = np.asarray(latent_a, dtype=np.float64)
    bl = np.asarray(latent_b, dtype=np.float64)
    if a.shape != bl.shape:
        raise ValueError(f"latent shapes differ: {a.shape} vs {bl.shape}")
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 0.0:
        x = a.copy()
    elif lam == 1.0:
        x = bl.copy()
    else:
        x = (1.0 - lam) * a + lam * bl
    return decode_latent(denoiser, x, z0, sched, seed, final_noise=final_noise)
