"""Training loop: sample t and eps, corrupt with the closed-form marginal,
regress the noise, step Adam.

Per-step randomness comes from one numpy Generator in a fixed draw order:
batch indices (in `train`), then t (one per element), then eps, then dropout
masks inside the forward pass. Training is therefore a pure function of
(initial parameters, data, seed, config).

The optimizer is standard bias-corrected Adam, written out here rather than
taken from a library so the update is explicit and testable:

    m <- b1 m + (1-b1) g         v <- b2 v + (1-b2) g^2
    m_hat = m / (1 - b1^step)    v_hat = v / (1 - b2^step)
    p <- p - lr * m_hat / (sqrt(v_hat) + eps)

The first step moves each parameter by -lr * g / (|g| + eps).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import NumericalError
from .schedule import NoiseSchedule

__all__ = ["TrainConfig", "AdamState", "adam_update", "train_step", "train"]


@dataclass
class TrainConfig:
    learning_rate: float = 2e-4
    batch_size: int = 8
    total_steps: int = 1000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float | None = None  # max global grad norm; None disables
    checkpoint_every: int = 0  # 0: no periodic checkpoints
    loss_reduction: str = "mean"

    def __post_init__(self):
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be >= 0")
        if self.loss_reduction != "mean":
            raise ValueError("only mean loss reduction is supported")


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params) -> "AdamState":
        params = list(params)
        return cls(step=0,
                   m=[torch.zeros_like(p) for p in params],
                   v=[torch.zeros_like(p) for p in params])


def adam_update(params, grads, state: AdamState, config: TrainConfig):
    """One Adam step. Parameters and state are updated in place; the pair is
    also returned. A None gradient counts as zero (moments still decay)."""
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if g is None:
                g = torch.zeros_like(p)
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            denom = (v / bc2).sqrt_().add_(config.adam_eps)
            p.addcdiv_(m / bc1, denom, value=-config.learning_rate)
    return params, state


def _clip_grads(grads, max_norm: float):
    total = torch.sqrt(sum((g * g).sum() for g in grads if g is not None))
    if torch.isfinite(total) and total > max_norm:
        scale = max_norm / (float(total) + 1e-12)
        for g in grads:
            if g is not None:
                g.mul_(scale)


def train_step(model, batch: np.ndarray, rng: np.random.Generator,
               sched: NoiseSchedule, config: TrainConfig, state: AdamState,
               m_fixed: int = 0) -> float:
    """One optimization step on a batch of clouds arranged (B, N, 3).

    With m_fixed > 0 the first m_fixed rows of every cloud are a fixed partial
    shape: they enter the network clean (never noised) and the loss covers the
    free rows only. m_fixed = 0 is plain unconditional training; both paths
    share every draw, so they coincide bit-for-bit at m_fixed = 0.

    Draws, in order: t ~ Uniform{1..T} per element, eps ~ N(0,1) for the free
    rows, then the forward pass's dropout masks.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[-1] != 3 or batch.shape[0] < 1:
        raise ValueError(f"expected nonempty (B, N, 3) batch, got {batch.shape}")
    if not np.all(np.isfinite(batch)):
        raise NumericalError(
            f"non-finite values in training batch at optimizer step {state.step + 1}")
    b, n, _ = batch.shape
    m = int(m_fixed)
    if not 0 <= m < n:
        raise ValueError(f"m_fixed must lie in [0, N), got {m} for N={n}")

    t = rng.integers(1, sched.T + 1, size=b)
    eps = rng.standard_normal((b, n - m, 3))
    ab = sched.alpha_bar[t - 1][:, None, None]
    xt = batch.copy()
    xt[:, m:, :] = np.sqrt(ab) * batch[:, m:, :] + np.sqrt(1.0 - ab) * eps

    dtype = model.dtype
    xt_t = torch.from_numpy(xt).to(dtype)
    eps_t = torch.from_numpy(eps).to(dtype)
    model.train()
    out = model(xt_t, torch.from_numpy(t), dropout_rng=rng)
    loss = ((out[:, m:, :] - eps_t) ** 2).mean()
    if not torch.isfinite(loss):
        raise NumericalError(
            f"non-finite training loss {float(loss.detach())} at optimizer "
            f"step {state.step + 1} (t draws: {t.tolist()})")

    params = [p for _, p in model.named_parameters()]
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grads = [g if g is not None else torch.zeros_like(p)
             for g, p in zip(grads, params)]
    if config.grad_clip is not None:
        _clip_grads(grads, config.grad_clip)
    adam_update(params, grads, state, config)
    return float(loss.detach())


def train(model, data: np.ndarray, sched: NoiseSchedule, config: TrainConfig,
          m_fixed: int = 0, state: AdamState | None = None,
          on_step=None) -> list[tuple[int, float, float]]:
    """Run config.total_steps optimization steps over a dataset (S, N, 3).

    Each step draws batch indices uniformly with replacement, then defers to
    train_step. Returns the loss log as (step, loss, wall_time_seconds)
    tuples; on_step(step, loss, model, state) runs after each update (used
    for periodic checkpoints).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3 or data.shape[-1] != 3 or data.shape[0] < 1:
        raise ValueError(f"expected nonempty (S, N, 3) dataset, got {data.shape}")
    rng = np.random.default_rng(config.seed)
    if state is None:
        state = AdamState.for_params(p for _, p in model.named_parameters())
    t0 = time.monotonic()
    log = []
    for step in range(1, config.total_steps + 1):
        idx = rng.integers(0, data.shape[0], size=config.batch_size)
        loss = train_step(model, data[idx], rng, sched, config, state, m_fixed=m_fixed)
        log.append((step, loss, time.monotonic() - t0))
        if on_step is not None:
            on_step(step, loss, model, state)
    return log
