"""Probabilistic core of the diffusion model.

Forward process
    q(x_t | x_{t-1}) = N(sqrt(1 - beta_t) x_{t-1}, beta_t I)            (one step)
    q(x_t | x_0)     = N(sqrt(alpha_bar_t) x_0, (1 - alpha_bar_t) I)    (marginal)

Posterior (alpha_bar_0 := 1, so t=1 collapses onto x_0 with variance 0)
    q(x_{t-1} | x_t, x_0) = N(mu_t, var_t I)
    mu_t  = sqrt(alpha_bar_{t-1}) beta_t / (1 - alpha_bar_t) * x_0
          + sqrt(alpha_t) (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * x_t
    var_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t

Reverse (ancestral) step with a predicted noise eps_hat
    x_{t-1} = 1/sqrt(alpha_t) * (x_t - (1 - alpha_t)/sqrt(1 - alpha_bar_t) * eps_hat)
            + sqrt(beta_t) * z

All functions are pure, operate on float64 numpy arrays of shape (..., 3)
(leading dimensions broadcast, so batched clouds work unchanged), and take a
1-based timestep t.

Sampling draw order (the determinism contract of `generate`): with
rng = numpy default_rng(seed), the first draw is x_T of shape (N, 3); then for
t = T..2, z of shape (N, 3) is drawn after the denoiser call for that step.
No z is drawn at t=1 unless final_noise=True, in which case z_1 is drawn the
same way. `complete` in the completion module shares this loop and draw order.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .schedule import NoiseSchedule

__all__ = [
    "q_sample", "q_step", "posterior_params", "predict_mu_from_eps",
    "eps_loss", "p_sample_step", "generate", "generate_many",
]

Denoiser = Callable[[np.ndarray, int], np.ndarray]


def _as_cloud(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-1] != 3:
        raise ValueError(f"{name} must have shape (..., 3), got {x.shape}")
    return x


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch for {what}: {a.shape} vs {b.shape}")


def q_sample(x0, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form marginal draw: sqrt(ab_t) x0 + sqrt(1 - ab_t) eps."""
    x0 = _as_cloud(x0, "x0")
    eps = _as_cloud(eps, "eps")
    _check_same_shape(x0, eps, "q_sample")
    ab = sched.alpha_bar_t(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def q_step(x_prev, t: int, noise, sched: NoiseSchedule) -> np.ndarray:
    """One forward transition: sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) noise."""
    x_prev = _as_cloud(x_prev, "x_prev")
    noise = _as_cloud(noise, "noise")
    _check_same_shape(x_prev, noise, "q_step")
    b = sched.beta_t(t)
    return np.sqrt(1.0 - b) * x_prev + np.sqrt(b) * noise


def posterior_params(x0, xt, t: int, sched: NoiseSchedule):
    """Mean and variance of q(x_{t-1} | x_t, x_0). Rejects t=0."""
    x0 = _as_cloud(x0, "x0")
    xt = _as_cloud(xt, "xt")
    _check_same_shape(x0, xt, "posterior_params")
    t = int(t)
    if t < 1:
        raise ValueError("posterior is defined for t >= 1 only")
    ab_t = sched.alpha_bar_t(t)
    ab_prev = sched.alpha_bar_t(t - 1)
    a_t = sched.alpha_t(t)
    b_t = sched.beta_t(t)
    denom = 1.0 - ab_t
    coef_x0 = np.sqrt(ab_prev) * b_t / denom
    coef_xt = np.sqrt(a_t) * (1.0 - ab_prev) / denom
    var = (1.0 - ab_prev) / denom * b_t
    return coef_x0 * x0 + coef_xt * xt, float(var)


def predict_mu_from_eps(xt, t: int, eps_hat, sched: NoiseSchedule) -> np.ndarray:
    """Posterior mean implied by a noise prediction:
    1/sqrt(a_t) (x_t - b_t / sqrt(1 - ab_t) eps_hat)."""
    xt = _as_cloud(xt, "xt")
    eps_hat = _as_cloud(eps_hat, "eps_hat")
    _check_same_shape(xt, eps_hat, "predict_mu_from_eps")
    a_t = sched.alpha_t(t)
    b_t = sched.beta_t(t)
    ab_t = sched.alpha_bar_t(t)
    return (xt - b_t / np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(a_t)


def eps_loss(eps, eps_hat) -> float:
    """Mean squared error over all coordinates (mean, not sum, so the loss is
    scale-free in the point count)."""
    eps = _as_cloud(eps, "eps")
    eps_hat = _as_cloud(eps_hat, "eps_hat")
    _check_same_shape(eps, eps_hat, "eps_loss")
    d = eps - eps_hat
    return float(np.mean(d * d))


def p_sample_step(xt, t: int, eps_hat, z, sched: NoiseSchedule) -> np.ndarray:
    """One ancestral reverse step. The caller supplies z; pass z=0 at t=1 for
    the deterministic final step (the sampling loops here do that unless
    final_noise is requested)."""
    xt = _as_cloud(xt, "xt")
    eps_hat = _as_cloud(eps_hat, "eps_hat")
    z = _as_cloud(z, "z")
    _check_same_shape(xt, eps_hat, "p_sample_step")
    _check_same_shape(xt, z, "p_sample_step noise")
    a_t = sched.alpha_t(t)
    ab_t = sched.alpha_bar_t(t)
    b_t = sched.beta_t(t)
    mean = (xt - (1.0 - a_t) / np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(a_t)
    return mean + np.sqrt(b_t) * z


def ancestral_loop(denoiser: Denoiser, x: np.ndarray, sched: NoiseSchedule,
                   rng: np.random.Generator, fixed: np.ndarray | None = None,
                   final_noise: bool = False,
                   callback: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Run the reverse chain from the given x_T down to x_0.

    fixed, when given, is an (M, 3) block written back into rows [0, M) after
    every step, so those rows re-enter each denoiser call unnoised. callback,
    when given, receives (t_after, x) after each step (t_after = t - 1).
    """
    x = np.array(x, dtype=np.float64)
    if fixed is not None and fixed.shape[0] > 0:
        x[: fixed.shape[0]] = fixed
    for t in range(sched.T, 0, -1):
        eps_hat = np.asarray(denoiser(x, t), dtype=np.float64)
        _check_same_shape(x, eps_hat, "denoiser output")
        if t > 1 or final_noise:
            z = rng.standard_normal(x.shape)
        else:
            z = np.zeros_like(x)
        x = p_sample_step(x, t, eps_hat, z, sched)
        if fixed is not None and fixed.shape[0] > 0:
            x[: fixed.shape[0]] = fixed
        if callback is not None:
            callback(t - 1, x)
    return x


def generate(denoiser: Denoiser, n: int, sched: NoiseSchedule, seed: int,
             final_noise: bool = False,
             callback: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Sample one point cloud of n points. Pure function of
    (denoiser parameters, seed, n, schedule)."""
    n = int(n)
    if n < 1:
        raise ValueError(f"point count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3))
    if callback is not None:
        callback(sched.T, x)
    return ancestral_loop(denoiser, x, sched, rng,
                          final_noise=final_noise, callback=callback)


def generate_many(denoiser, n: int, sched: NoiseSchedule, seeds: Sequence[int],
                  final_noise: bool = False) -> list[np.ndarray]:
    """Sample one cloud per seed, stepping all chains together.

    Each chain draws from its own generator exactly as in `generate`; chains
    only share denoiser calls, via `denoiser.epsilon_batch` when the denoiser
    provides it (falling back to per-cloud calls otherwise).
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"point count must be >= 1, got {n}")
    rngs = [np.random.default_rng(s) for s in seeds]
    xs = np.stack([rng.standard_normal((n, 3)) for rng in rngs])
    batch_fn = getattr(denoiser, "epsilon_batch", None)
    for t in range(sched.T, 0, -1):
        if batch_fn is not None:
            eps_hat = np.asarray(batch_fn(xs, t), dtype=np.float64)
        else:
            eps_hat = np.stack([np.asarray(denoiser(x, t), dtype=np.float64) for x in xs])
        _check_same_shape(xs, eps_hat, "denoiser output")
        if t > 1 or final_noise:
            z = np.stack([rng.standard_normal((n, 3)) for rng in rngs])
        else:
            z = np.zeros_like(xs)
        xs = p_sample_step(xs, t, eps_hat, z, sched)
    return [xs[i] for i in range(xs.shape[0])]
