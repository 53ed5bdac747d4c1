"""Variance schedules for the diffusion process.

A schedule is the increasing sequence beta_1..beta_T together with the derived
quantities

    alpha_t     = 1 - beta_t
    alpha_bar_t = prod_{s<=t} alpha_s
    sigma_t^2   = beta_t          (reverse-step variance choice)

The public API is 1-based in t (t in {1..T}) to match the usual diffusion
notation; storage is 0-based numpy arrays. All schedule arithmetic is done in
float64 regardless of the precision the network runs at, so alpha_bar_T stays
accurate for long schedules.

Instances are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NoiseSchedule", "linear_schedule", "warmup_schedule", "schedule_from_config"]


class NoiseSchedule:
    """The sequence beta_1..beta_T with derived alpha, alpha_bar, sigma2 arrays.

    Arrays are float64, 0-based (index i holds the value for t = i + 1), and
    marked read-only. Use the ``*_t`` accessors for 1-based lookups;
    ``alpha_bar_t(0)`` returns 1.0 by convention so posterior formulas are
    well-defined at t=1.
    """

    def __init__(self, beta: np.ndarray, kind: str = "custom", params: dict | None = None):
        beta = np.asarray(beta, dtype=np.float64)
        if beta.ndim != 1 or beta.shape[0] < 1:
            raise ValueError("beta must be a 1-D array with at least one entry")
        if not np.all((beta > 0.0) & (beta < 1.0)):
            raise ValueError("every beta_t must lie strictly in (0, 1)")
        if np.any(np.diff(beta) < 0.0):
            raise ValueError("beta_t must be non-decreasing in t")

        self.beta = beta.copy()
        self.alpha = 1.0 - self.beta
        self.alpha_bar = np.cumprod(self.alpha)
        self.sigma2 = self.beta.copy()
        self.kind = kind
        self.params = dict(params) if params else {}
        for arr in (self.beta, self.alpha, self.alpha_bar, self.sigma2):
            arr.flags.writeable = False

    @property
    def T(self) -> int:
        return int(self.beta.shape[0])

    def _check_t(self, t: int, lo: int = 1) -> int:
        t = int(t)
        if not lo <= t <= self.T:
            raise ValueError(f"timestep t={t} outside [{lo}, {self.T}]")
        return t

    def beta_t(self, t: int) -> float:
        return float(self.beta[self._check_t(t) - 1])

    def alpha_t(self, t: int) -> float:
        return float(self.alpha[self._check_t(t) - 1])

    def alpha_bar_t(self, t: int) -> float:
        # alpha_bar_0 := 1 so the posterior coefficients are defined at t=1.
        t = self._check_t(t, lo=0)
        if t == 0:
            return 1.0
        return float(self.alpha_bar[t - 1])

    def sigma2_t(self, t: int) -> float:
        return float(self.sigma2[self._check_t(t) - 1])

    def __repr__(self) -> str:
        return (f"NoiseSchedule(kind={self.kind!r}, T={self.T}, "
                f"beta_1={self.beta[0]:.3g}, beta_T={self.beta[-1]:.3g})")


def _check_bounds(beta_start: float, beta_end: float) -> None:
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")


def linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Evenly spaced beta from beta_start to beta_end over T steps.

    With T=1 the single entry is beta_start.
    """
    T = int(T)
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    _check_bounds(beta_start, beta_end)
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    return NoiseSchedule(beta, kind="linear",
                         params={"T": T, "beta_start": beta_start, "beta_end": beta_end})


def warmup_schedule(T: int, beta_start: float, beta_end: float,
                    warmup_frac: float) -> NoiseSchedule:
    """Linear ramp over the first ceil(warmup_frac * T) steps, then constant.

    beta rises from beta_start to beta_end across the warmup prefix and stays
    at beta_end for every later step. warmup_frac=1.0 reproduces
    linear_schedule exactly.
    """
    T = int(T)
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    _check_bounds(beta_start, beta_end)
    if not (0.0 < warmup_frac <= 1.0):
        raise ValueError(f"warmup_frac must lie in (0, 1], got {warmup_frac}")
    warm = int(np.ceil(warmup_frac * T))
    warm = min(max(warm, 1), T)
    beta = np.full(T, beta_end, dtype=np.float64)
    beta[:warm] = np.linspace(beta_start, beta_end, warm, dtype=np.float64)
    return NoiseSchedule(beta, kind="warmup",
                         params={"T": T, "beta_start": beta_start,
                                 "beta_end": beta_end, "warmup_frac": warmup_frac})


def schedule_from_config(cfg: dict) -> NoiseSchedule:
    """Build a schedule from config keys: kind, T, beta_start, beta_end, warmup_frac."""
    kind = cfg.get("kind", "linear")
    if kind == "linear":
        return linear_schedule(cfg["T"], cfg["beta_start"], cfg["beta_end"])
    if kind == "warmup":
        return warmup_schedule(cfg["T"], cfg["beta_start"], cfg["beta_end"],
                               cfg.get("warmup_frac", 0.9))
    raise ValueError(f"unknown schedule kind {kind!r}")
