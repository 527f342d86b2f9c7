"""Reverse-process samplers."""
from __future__ import annotations

from typing import Callable

import numpy as np
import torch

from .schedule import NoiseSchedule

MODES = ("ddpm_ancestral", "deterministic")


def predict_x0(x_t: torch.Tensor, t: int, eps_hat: torch.Tensor, schedule: NoiseSchedule):
    ab = float(schedule.alpha_bar(t))
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def posterior_mean(x_t, x0, t: int, schedule: NoiseSchedule):
    """Mean of q(x_{t-1} | x_t, x_0)."""
    ab_t = float(schedule.alpha_bar(t))
    ab_prev = float(schedule.alpha_bar(t - 1))
    beta = float(schedule.betas[t - 1])
    c0 = np.sqrt(ab_prev) * beta / (1.0 - ab_t)
    ct = np.sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab_t)
    return c0 * x0 + ct * x_t


def reverse_step(x_t: torch.Tensor, t: int, eps_hat: torch.Tensor, schedule: NoiseSchedule,
                 mode: str = "deterministic", noise: torch.Tensor | None = None) -> torch.Tensor:
    """One step t → t-1.

    ``ddpm_ancestral`` draws from the Gaussian posterior with variance β̃_t;
    ``deterministic`` is the η = 0 update that reuses ``eps_hat`` as the noise
    direction.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    ab_t = float(schedule.alpha_bar(t))
    ab_prev = float(schedule.alpha_bar(t - 1))
    beta = float(schedule.betas[t - 1])
    if mode == "deterministic":
        x0 = predict_x0(x_t, t, eps_hat, schedule)
        return np.sqrt(ab_prev) * x0 + np.sqrt(1.0 - ab_prev) * eps_hat
    mean = (x_t - beta / np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(1.0 - beta)
    if t == 1:
        return mean
    var = (1.0 - ab_prev) / (1.0 - ab_t) * beta
    if noise is None:
        noise = torch.randn_like(x_t)
    return mean + np.sqrt(var) * noise


def sample_loop(predict: Callable[[torch.Tensor, int], torch.Tensor], z_T: torch.Tensor,
                schedule: NoiseSchedule, mode: str = "deterministic",
                generator: torch.Generator | None = None) -> torch.Tensor:
    """Run all T reverse steps from ``z_T``; returns the final latent z_0."""
    x = z_T
    for t in range(schedule.steps, 0, -1):
        eps_hat = predict(x, t)
        noise = None
        if mode == "ddpm_ancestral" and t > 1:
            noise = torch.randn(x.shape, generator=generator, dtype=x.dtype)
        x = reverse_step(x, t, eps_hat, schedule, mode, noise)
    return x
