"""Linear variance schedule, forward noising and the noise-prediction loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import InvalidSchedule, ShapeError


@dataclass(frozen=True)
class NoiseSchedule:
    """Steps are 1-based: ``alpha_bars[t - 1]`` is the cumulative product at step t."""
    betas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.betas)

    def alpha_bar(self, t):
        """ᾱ_t for integer step(s) t in 1..T; ᾱ_0 = 1."""
        t = np.asarray(t)
        padded = np.concatenate([[1.0], self.alpha_bars])
        return padded[t]

    def to_dict(self) -> dict:
        return {"betas": self.betas.tolist(), "alpha_bars": self.alpha_bars.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(np.asarray(d["betas"], float), np.asarray(d["alpha_bars"], float))


def build_schedule(steps: int, beta_min: float, beta_max: float) -> NoiseSchedule:
    if int(steps) != steps or steps < 2:
        raise InvalidSchedule(f"steps must be an integer >= 2, got {steps}")
    if not 0 < beta_min < beta_max < 1:
        raise InvalidSchedule(f"need 0 < beta_min < beta_max < 1, got {beta_min}, {beta_max}")
    betas = np.linspace(beta_min, beta_max, int(steps), dtype=np.float64)
    return NoiseSchedule(betas, np.cumprod(1.0 - betas))


def custom_schedule(alpha_bars) -> NoiseSchedule:
    """Schedule from explicit ᾱ values, used to probe edge cases (no validation)."""
    ab = np.asarray(alpha_bars, dtype=np.float64)
    prev = np.concatenate([[1.0], ab[:-1]])
    with np.errstate(divide="ignore", invalid="ignore"):
        betas = 1.0 - ab / prev
    return NoiseSchedule(betas, ab)


def _broadcast_coef(values, like: torch.Tensor) -> torch.Tensor:
    c = torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=like.dtype, device=like.device)
    if c.ndim == 0:
        return c
    return c.reshape(-1, *([1] * (like.ndim - 1)))


def forward_noise(z0: torch.Tensor, t, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """√ᾱ_t·z0 + √(1−ᾱ_t)·eps; ``t`` is an int or a per-batch array of ints."""
    if z0.shape != eps.shape:
        raise ShapeError(f"eps {tuple(eps.shape)} does not match z0 {tuple(z0.shape)}")
    ab = schedule.alpha_bar(t)
    return _broadcast_coef(np.sqrt(ab), z0) * z0 + _broadcast_coef(np.sqrt(1.0 - ab), z0) * eps


def loss_noise(eps_hat: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Mean squared error over every element."""
    if eps_hat.shape != eps.shape:
        raise ShapeError(f"eps_hat {tuple(eps_hat.shape)} does not match eps {tuple(eps.shape)}")
    return torch.mean((eps_hat - eps) ** 2)
