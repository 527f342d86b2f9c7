"""Human-aware dynamic control: gate predictor, gated fusion, mask head and mask loss."""
from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeError


class WeightPredictor(nn.Module):
    """P^k: concat(s, a) → Linear → GELU → Linear → GELU → Linear → sigmoid, one gate per token."""

    def __init__(self, width: int, gate_bias: float = 0.0):
        super().__init__()
        self.fc1 = nn.Linear(2 * width, width)
        self.fc2 = nn.Linear(width, width)
        self.fc3 = nn.Linear(width, 1)
        nn.init.constant_(self.fc3.bias, gate_bias)

    def forward(self, s: torch.Tensor, a: torch.Tensor) -> torch.Tensor:
        if s.shape != a.shape:
            raise ShapeError(f"s {tuple(s.shape)} and a {tuple(a.shape)} must match")
        h = F.gelu(self.fc1(torch.cat([s, a], dim=-1)))
        h = F.gelu(self.fc2(h))
        return torch.sigmoid(self.fc3(h))


class MaskHead(nn.Module):
    """U^k: per-token MLP on the gate, nearest upsample, then a 3x3x3 convolution."""

    def __init__(self, token_grid: tuple[int, int, int], upsample: tuple[int, int, int],
                 out_channels: int, hidden: int = 32, mid_channels: int = 8):
        super().__init__()
        self.token_grid = tuple(token_grid)
        self.upsample = tuple(upsample)
        self.fc1 = nn.Linear(1, hidden)
        self.fc2 = nn.Linear(hidden, hidden)
        self.fc3 = nn.Linear(hidden, mid_channels)
        self.conv = nn.Conv3d(mid_channels, out_channels, 3, padding=1)

    def forward(self, w: torch.Tensor) -> torch.Tensor:
        b, n, _ = w.shape
        if n != math.prod(self.token_grid):
            raise ShapeError(f"{n} tokens do not factor as grid {self.token_grid}")
        h = F.gelu(self.fc1(w))
        h = F.gelu(self.fc2(h))
        h = self.fc3(h)                                   # (B, L, C')
        f, hh, ww = self.token_grid
        h = h.transpose(1, 2).reshape(b, -1, f, hh, ww)   # (B, C', F', H', W')
        if self.upsample != (1, 1, 1):
            h = F.interpolate(h, scale_factor=self.upsample, mode="nearest")
        return self.conv(h).transpose(1, 2)               # (B, F, C, H, W)


class HADCBlock(nn.Module):
    def __init__(self, width: int, token_grid, upsample, mask_channels: int,
                 gate_bias: float = 0.0):
        super().__init__()
        self.predictor = WeightPredictor(width, gate_bias)
        self.mask_head = MaskHead(token_grid, upsample, mask_channels)


def predict_weights_k(predictor: WeightPredictor, s_k: torch.Tensor, a_i_k: torch.Tensor):
    return predictor(s_k, a_i_k)


def fuse_k(a_i_k: torch.Tensor, s_k: torch.Tensor, w_k: torch.Tensor) -> torch.Tensor:
    """a_i + w·s with the per-token gate broadcast over channels."""
    if a_i_k.shape != s_k.shape:
        raise ShapeError(f"a_i {tuple(a_i_k.shape)} and s {tuple(s_k.shape)} must match")
    if w_k.shape[:-1] != a_i_k.shape[:-1] or w_k.shape[-1] not in (1, a_i_k.shape[-1]):
        raise ShapeError(f"gate {tuple(w_k.shape)} cannot broadcast onto {tuple(a_i_k.shape)}")
    return a_i_k + w_k * s_k


def mask_head_k(head: MaskHead, w_k: torch.Tensor) -> torch.Tensor:
    return head(w_k)


def loss_mask(predictions: list[torch.Tensor], m: torch.Tensor) -> torch.Tensor:
    """Sum over heads of the per-element mean squared error against the mask latent."""
    if not predictions:
        raise ShapeError("no mask predictions")
    total = m.new_zeros(())
    for p in predictions:
        if p.shape != m.shape:
            raise ShapeError(f"mask prediction {tuple(p.shape)} does not match {tuple(m.shape)}")
        total = total + torch.mean((p - m) ** 2)
    return total
