"""Toy diffusion transformer used as the noise predictor G_θ."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ShapeError
from .text import TextEmbedding


@dataclass
class BackboneConfig:
    block_count: int = 4
    width: int = 128
    heads: int = 4
    patch_t: int = 1
    patch_s: int = 1
    mlp_ratio: int = 4
    vae_mode: str = "identity_patchify"

    def __post_init__(self):
        if self.width % self.heads:
            raise ValueError("width must be divisible by heads")
        if self.block_count < 1:
            raise ValueError("block_count must be >= 1")


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float64) / half)
    args = t.double()[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=-1)
    return emb


def sincos_grid_embedding(grid: tuple[int, int, int], dim: int) -> torch.Tensor:
    """(L, dim) fixed position code, one sin/cos band per grid axis."""
    per_axis = 2 * (dim // 6)
    axes = []
    for n in grid:
        pos = np.arange(n, dtype=np.float64)
        half = per_axis // 2
        omega = 1.0 / 10000 ** (np.arange(half) / max(half, 1))
        out = np.outer(pos, omega)
        axes.append(np.concatenate([np.sin(out), np.cos(out)], axis=1))
    f, h, w = grid
    emb = np.concatenate([
        np.repeat(axes[0], h * w, axis=0),
        np.tile(np.repeat(axes[1], w, axis=0), (f, 1)),
        np.tile(axes[2], (f * h, 1)),
    ], axis=1)
    emb = np.pad(emb, ((0, 0), (0, dim - emb.shape[1])))
    return torch.from_numpy(emb)


class Attention(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(width, width)
        self.kv = nn.Linear(width, 2 * width)
        self.out = nn.Linear(width, width)

    def forward(self, x, context=None, key_mask=None):
        context = x if context is None else context
        b, n, d = x.shape
        h = self.heads
        q = self.q(x).reshape(b, n, h, d // h).transpose(1, 2)
        k, v = self.kv(context).reshape(b, context.shape[1], 2, h, d // h).permute(2, 0, 3, 1, 4)
        mask = None if key_mask is None else key_mask[:, None, None, :]
        y = F.scaled_dot_product_attention(q, k, v, attn_mask=mask)
        return self.out(y.transpose(1, 2).reshape(b, n, d))


class DiTBlock(nn.Module):
    def __init__(self, width: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = Attention(width, heads)
        self.norm2 = nn.LayerNorm(width)
        self.cross = Attention(width, heads)
        self.norm3 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(nn.Linear(width, mlp_ratio * width), nn.GELU(),
                                 nn.Linear(mlp_ratio * width, width))

    def forward(self, x, text: TextEmbedding):
        x = x + self.attn(self.norm1(x))
        x = x + self.cross(self.norm2(x), text.tokens, text.key_mask)
        return x + self.mlp(self.norm3(x))


Injector = Callable[[int, torch.Tensor], torch.Tensor]


class NoisePredictor(nn.Module):
    """Patch tokens + time embedding → DiT blocks → per-token linear head.

    The head adds a time-dependent per-channel gain on the noisy input so the
    identity part of the noise estimate does not have to pass through the
    width-limited token stream.
    """

    def __init__(self, config: BackboneConfig, latent_channels: int,
                 latent_grid: tuple[int, int, int]):
        super().__init__()
        self.config = config
        self.latent_channels = latent_channels
        f, h, w = latent_grid
        pt, ps = config.patch_t, config.patch_s
        if f % pt or h % ps or w % ps:
            raise ShapeError(f"latent grid {latent_grid} not divisible by DiT patch {(pt, ps)}")
        self.latent_grid = tuple(latent_grid)
        self.token_grid = (f // pt, h // ps, w // ps)
        self.token_dim = latent_channels * pt * ps * ps
        d = config.width
        self.patch_embed = nn.Linear(self.token_dim, d)
        self.register_buffer("pos_embed", sincos_grid_embedding(self.token_grid, d).float(),
                             persistent=False)
        self.time_embed = nn.Sequential(nn.Linear(d, d), nn.GELU(), nn.Linear(d, d))
        self.blocks = nn.ModuleList(DiTBlock(d, config.heads, config.mlp_ratio)
                                    for _ in range(config.block_count))
        self.norm_out = nn.LayerNorm(d)
        self.out = nn.Linear(d, self.token_dim)
        self.skip_gain = nn.Linear(d, self.token_dim)
        nn.init.zeros_(self.skip_gain.weight)
        nn.init.zeros_(self.skip_gain.bias)

    @property
    def token_count(self) -> int:
        return math.prod(self.token_grid)

    # -- token layout ---------------------------------------------------------
    def to_tokens(self, z: torch.Tensor) -> torch.Tensor:
        if z.ndim != 5 or tuple(z.shape[1:]) != (self.latent_grid[0], self.latent_channels,
                                                 *self.latent_grid[1:]):
            raise ShapeError(f"latent {tuple(z.shape)} does not match backbone grid "
                             f"{self.latent_grid} with {self.latent_channels} channels")
        b, f, c, h, w = z.shape
        pt, ps = self.config.patch_t, self.config.patch_s
        x = z.reshape(b, f // pt, pt, c, h // ps, ps, w // ps, ps)
        x = x.permute(0, 1, 4, 6, 2, 3, 5, 7)
        return x.reshape(b, self.token_count, self.token_dim)

    def from_tokens(self, x: torch.Tensor) -> torch.Tensor:
        b = x.shape[0]
        pt, ps = self.config.patch_t, self.config.patch_s
        ft, ht, wt = self.token_grid
        c = self.latent_channels
        x = x.reshape(b, ft, ht, wt, pt, c, ps, ps)
        x = x.permute(0, 1, 4, 5, 2, 6, 3, 7)
        return x.reshape(b, ft * pt, c, ht * ps, wt * ps)

    # -- forward --------------------------------------------------------------
    def embed_time(self, t: torch.Tensor) -> torch.Tensor:
        d = self.config.width
        return self.time_embed(timestep_embedding(t, d).to(self.patch_embed.weight.dtype))

    def embed_tokens(self, tokens: torch.Tensor, temb: torch.Tensor,
                     patch_embed: nn.Linear | None = None) -> torch.Tensor:
        patch_embed = patch_embed or self.patch_embed
        return patch_embed(tokens) + self.pos_embed.to(tokens.dtype) + temb[:, None, :]

    def forward(self, z_t: torch.Tensor, t: torch.Tensor, text: TextEmbedding,
                injector: Injector | None = None, temb: torch.Tensor | None = None) -> torch.Tensor:
        t = torch.as_tensor(t).reshape(-1).expand(z_t.shape[0])
        zt = self.to_tokens(z_t)
        if temb is None:
            temb = self.embed_time(t)
        x = self.embed_tokens(zt, temb)
        for k, block in enumerate(self.blocks):
            x = block(x, text)
            if injector is not None:
                x = injector(k, x)
        eps = self.out(self.norm_out(x)) + self.skip_gain(temb)[:, None, :] * zt
        return self.from_tokens(eps)


def output_projections(model: nn.Module) -> list[nn.Linear]:
    """Every linear layer that writes into the residual stream or the output."""
    layers = []
    for name, mod in model.named_modules():
        if isinstance(mod, nn.Linear) and (name.endswith(".out") or name.endswith("mlp.2")
                                           or name in ("out", "skip_gain")):
            layers.append(mod)
    return layers
