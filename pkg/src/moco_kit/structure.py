"""Structure branch: trainable copies of the first N backbone blocks.

The branch encodes the skeleton latent E(g_s) into per-block guidance
features s^1..s^N. Each output passes through a zero-initialized linear
injection, so a freshly built branch contributes exactly nothing.
"""
from __future__ import annotations

import copy

import torch
from torch import nn

from .diffusion.dit import NoisePredictor
from .diffusion.text import TextEmbedding


class StructureBranch(nn.Module):
    def __init__(self, backbone: NoisePredictor, n_blocks: int = 8):
        super().__init__()
        if not 1 <= n_blocks <= len(backbone.blocks):
            raise ValueError(f"need 1 <= N <= {len(backbone.blocks)}, got {n_blocks}")
        self.n_blocks = n_blocks
        self.patch_embed = copy.deepcopy(backbone.patch_embed)
        self.blocks = nn.ModuleList(copy.deepcopy(b) for b in backbone.blocks[:n_blocks])
        width = backbone.config.width
        self.inject = nn.ModuleList(nn.Linear(width, width) for _ in range(n_blocks))
        self.zero_injections()

    def zero_injections(self) -> None:
        for lin in self.inject:
            nn.init.zeros_(lin.weight)
            nn.init.zeros_(lin.bias)

    @torch.no_grad()
    def copy_from(self, backbone: NoisePredictor) -> None:
        """Re-copy block weights from the backbone (e.g. after it was pretrained)."""
        self.patch_embed.load_state_dict(backbone.patch_embed.state_dict())
        for mine, theirs in zip(self.blocks, backbone.blocks):
            mine.load_state_dict(theirs.state_dict())

    def forward(self, cond_latent: torch.Tensor, temb: torch.Tensor, text: TextEmbedding,
                backbone: NoisePredictor) -> list[torch.Tensor]:
        """Guidance features, each shaped like the backbone token stream (B, L, D)."""
        x = backbone.embed_tokens(backbone.to_tokens(cond_latent), temb, self.patch_embed)
        feats = []
        for block, proj in zip(self.blocks, self.inject):
            x = block(x, text)
            feats.append(proj(x))
        return feats
