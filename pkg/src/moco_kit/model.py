"""The full generator: text encoder, autoencoder, frozen backbone, structure branch and HADC."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .diffusion.dit import BackboneConfig, NoisePredictor
from .diffusion.sampling import sample_loop
from .diffusion.schedule import NoiseSchedule
from .diffusion.text import TextEmbedding, TextEncoder
from .diffusion.vae import build_vae
from .hadc import HADCBlock, fuse_k, loss_mask, mask_head_k, predict_weights_k
from .structure import StructureBranch


@dataclass
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    structure_blocks: int = 4
    frames: int = 16
    height: int = 48
    width: int = 64
    vae_patch: tuple[int, int, int] = (4, 8, 8)
    latent_channels: int = 192  # learned autoencoder only; patchify fixes its own
    gate_bias: float = 0.0


@dataclass
class NoiseOutput:
    eps_hat: torch.Tensor
    weights: list[torch.Tensor] = field(default_factory=list)
    features: list[torch.Tensor] = field(default_factory=list)


class MoCoModel(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config = config or ModelConfig()
        bcfg = config.backbone
        vae_kwargs = {"latent_channels": config.latent_channels} \
            if bcfg.vae_mode == "learned_small" else {}
        self.vae = build_vae(bcfg.vae_mode, config.vae_patch, **vae_kwargs)
        f, c, h, w = self.vae.latent_shape(config.frames, config.height, config.width)
        self.latent_shape = (f, c, h, w)
        self.text = TextEncoder(bcfg.width)
        self.backbone = NoisePredictor(bcfg, c, (f, h, w))
        self.structure_branch = StructureBranch(self.backbone, config.structure_blocks)
        upsample = (bcfg.patch_t, bcfg.patch_s, bcfg.patch_s)
        self.hadc = nn.ModuleList(
            HADCBlock(bcfg.width, self.backbone.token_grid, upsample, c, config.gate_bias)
            for _ in range(config.structure_blocks))

    @property
    def n_structure_blocks(self) -> int:
        return self.structure_branch.n_blocks

    def encode_text(self, texts) -> TextEmbedding:
        return self.text(texts)

    def encode_structure(self, g_s: torch.Tensor, text: TextEmbedding, t) -> list[torch.Tensor]:
        """s^1..s^N for a batch of skeleton videos (B, T, H, W, 3)."""
        t = torch.as_tensor(t).reshape(-1).expand(g_s.shape[0])
        temb = self.backbone.embed_time(t)
        return self.structure_branch(self.vae.encode(g_s), temb, text, self.backbone)

    def predict_noise(self, z_t: torch.Tensor, t, text: TextEmbedding,
                      g_s: torch.Tensor | None = None, hadc: bool = True,
                      structure_latent: torch.Tensor | None = None) -> NoiseOutput:
        """Noise estimate; with ``g_s`` the branch features are fused after each of the first N blocks.

        ``structure_latent`` may replace ``g_s`` when E(g_s) is already known.
        With ``hadc=False`` the features are added ungated (plain branch
        injection), which is the HADC ablation.
        """
        t = torch.as_tensor(t).reshape(-1).expand(z_t.shape[0])
        temb = self.backbone.embed_time(t)
        out = NoiseOutput(eps_hat=None)
        injector = None
        if structure_latent is None and g_s is not None:
            structure_latent = self.vae.encode(g_s)
        if structure_latent is not None:
            feats = self.structure_branch(structure_latent, temb, text, self.backbone)
            out.features = feats

            def injector(k, x):
                if k >= len(feats):
                    return x
                if not hadc:
                    return x + feats[k]
                w = predict_weights_k(self.hadc[k].predictor, feats[k], x)
                out.weights.append(w)
                return fuse_k(x, feats[k], w)

        out.eps_hat = self.backbone(z_t, t, text, injector, temb)
        return out

    def mask_predictions(self, weights: list[torch.Tensor]) -> list[torch.Tensor]:
        return [mask_head_k(self.hadc[k].mask_head, w) for k, w in enumerate(weights)]

    def mask_latent(self, mask: torch.Tensor) -> torch.Tensor:
        """E(M) with the single-channel mask replicated to three channels."""
        return self.vae.encode(mask.expand(*mask.shape[:-1], 3))

    def loss_mask(self, weights, mask=None, mask_latent=None) -> torch.Tensor:
        if mask_latent is None:
            mask_latent = self.mask_latent(mask)
        return loss_mask(self.mask_predictions(weights), mask_latent)

    @torch.no_grad()
    def sample(self, z_T: torch.Tensor, text: TextEmbedding, schedule: NoiseSchedule,
               g_s: torch.Tensor | None = None, mode: str = "deterministic",
               generator: torch.Generator | None = None, hadc: bool = True) -> torch.Tensor:
        """Reverse diffusion from ``z_T`` followed by decoding; video clamped to [0, 1]."""
        cond = None if g_s is None else self.vae.encode(g_s)

        def predict(x, t):
            return self.predict_noise(x, t, text, hadc=hadc, structure_latent=cond).eps_hat

        z0 = sample_loop(predict, z_T, schedule, mode, generator)
        return torch.clamp(self.vae.decode(z0), 0.0, 1.0)


FROZEN_PREFIXES = ("text.", "vae.", "backbone.")
TRAINABLE_PREFIXES = ("structure_branch.", "hadc.")


def freeze_plan(model: MoCoModel) -> dict[str, list[str]]:
    """Disjoint split of parameter names into frozen and trainable sets."""
    plan = {"frozen": [], "trainable": []}
    for name, _ in model.named_parameters():
        if name.startswith(FROZEN_PREFIXES):
            plan["frozen"].append(name)
        elif name.startswith(TRAINABLE_PREFIXES):
            plan["trainable"].append(name)
        else:
            raise KeyError(f"parameter {name} is not covered by the freeze plan")
    return plan


def apply_freeze_plan(model: MoCoModel) -> dict[str, list[str]]:
    plan = freeze_plan(model)
    params = dict(model.named_parameters())
    for name in plan["frozen"]:
        params[name].requires_grad_(False)
    for name in plan["trainable"]:
        params[name].requires_grad_(True)
    return plan
