"""Video autoencoders mapping (B, T, H, W, 3) videos to (B, F, C, H', W') latents."""
from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import ShapeError


def _check_video(video: torch.Tensor, patch) -> None:
    pt, ps, _ = patch
    if video.ndim != 5:
        raise ShapeError(f"video must be (B, T, H, W, C), got {tuple(video.shape)}")
    _, t, h, w, _ = video.shape
    if t % pt or h % ps or w % ps:
        raise ShapeError(f"video dims {(t, h, w)} not divisible by patch {tuple(patch)}")


def space_to_channel(video: torch.Tensor, patch=(4, 8, 8)) -> torch.Tensor:
    """Fold time and space patches into channels; a pure permutation of the input."""
    _check_video(video, patch)
    pt, ph, pw = patch
    b, t, h, w, c = video.shape
    x = video.reshape(b, t // pt, pt, h // ph, ph, w // pw, pw, c)
    x = x.permute(0, 1, 2, 4, 6, 7, 3, 5)
    return x.reshape(b, t // pt, pt * ph * pw * c, h // ph, w // pw)


def channel_to_space(latent: torch.Tensor, patch=(4, 8, 8), channels: int = 3) -> torch.Tensor:
    pt, ph, pw = patch
    if latent.ndim != 5 or latent.shape[2] != pt * ph * pw * channels:
        raise ShapeError(f"latent {tuple(latent.shape)} does not match patch {tuple(patch)}")
    b, f, _, hl, wl = latent.shape
    x = latent.reshape(b, f, pt, ph, pw, channels, hl, wl)
    x = x.permute(0, 1, 2, 6, 3, 7, 4, 5)
    return x.reshape(b, f * pt, hl * ph, wl * pw, channels)


class IdentityPatchify(nn.Module):
    """Exactly invertible space-to-channel rearrangement (no parameters)."""

    mode = "identity_patchify"

    def __init__(self, patch=(4, 8, 8), channels: int = 3):
        super().__init__()
        self.patch = tuple(patch)
        self.channels = channels

    @property
    def latent_channels(self) -> int:
        return math.prod(self.patch) * self.channels

    def latent_shape(self, frames: int, height: int, width: int) -> tuple[int, int, int, int]:
        pt, ph, pw = self.patch
        return frames // pt, self.latent_channels, height // ph, width // pw

    def encode(self, video: torch.Tensor) -> torch.Tensor:
        return space_to_channel(video, self.patch)

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        return channel_to_space(latent, self.patch, self.channels)


class LearnedSmallVAE(nn.Module):
    """Small conv autoencoder on the same latent grid as ``IdentityPatchify``.

    Encoder and decoder are each a linear 1x1 map plus a zero-initialized
    nonlinear residual with a 3x3x3 receptive field. :func:`fit_autoencoder`
    starts the linear maps at the principal components of the folded patches
    and then trains everything on reconstruction error. Deterministic (no
    sampling).
    """

    mode = "learned_small"

    def __init__(self, patch=(4, 8, 8), channels: int = 3, latent_channels: int = 192,
                 hidden: int = 384):
        super().__init__()
        self.patch = tuple(patch)
        self.channels = channels
        self._latent_channels = latent_channels
        folded = math.prod(self.patch) * channels
        if latent_channels > folded:
            raise ValueError(f"latent_channels {latent_channels} exceeds patch size {folded}")
        self.enc_lin = nn.Conv3d(folded, latent_channels, 1)
        self.enc_res = nn.Sequential(
            nn.Conv3d(folded, hidden, 1), nn.GELU(),
            nn.Conv3d(hidden, latent_channels, 3, padding=1),
        )
        self.dec_lin = nn.Conv3d(latent_channels, folded, 1)
        self.dec_res = nn.Sequential(
            nn.Conv3d(latent_channels, hidden, 3, padding=1), nn.GELU(),
            nn.Conv3d(hidden, folded, 1),
        )
        for res in (self.enc_res, self.dec_res):
            nn.init.zeros_(res[-1].weight)
            nn.init.zeros_(res[-1].bias)
        # latent centring (per channel) and scale (shared), set by ``calibrate``
        self.register_buffer("latent_mean", torch.zeros(latent_channels))
        self.register_buffer("latent_std", torch.ones(latent_channels))

    @property
    def latent_channels(self) -> int:
        return self._latent_channels

    def latent_shape(self, frames, height, width):
        pt, ph, pw = self.patch
        return frames // pt, self._latent_channels, height // ph, width // pw

    def _stats(self, like):
        shape = (1, 1, -1, 1, 1)
        return (self.latent_mean.to(like.dtype).reshape(shape),
                self.latent_std.to(like.dtype).reshape(shape))

    def encode(self, video: torch.Tensor) -> torch.Tensor:
        x = space_to_channel(video, self.patch).transpose(1, 2)
        z = (self.enc_lin(x) + self.enc_res(x)).transpose(1, 2)
        mean, std = self._stats(z)
        return (z - mean) / std

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        mean, std = self._stats(latent)
        h = (latent * std + mean).transpose(1, 2)
        x = (self.dec_lin(h) + self.dec_res(h)).transpose(1, 2)
        return channel_to_space(x, self.patch, self.channels)

    @torch.no_grad()
    def init_principal(self, videos: torch.Tensor) -> None:
        """Set the linear maps to the top principal components of the folded patches."""
        x = space_to_channel(videos, self.patch).double()
        x = x.permute(0, 1, 3, 4, 2).reshape(-1, x.shape[2])
        mu = x.mean(dim=0)
        _, _, vh = torch.linalg.svd(x - mu, full_matrices=False)
        basis = vh[:self._latent_channels]                  # (C, folded)
        w = self.enc_lin.weight
        w.copy_(basis.reshape(w.shape).to(w.dtype))
        self.enc_lin.bias.copy_((-basis @ mu).to(w.dtype))
        d = self.dec_lin.weight
        d.copy_(basis.T.reshape(d.shape).to(d.dtype))
        self.dec_lin.bias.copy_(mu.to(d.dtype))
        self.latent_mean.zero_()
        self.latent_std.fill_(1.0)

    @torch.no_grad()
    def calibrate(self, videos: torch.Tensor) -> None:
        """Centre each latent channel and scale all channels by one common factor.

        A single scale keeps the relative variance of the channels, so
        low-energy detail channels stay small next to the diffusion noise
        instead of being inflated to unit variance.
        """
        self.latent_mean.zero_()
        self.latent_std.fill_(1.0)
        z = self.encode(videos)
        mean = z.mean(dim=(0, 1, 3, 4))
        self.latent_mean.copy_(mean)
        centred = z - mean.reshape(1, 1, -1, 1, 1)
        self.latent_std.fill_(float(centred.pow(2).mean().sqrt().clamp_min(1e-4)))


def build_vae(mode: str = "identity_patchify", patch=(4, 8, 8), **kwargs) -> nn.Module:
    if mode == "identity_patchify":
        return IdentityPatchify(patch)
    if mode == "learned_small":
        return LearnedSmallVAE(patch, **kwargs)
    raise ValueError(f"unknown vae_mode {mode!r}")


def vae_encode(vae, video: torch.Tensor) -> torch.Tensor:
    return vae.encode(video)


def vae_decode(vae, latent: torch.Tensor) -> torch.Tensor:
    return vae.decode(latent)


def psnr(reference: torch.Tensor, estimate: torch.Tensor, peak: float = 1.0) -> float:
    mse = torch.mean((reference.double() - estimate.double()) ** 2).item()
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def fit_autoencoder(vae: LearnedSmallVAE, videos: torch.Tensor, steps: int = 300,
                    lr: float = 3e-4, batch_size: int = 4, seed: int = 0) -> list[float]:
    """Principal-component start, then reconstruction-MSE training; returns the loss curve."""
    gen = torch.Generator().manual_seed(seed)
    vae.init_principal(videos)
    opt = torch.optim.Adam(vae.parameters(), lr=lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, steps)
    losses = []
    for _ in range(steps):
        idx = torch.randint(0, videos.shape[0], (min(batch_size, videos.shape[0]),), generator=gen)
        batch = videos[idx]
        loss = torch.mean((vae.decode(vae.encode(batch)) - batch) ** 2)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        losses.append(loss.item())
    vae.calibrate(videos)
    return losses
