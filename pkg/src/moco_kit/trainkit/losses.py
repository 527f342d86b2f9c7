"""The combined training objective and the gradient path of the tracking loss."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..diffusion.schedule import NoiseSchedule, forward_noise, loss_noise
from ..tracking import loss_track, soft_track

MIN_ALPHA_BAR = 1e-6


@dataclass(frozen=True)
class LossWeights:
    lambda_m: float = 0.001
    lambda_track: float = 0.01

    def __post_init__(self):
        if not (self.lambda_m >= 0 and self.lambda_track >= 0):
            raise ValueError("loss weights must be non-negative")


def combine_losses(l_d, l_m, l_track, weights: LossWeights = LossWeights()):
    """L_d + λ_m·L_m + λ_track·L_track; a zero weight drops its term entirely."""
    total = l_d
    if weights.lambda_m != 0:
        total = total + weights.lambda_m * l_m
    if weights.lambda_track != 0:
        total = total + weights.lambda_track * l_track
    return total


@dataclass
class TrackResult:
    loss: torch.Tensor
    skipped: bool = False


def tracking_grad_path(z_t: torch.Tensor, eps_hat: torch.Tensor, t: int, schedule: NoiseSchedule,
                       gt_video: torch.Tensor, queries, vae, gt_tracks=None,
                       min_alpha_bar: float = MIN_ALPHA_BAR) -> TrackResult:
    """L_track for one clip through ẑ0 = (z_t − √(1−ᾱ)·ε̂)/√ᾱ, the decoder and the soft tracker.

    ``z_t``/``eps_hat`` are single latents (F, C, H', W'); ``gt_video`` is
    (T, H, W, 3). ``gt_tracks`` may carry the tracker output on ``gt_video``
    when it has been computed before. Below ``min_alpha_bar`` the estimate is
    too unstable and the loss is skipped (returned as a zero).
    """
    ab = float(schedule.alpha_bar(int(t)))
    if not ab >= min_alpha_bar:
        return TrackResult(eps_hat.new_zeros(()), skipped=True)
    z0_hat = (z_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)
    video = vae.decode(z0_hat[None])[0]
    gen = soft_track(video, queries).points
    if gt_tracks is None:
        gt_tracks = soft_track(gt_video.to(video.dtype), queries).points
    return TrackResult(loss_track(gen, gt_tracks.to(gen.dtype)))


@dataclass
class LossComponents:
    l_d: torch.Tensor
    l_m: torch.Tensor
    l_track: torch.Tensor
    track_skipped: int = 0
    weights: list[torch.Tensor] = field(default_factory=list)

    def as_floats(self) -> dict:
        return {"l_d": self.l_d.item(), "l_m": self.l_m.item(), "l_track": self.l_track.item(),
                "track_skipped": self.track_skipped}


@dataclass
class Batch:
    """One training batch; latents are cached frozen-encoder outputs."""
    clip_ids: list[str]
    prompts: list[str]
    latents: torch.Tensor
    structure_latents: torch.Tensor | None
    mask_latents: torch.Tensor
    videos: torch.Tensor      # (B, T, H, W, 3), ground truth for the tracker
    queries: list[torch.Tensor]
    gt_tracks: list[torch.Tensor | None]


def total_loss(batch: Batch, model, weights: LossWeights, schedule: NoiseSchedule,
               t: torch.Tensor, eps: torch.Tensor, hadc: bool = True, track_items: int = 1,
               min_alpha_bar: float = MIN_ALPHA_BAR):
    """(L, components) for a batch at the given timesteps and noise.

    The mask loss needs the HADC gates and is zero without them; the tracking
    loss is evaluated on the first ``track_items`` clips of the batch.
    """
    text = model.encode_text(batch.prompts)
    z_t = forward_noise(batch.latents, t.numpy(), eps, schedule)
    out = model.predict_noise(z_t, t, text, hadc=hadc, structure_latent=batch.structure_latents)
    l_d = loss_noise(out.eps_hat, eps)
    zero = l_d.new_zeros(())
    l_m = zero
    if weights.lambda_m != 0 and out.weights:
        l_m = model.loss_mask(out.weights, mask_latent=batch.mask_latents)
    l_track, skipped = zero, 0
    if weights.lambda_track != 0 and track_items > 0:
        terms = []
        for i in range(min(track_items, len(batch.clip_ids))):
            res = tracking_grad_path(z_t[i], out.eps_hat[i], int(t[i]), schedule, batch.videos[i],
                                     batch.queries[i], model.vae, batch.gt_tracks[i],
                                     min_alpha_bar)
            if res.skipped:
                skipped += 1
            else:
                terms.append(res.loss)
        if terms:
            l_track = torch.stack(terms).mean()
    comps = LossComponents(l_d, l_m, l_track, skipped, out.weights)
    return combine_losses(l_d, l_m, l_track, weights), comps
