"""Post-training measurements: gate selectivity and skeleton adherence of generated clips."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..diffusion.schedule import NoiseSchedule, forward_noise
from ..tracking import soft_track
from .data import ClipData, EncodedClips


def token_mask_coverage(mask: torch.Tensor, token_grid, patch=(4, 8, 8)) -> torch.Tensor:
    """(B, L) fraction of each token's pixel footprint inside the mask (B, T, H, W, 1)."""
    m = mask[..., 0][:, None].float()                      # (B, 1, T, H, W)
    cov = F.avg_pool3d(m, kernel_size=patch, stride=patch)  # (B, 1, F', H', W')
    cov = cov[:, 0]
    if tuple(cov.shape[1:]) != tuple(token_grid):
        cov = F.adaptive_avg_pool3d(cov[:, None], token_grid)[:, 0]
    return cov.reshape(cov.shape[0], -1)


@dataclass
class GateStats:
    inside: float
    outside: float

    @property
    def ratio(self) -> float:
        return self.inside / self.outside if self.outside > 0 else float("inf")


@torch.no_grad()
def gate_statistics(model, enc: EncodedClips, schedule: NoiseSchedule, timesteps=None,
                    seed: int = 0) -> GateStats:
    """Mean gate w over tokens mostly inside the human mask vs. the rest.

    Averaged over every guided block, every clip and the given timesteps.
    A token counts as inside when more than half its footprint is masked.
    """
    gen = torch.Generator().manual_seed(seed)
    if timesteps is None:
        timesteps = np.linspace(1, schedule.steps, 5).round().astype(int).tolist()
    masks = torch.stack([c.mask for c in enc.clips])
    cov = token_mask_coverage(masks, model.backbone.token_grid)
    inside = cov > 0.5
    text = model.encode_text(enc.prompts)
    sums = np.zeros(2)
    counts = np.zeros(2)
    for t in timesteps:
        eps = torch.randn(enc.latents.shape, generator=gen)
        z_t = forward_noise(enc.latents, t, eps, schedule)
        out = model.predict_noise(z_t, t, text, structure_latent=enc.structure_latents)
        for w in out.weights:
            w = w[..., 0]
            sums += [float(w[inside].sum()), float(w[~inside].sum())]
            counts += [int(inside.sum()), int((~inside).sum())]
    mean = sums / np.maximum(counts, 1)
    return GateStats(float(mean[0]), float(mean[1]))


@torch.no_grad()
def generate_video(model, prompt: str, skeleton: torch.Tensor | None, schedule: NoiseSchedule,
                   seed: int = 0, mode: str = "deterministic", hadc: bool = True) -> torch.Tensor:
    """One (T, H, W, 3) clip from the prompt, optionally guided by a skeleton video."""
    gen = torch.Generator().manual_seed(seed)
    z_T = torch.randn((1, *model.latent_shape), generator=gen)
    text = model.encode_text([prompt])
    g_s = None if skeleton is None else skeleton[None]
    return model.sample(z_T, text, schedule, g_s, mode, gen, hadc)[0]


def tracked_displacement(video: torch.Tensor, queries) -> np.ndarray:
    """(T,) mean distance in pixels of the tracked queries from their frame-0 position."""
    video = torch.as_tensor(video).double()
    _, h, w, _ = video.shape
    pts = soft_track(video, queries).points.numpy() * np.array([w, h])
    return np.linalg.norm(pts - pts[:, :1], axis=-1).mean(axis=0)


def root_displacement(root_path: np.ndarray) -> np.ndarray:
    """(T,) distance in pixels of the projected root from its frame-0 position."""
    root_path = np.asarray(root_path, dtype=np.float64)
    return np.linalg.norm(root_path - root_path[:1], axis=-1)


def path_length(video: torch.Tensor, queries) -> float:
    """Total tracked motion: summed frame-to-frame step of the query tracks, averaged over queries."""
    video = torch.as_tensor(video).double()
    _, h, w, _ = video.shape
    pts = soft_track(video, queries).points.numpy() * np.array([w, h])
    return float(np.linalg.norm(np.diff(pts, axis=1), axis=-1).sum(axis=1).mean())


@dataclass
class AdherenceReport:
    pearson_r: float
    root: list[np.ndarray]
    tracked: list[np.ndarray]
    clip_ids: list[str]


def skeleton_adherence(model, clips: list[ClipData], schedule: NoiseSchedule, seed: int = 0,
                       mode: str = "deterministic") -> AdherenceReport:
    """Pearson r between conditioning-root and generated-track displacement over all frames."""
    roots, tracks = [], []
    for i, c in enumerate(clips):
        video = generate_video(model, c.prompt, c.skeleton, schedule, seed + i, mode)
        roots.append(root_displacement(c.root_path))
        tracks.append(tracked_displacement(video, c.queries))
    x = np.concatenate([r[1:] for r in roots])
    y = np.concatenate([t[1:] for t in tracks])
    r = float(np.corrcoef(x, y)[0, 1]) if x.std() > 0 and y.std() > 0 else float("nan")
    return AdherenceReport(r, roots, tracks, [c.clip_id for c in clips])


@dataclass
class SwapReport:
    prompt: str
    moving_motion: float
    still_motion: float

    @property
    def ratio(self) -> float:
        return self.moving_motion / self.still_motion if self.still_motion > 0 else float("inf")


def skeleton_swap(model, moving: ClipData, still: ClipData, schedule: NoiseSchedule,
                  seed: int = 0, mode: str = "deterministic") -> SwapReport:
    """Generate the moving clip's prompt under both skeletons and compare total tracked motion.

    Queries follow the conditioning skeleton, since that decides where the
    figure is drawn.
    """
    a = generate_video(model, moving.prompt, moving.skeleton, schedule, seed, mode)
    b = generate_video(model, moving.prompt, still.skeleton, schedule, seed, mode)
    return SwapReport(moving.prompt, path_length(a, moving.queries), path_length(b, still.queries))
