"""Loading curated clips into tensors and assembling training batches."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..curation import manifest_root, read_manifest
from ..errors import NoData
from ..motion import read_keypoints
from ..render import CameraModel, load_array, project
from ..tracking import soft_track


@dataclass
class ClipData:
    clip_id: str
    prompt: str
    video: torch.Tensor       # (T, H, W, 3)
    skeleton: torch.Tensor    # (T, H, W, 3)
    mask: torch.Tensor        # (T, H, W, 1)
    queries: torch.Tensor     # (Q, 2) pixel coordinates at frame 0
    root_path: np.ndarray     # (T, 2) projected root joint, pixels
    motion_id: str = ""
    gt_tracks: torch.Tensor | None = None  # (Q, T, 2) tracker output on ``video``


def load_clip(clip_dir, clip_id: str | None = None, prompt: str | None = None) -> ClipData:
    d = Path(clip_dir)
    seq = read_keypoints(d / "keypoints.json")
    cam = CameraModel.from_dict(json.loads((d / "camera.json").read_text()))
    uv = project(seq, cam)
    meta_path = d / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    queries_path = d / "queries.json"
    mask = torch.from_numpy(load_array(d / "mask.npy")).float()
    if queries_path.exists():
        queries = torch.tensor(json.loads(queries_path.read_text()), dtype=torch.float64)
    else:
        rows, cols = torch.nonzero(mask[0, ..., 0] > 0, as_tuple=True)
        queries = torch.stack([cols, rows], -1)[:16].double()
    return ClipData(
        clip_id=clip_id or d.name,
        prompt=prompt if prompt is not None else (d / "prompt.txt").read_text().strip(),
        video=torch.from_numpy(load_array(d / "video.npy")).float(),
        skeleton=torch.from_numpy(load_array(d / "skeleton.npy")).float(),
        mask=mask,
        queries=queries,
        root_path=uv[:, 0],
        motion_id=meta.get("motion_id", ""),
    )


def load_manifest_clips(manifest_path, accepted_only: bool = True) -> list[ClipData]:
    """Clips listed in a manifest; raises NoData when nothing usable remains."""
    header, records = read_manifest(manifest_path)
    root = manifest_root(manifest_path, header)
    clips = []
    for rec in records:
        if accepted_only and not rec.accepted:
            continue
        if rec.video_path is None:
            continue
        clips.append(load_clip(root / Path(rec.video_path).parent, rec.clip_id, rec.prompt))
    if not clips:
        raise NoData(f"{manifest_path} has no accepted clips")
    return clips


def attach_gt_tracks(clips: list[ClipData]) -> None:
    """Track each clip's query points through its own ground-truth video once."""
    for c in clips:
        if c.gt_tracks is None:
            c.gt_tracks = soft_track(c.video.double(), c.queries).points.float()


@dataclass
class EncodedClips:
    """Frozen-encoder outputs cached once per run."""
    clips: list[ClipData]
    latents: torch.Tensor            # E(video)      (N, F, C, H', W')
    structure_latents: torch.Tensor  # E(g_s)
    mask_latents: torch.Tensor       # E(M) with M replicated to 3 channels
    prompts: list[str] = field(default_factory=list)


@torch.no_grad()
def encode_clips(model, clips: list[ClipData]) -> EncodedClips:
    video = torch.stack([c.video for c in clips])
    skel = torch.stack([c.skeleton for c in clips])
    mask = torch.stack([c.mask for c in clips])
    return EncodedClips(clips, model.vae.encode(video), model.vae.encode(skel),
                        model.mask_latent(mask), [c.prompt for c in clips])


class BatchOrder:
    """Deterministic batch order: a fresh permutation per epoch, keyed by (seed, epoch)."""

    def __init__(self, n_items: int, batch_size: int, seed: int):
        if n_items < 1:
            raise NoData("no training items")
        self.n = n_items
        self.batch_size = batch_size
        self.seed = seed

    def batch(self, step: int) -> list[int]:
        out = []
        pos = step * self.batch_size
        while len(out) < self.batch_size:
            epoch, offset = divmod(pos, self.n)
            perm = np.random.default_rng([self.seed, epoch]).permutation(self.n)
            out.append(int(perm[offset]))
            pos += 1
        return out
