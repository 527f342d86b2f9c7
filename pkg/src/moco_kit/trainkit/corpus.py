"""Synthetic stand-in corpus: procedural motions rendered into skeleton, mask and appearance videos."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..curation import build_manifest
from ..motion import MOTIONS, MotionPrompt, default_topology, synthesize_motion, write_keypoints
from ..render import (CameraModel, project, rasterize_mask, rasterize_skeleton, save_array)
from ..tracking import TrajectorySet, write_trajectories

SUBJECTS = ("man", "woman", "person", "boy", "girl")
COLORS = {
    "red": (0.85, 0.15, 0.12), "blue": (0.12, 0.25, 0.85), "green": (0.15, 0.7, 0.2),
    "yellow": (0.9, 0.8, 0.1), "purple": (0.55, 0.2, 0.7), "white": (0.92, 0.92, 0.92),
}
GARMENTS = ("coat", "shirt", "dress", "jacket", "hoodie")
SCENES = {
    "along the beach": (0.0, 1.0), "in a park": (1.3, 0.7), "on a city street": (2.1, 1.4),
    "across a field": (3.0, 0.5), "in a studio": (4.2, 1.1),
}
VERB = {"walk": "walks", "run": "runs", "jump": "jumps", "wave": "waves",
        "squat": "squats", "spin": "spins"}
# joints whose projections form the ground-truth trajectories
# overfit set: eight clips that pass curation plus two low-motion wave clips held out
# 8 moving clips for the overfit run plus 2 waves that curation rejects as low motion;
# the waves stay available as the still side of the skeleton swap
OVERFIT_MOTIONS = ("walk", "run", "jump", "walk", "run", "jump", "walk", "jump", "wave", "wave")
OVERFIT_SEED = 7
TRACK_JOINTS = (0, 1, 2, 4, 5, 7, 8, 9, 12, 15, 16, 17, 18, 19, 20, 21)
QUERY_COUNT = 16


@dataclass(frozen=True)
class ClipSpec:
    clip_id: str
    motion_id: str
    subject: str
    color: str
    garment: str
    scene: str
    seed: int

    @property
    def prompt(self) -> str:
        return f"A {self.subject} in a {self.color} {self.garment} {VERB[self.motion_id]} {self.scene}"


def background(scene: str, size: tuple[int, int]) -> np.ndarray:
    """Static smooth texture (H, W, 3) keyed by the scene phrase."""
    w, h = size
    phase, freq = SCENES[scene]
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    chans = []
    for c in range(3):
        v = (0.42 + 0.12 * np.sin(2 * np.pi * freq * x / 21.0 + phase + 1.7 * c)
             * np.cos(2 * np.pi * y / 17.0 + 0.5 * phase)
             + 0.08 * np.sin(2 * np.pi * (x + 2 * y) / 29.0 + 2.3 * c + phase))
        chans.append(v)
    return np.clip(np.stack(chans, axis=-1), 0.0, 1.0)


def compose_video(skeleton: np.ndarray, mask: np.ndarray, bg: np.ndarray,
                  tint: tuple[float, float, float]) -> np.ndarray:
    """Tint the human region of the background, then paint the skeleton over it."""
    tinted = 0.35 * bg + 0.65 * np.asarray(tint)
    base = bg[None] * (1.0 - mask) + tinted[None] * mask
    alpha = skeleton.max(axis=-1, keepdims=True)
    return np.clip(base * (1.0 - alpha) + skeleton, 0.0, 1.0)


def flat_color_clips(n: int, seed: int, frames: int = 16, size=(64, 48)) -> np.ndarray:
    """``n`` clips of one uniform random color each, shaped (n, T, H, W, 3)."""
    w, h = size
    colors = np.random.default_rng(seed).random((n, 1, 1, 1, 3))
    return np.broadcast_to(colors, (n, frames, h, w, 3)).copy()


def centered_camera(points_xy: np.ndarray, size=(64, 48),
                    scale: float | None = None) -> CameraModel:
    """Orthographic camera whose principal point centres the motion's bounding box.

    The default scale is 20 px per unit at a height of 48 px and grows with the frame height.
    """
    w, h = size
    if scale is None:
        scale = 20.0 * h / 48.0
    xmid = 0.5 * (points_xy[..., 0].min() + points_xy[..., 0].max())
    ymid = 0.5 * (points_xy[..., 1].min() + points_xy[..., 1].max())
    u0 = float(np.clip(round(w / 2 - scale * xmid, 2), 0, w - 1))
    v0 = float(np.clip(round(h / 2 + scale * ymid, 2), 0, h - 1))
    return CameraModel((w, h), scale, (u0, v0))


def sample_clip_specs(n_clips: int, seed: int, motions=None) -> list[ClipSpec]:
    rng = np.random.default_rng(seed)
    motions = tuple(motions) if motions else MOTIONS
    specs = []
    for i in range(n_clips):
        specs.append(ClipSpec(
            clip_id=f"clip_{i:04d}",
            motion_id=motions[i % len(motions)],
            subject=SUBJECTS[rng.integers(len(SUBJECTS))],
            color=list(COLORS)[rng.integers(len(COLORS))],
            garment=GARMENTS[rng.integers(len(GARMENTS))],
            scene=list(SCENES)[rng.integers(len(SCENES))],
            seed=int(rng.integers(0, 2**31 - 1)),
        ))
    return specs


@dataclass
class RenderedClip:
    spec: ClipSpec
    keypoints: object
    camera: CameraModel
    skeleton: np.ndarray
    mask: np.ndarray
    video: np.ndarray
    tracks: TrajectorySet
    queries: np.ndarray  # (Q, 2) pixel coordinates at frame 0


def render_clip(spec: ClipSpec, frames: int = 16, fps: int = 16, size=(64, 48),
                keypoints=None) -> RenderedClip:
    topo = default_topology()
    if keypoints is None:
        keypoints = synthesize_motion(MotionPrompt(spec.prompt, spec.motion_id, frames / fps,
                                                   spec.seed), topo, fps)
    cam = centered_camera(keypoints.positions, size)
    uv = project(keypoints, cam)
    raster = rasterize_skeleton(uv, topo, cam, depth=keypoints.positions[..., 2])
    mask = rasterize_mask(uv, topo, cam, raster).frames
    bg = background(spec.scene, size)
    video = compose_video(raster.frames, mask, bg, COLORS[spec.color])
    w, h = size
    norm = uv[:, list(TRACK_JOINTS)] / np.array([w, h], dtype=np.float64)
    tracks = TrajectorySet(np.ascontiguousarray(norm.transpose(1, 0, 2)))
    rng = np.random.default_rng(spec.seed)
    rows, cols = np.nonzero(mask[0, ..., 0] > 0)
    keep = (rows >= 4) & (rows < h - 4) & (cols >= 4) & (cols < w - 4)
    rows, cols = rows[keep], cols[keep]
    pick = rng.choice(len(rows), size=QUERY_COUNT, replace=len(rows) < QUERY_COUNT)
    queries = np.stack([cols[pick], rows[pick]], axis=-1).astype(np.float64)
    return RenderedClip(spec, keypoints, cam, raster.frames, mask, video, tracks, queries)


def write_clip(clip: RenderedClip, clip_dir) -> Path:
    d = Path(clip_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / "prompt.txt").write_text(clip.spec.prompt + "\n")
    write_keypoints(d / "keypoints.json", clip.keypoints)
    (d / "camera.json").write_text(json.dumps(clip.camera.to_dict(), sort_keys=True) + "\n")
    save_array(d / "skeleton.npy", clip.skeleton.astype(np.float32))
    save_array(d / "mask.npy", clip.mask.astype(np.float32))
    save_array(d / "video.npy", clip.video.astype(np.float32))
    write_trajectories(d / "tracks.json", clip.tracks)
    (d / "queries.json").write_text(json.dumps(clip.queries.tolist()) + "\n")
    meta = {"motion_id": clip.spec.motion_id, "seed": clip.spec.seed, "scene": clip.spec.scene,
            "color": clip.spec.color, "fps": clip.keypoints.fps}
    (d / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    return d


def make_synthetic_corpus(n_clips: int, seed: int, out_dir, motions=None, frames: int = 16,
                          fps: int = 16, size=(64, 48)) -> Path:
    """Write ``n_clips`` clip directories plus ``manifest.jsonl``; deterministic per seed."""
    if n_clips < 1:
        raise ValueError("n_clips must be >= 1")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        clips_dir = out / "clips"
        clips_dir.mkdir(exist_ok=True)
        for spec in sample_clip_specs(n_clips, seed, motions):
            write_clip(render_clip(spec, frames, fps, size), clips_dir / spec.clip_id)
    except OSError as exc:
        raise IOError(f"cannot write corpus to {out}: {exc}") from exc
    build_manifest(clips_dir, out / "manifest.jsonl")
    return out / "manifest.jsonl"
