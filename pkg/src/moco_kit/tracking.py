"""Temporally weighted dense tracking loss and a differentiable correlation tracker."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .errors import InvalidLength, InvalidQuery, ShapeError

DECAY_DIVISOR = 2.0


@dataclass
class TrajectorySet:
    points: torch.Tensor  # (Q, T_v, 2), normalized (x / W, y / H)
    query_frame: int = 0

    def __post_init__(self):
        self.points = torch.as_tensor(self.points)
        if self.points.ndim != 3 or self.points.shape[-1] != 2:
            raise ShapeError(f"points must be (Q, T_v, 2), got {tuple(self.points.shape)}")
        if self.points.shape[0] < 1 or self.points.shape[1] < 2:
            raise InvalidLength("need Q >= 1 and T_v >= 2")

    @property
    def frames(self) -> int:
        return self.points.shape[1]


def pair_set(frames: int) -> list[tuple[int, int]]:
    """All ordered frame pairs (t, t') with t != t', in lexicographic order."""
    if frames < 2:
        raise InvalidLength(f"need at least 2 frames, got {frames}")
    return [(a, b) for a in range(frames) for b in range(frames) if a != b]


def pair_weights(frames: int, decay_divisor: float = DECAY_DIVISOR,
                 dtype=torch.float64) -> torch.Tensor:
    """(T_v, T_v) matrix of exp(|t - t'| / divisor), zero on the diagonal."""
    idx = torch.arange(frames, dtype=dtype)
    w = torch.exp(torch.abs(idx[:, None] - idx[None, :]) / decay_divisor)
    return w * (1 - torch.eye(frames, dtype=dtype))


def displacement(traj: TrajectorySet | torch.Tensor, t: int, t2: int) -> torch.Tensor:
    """(Q, 2) motion of every tracked point from frame t to frame t2."""
    pts = traj.points if isinstance(traj, TrajectorySet) else torch.as_tensor(traj)
    n = pts.shape[-2]
    if not (0 <= t < n and 0 <= t2 < n):
        raise IndexError(f"frame indices ({t}, {t2}) outside 0..{n - 1}")
    return pts[..., t2, :] - pts[..., t, :]


def _points(x) -> torch.Tensor:
    return x.points if isinstance(x, TrajectorySet) else torch.as_tensor(x)


def loss_track(gen, gt, decay_divisor: float = DECAY_DIVISOR) -> torch.Tensor:
    """Weighted mean over ordered pairs of the displacement MAE.

    Accepts TrajectorySets or (..., Q, T_v, 2) tensors; leading batch
    dimensions are averaged.
    """
    p_gen, p_gt = _points(gen), _points(gt)
    if p_gen.shape != p_gt.shape:
        raise ShapeError(f"track shapes differ: {tuple(p_gen.shape)} vs {tuple(p_gt.shape)}")
    frames = p_gen.shape[-2]
    if frames < 2:
        raise InvalidLength("need at least 2 frames")
    # d[..., t, t2, :] = P[..., t2, :] - P[..., t, :]
    d_gen = p_gen.unsqueeze(-3) - p_gen.unsqueeze(-2)
    d_gt = p_gt.unsqueeze(-3) - p_gt.unsqueeze(-2)
    mae = torch.abs(d_gen - d_gt).mean(dim=-1).mean(dim=-3)  # (..., T, T)
    w = pair_weights(frames, decay_divisor, dtype=mae.dtype)
    per_item = (w * mae).sum(dim=(-2, -1)) / w.sum()
    return per_item.mean()


# -- differentiable tracker ---------------------------------------------------

def _gray(video: torch.Tensor) -> torch.Tensor:
    if video.ndim == 4:
        return video.mean(dim=-1)
    if video.ndim == 3:
        return video
    raise ShapeError(f"video must be (T, H, W[, C]), got {tuple(video.shape)}")


def soft_track(video: torch.Tensor, query_points, patch_radius: int = 4,
               temperature: float = 0.05, query_frame: int = 0,
               eps: float = 1e-6) -> TrajectorySet:
    """Track query pixels by normalized cross-correlation and a soft-argmax.

    ``query_points`` are (Q, 2) pixel coordinates (x, y) at ``query_frame``.
    The template is the (2r+1)^2 grayscale patch around each rounded query
    point; every frame's correlation map is turned into a position by the
    temperature-scaled soft-argmax, so the result is differentiable in the
    video values.
    """
    gray = _gray(torch.as_tensor(video))
    frames, h, w = gray.shape
    q = torch.as_tensor(query_points, dtype=torch.float64).reshape(-1, 2)
    if torch.any(q[:, 0] < 0) or torch.any(q[:, 0] > w - 1) or torch.any(q[:, 1] < 0) \
            or torch.any(q[:, 1] > h - 1) or not torch.all(torch.isfinite(q)):
        raise InvalidQuery("query point outside the image")
    if not 0 <= query_frame < frames:
        raise InvalidQuery(f"query_frame {query_frame} outside 0..{frames - 1}")
    r = patch_radius
    k = 2 * r + 1
    padded = F.pad(gray[:, None], (r, r, r, r))             # (T, 1, H+2r, W+2r)
    qi = torch.round(q[:, 1]).long().tolist()
    qj = torch.round(q[:, 0]).long().tolist()
    tmpl = torch.stack([padded[query_frame, 0, i:i + k, j:j + k] for i, j in zip(qi, qj)])
    tmpl = tmpl - tmpl.mean(dim=(-2, -1), keepdim=True)
    tmpl_norm = torch.sqrt((tmpl ** 2).sum(dim=(-2, -1)) + eps)  # (Q,)
    corr = F.conv2d(padded, tmpl[:, None])                   # (T, Q, H, W)
    ones = torch.ones(1, 1, k, k, dtype=gray.dtype)
    s1 = F.conv2d(padded, ones)
    s2 = F.conv2d(padded ** 2, ones)
    var = torch.clamp(s2 - s1 ** 2 / (k * k), min=0.0)
    ncc = corr / (tmpl_norm[None, :, None, None] * torch.sqrt(var + eps))
    prob = torch.softmax((ncc / temperature).reshape(frames, -1, h * w), dim=-1)
    ys, xs = torch.meshgrid(torch.arange(h, dtype=gray.dtype), torch.arange(w, dtype=gray.dtype),
                            indexing="ij")
    x = (prob * xs.reshape(-1)).sum(-1) / w
    y = (prob * ys.reshape(-1)).sum(-1) / h
    pts = torch.stack([x, y], dim=-1).transpose(0, 1)        # (Q, T, 2)
    return TrajectorySet(pts, query_frame)


# -- trajectory file format ---------------------------------------------------

def dumps_trajectories(traj: TrajectorySet) -> str:
    pts = traj.points.detach().cpu().double().numpy()
    body = ",\n  ".join(
        "[" + ", ".join("[%.9g, %.9g]" % (p[0], p[1]) for p in track) + "]" for track in pts)
    return f'{{"query_frame": {int(traj.query_frame)}, "points": [\n  {body}\n]}}\n'


def loads_trajectories(text: str) -> TrajectorySet:
    doc = json.loads(text, parse_int=float)
    return TrajectorySet(torch.tensor(np.array(doc["points"], dtype=np.float64)),
                         int(doc.get("query_frame", 0)))


def write_trajectories(path, traj: TrajectorySet) -> None:
    Path(path).write_text(dumps_trajectories(traj))


def read_trajectories(path) -> TrajectorySet:
    return loads_trajectories(Path(path).read_text())
