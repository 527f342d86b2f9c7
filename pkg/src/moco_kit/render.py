"""Projection of 3D keypoints and rasterization of skeleton and mask videos.

Pixel coordinates are (u, v) = (column, row) with pixel centers on integers.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .motion import KeypointSequence3D, SkeletonTopology

LINE_WIDTH = 3.0
JOINT_RADIUS = 3.0
MASK_DILATION = 6
Z_REF = 5.0

# one color per bone, indexed by the bone's child joint (entry 0 colors the root disc)
PALETTE = np.array([
    [1.00, 1.00, 1.00], [0.00, 0.33, 1.00], [1.00, 0.33, 0.00], [1.00, 0.85, 0.00],
    [0.00, 0.60, 1.00], [1.00, 0.55, 0.00], [0.85, 1.00, 0.00], [0.00, 0.85, 1.00],
    [1.00, 0.75, 0.00], [0.55, 1.00, 0.00], [0.00, 1.00, 1.00], [1.00, 1.00, 0.33],
    [0.33, 1.00, 0.00], [0.00, 1.00, 0.55], [0.00, 1.00, 0.25], [1.00, 0.00, 0.85],
    [0.33, 0.00, 1.00], [1.00, 0.00, 0.33], [0.55, 0.00, 1.00], [1.00, 0.00, 0.55],
    [0.85, 0.00, 1.00], [1.00, 0.00, 0.10],
])


@dataclass(frozen=True)
class CameraModel:
    image_size: tuple[int, int] = (64, 48)  # (W_px, H_px)
    scale: float = 20.0
    principal_point: tuple[float, float] = (32.0, 24.0)
    mode: str = "orthographic"

    def __post_init__(self):
        w, h = self.image_size
        u0, v0 = self.principal_point
        if self.mode not in ("orthographic", "weak_perspective"):
            raise ValueError(f"unknown camera mode {self.mode!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not (0 <= u0 < w and 0 <= v0 < h):
            raise ValueError("principal point lies outside the image")

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "scale": self.scale,
                "principal_point": list(self.principal_point),
                "image_size": list(self.image_size)}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(tuple(d["image_size"]), float(d["scale"]),
                   tuple(d["principal_point"]), d.get("mode", "orthographic"))


@dataclass
class SkeletonRaster:
    frames: np.ndarray  # (T_v, H, W, 3) in [0, 1]
    topology: SkeletonTopology


@dataclass
class HumanMask:
    frames: np.ndarray  # (T_v, H, W, 1) in {0, 1}


def project(seq: KeypointSequence3D | np.ndarray, camera: CameraModel) -> np.ndarray:
    """(T_v, K, 2) pixel coordinates; points outside the image are kept as-is."""
    pos = seq.positions if isinstance(seq, KeypointSequence3D) else np.asarray(seq, float)
    u0, v0 = camera.principal_point
    scale = camera.scale
    if camera.mode == "weak_perspective":
        scale = scale / (1.0 + pos[..., 2] / Z_REF)
    u = u0 + scale * pos[..., 0]
    v = v0 - scale * pos[..., 1]
    return np.stack([u, v], axis=-1)


def _segment_distance(px, py, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(px - a[0], py - a[1])
    t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))


def _coverage(dist, radius):
    # 1 px linear ramp centred on the nominal edge
    return np.clip(radius + 0.5 - dist, 0.0, 1.0)


def draw_line(canvas: np.ndarray, a, b, color, width: float = LINE_WIDTH) -> np.ndarray:
    """Composite an anti-aliased segment onto an (H, W, 3) canvas in place."""
    h, w = canvas.shape[:2]
    py, px = np.mgrid[0:h, 0:w].astype(np.float64)
    cov = _coverage(_segment_distance(px, py, np.asarray(a, float), np.asarray(b, float)),
                    width / 2.0)[..., None]
    canvas *= 1.0 - cov
    canvas += cov * np.asarray(color, dtype=canvas.dtype)
    return canvas


def draw_disc(canvas: np.ndarray, center, color, radius: float = JOINT_RADIUS) -> np.ndarray:
    h, w = canvas.shape[:2]
    py, px = np.mgrid[0:h, 0:w].astype(np.float64)
    cov = _coverage(np.hypot(px - center[0], py - center[1]), radius)[..., None]
    canvas *= 1.0 - cov
    canvas += cov * np.asarray(color, dtype=canvas.dtype)
    return canvas


def _render_frame(pts, topology, size, depth=None):
    w, h = size
    canvas = np.zeros((h, w, 3))
    bones = list(topology.bone_list)
    if depth is not None:
        # painter's order: farthest bone (smallest mean z) first
        bones.sort(key=lambda bc: depth[bc[0]] + depth[bc[1]])
    for a, b in bones:
        draw_line(canvas, pts[a], pts[b], PALETTE[b % len(PALETTE)])
    for j in range(topology.joint_count):
        draw_disc(canvas, pts[j], PALETTE[j % len(PALETTE)])
    return canvas


def rasterize_skeleton(points2d: np.ndarray, topology: SkeletonTopology,
                       camera: CameraModel, depth: np.ndarray | None = None) -> SkeletonRaster:
    """Skeleton video g_s: bones as 3 px anti-aliased lines, joints as radius-3 discs.

    ``depth`` (T_v, K) optionally orders bones back to front.
    """
    points2d = np.asarray(points2d, dtype=np.float64)
    if not np.all(np.isfinite(points2d)):
        raise ValueError("points2d must be finite")
    frames = np.stack([
        _render_frame(points2d[i], topology, camera.image_size,
                      None if depth is None else depth[i])
        for i in range(points2d.shape[0])
    ])
    return SkeletonRaster(np.clip(frames, 0.0, 1.0), topology)


def _disc_footprint(radius: int) -> np.ndarray:
    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return x * x + y * y <= radius * radius


def dilate_support(support: np.ndarray, radius: int = MASK_DILATION) -> np.ndarray:
    """Binary dilation of an (H, W) support by a disc."""
    return ndimage.binary_dilation(support, structure=_disc_footprint(radius))


def rasterize_mask(points2d: np.ndarray, topology: SkeletonTopology, camera: CameraModel,
                   raster: SkeletonRaster | None = None) -> HumanMask:
    """Human mask M: skeleton support dilated by a radius-6 disc."""
    if raster is None:
        raster = rasterize_skeleton(points2d, topology, camera)
    support = raster.frames.max(axis=-1) > 0
    mask = np.stack([dilate_support(f) for f in support]).astype(np.float64)
    return HumanMask(mask[..., None])


# -- export -------------------------------------------------------------------

def export_png_frames(frames: np.ndarray, out_dir) -> list[Path]:
    """Write (T, H, W, C) frames in [0, 1] as 8-bit frame_%05d.png files."""
    from PIL import Image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(np.asarray(frames)):
        img = np.round(np.clip(f, 0, 1) * 255).astype(np.uint8)
        if img.ndim == 3 and img.shape[-1] == 1:
            img = img[..., 0]
        p = out / f"frame_{i:05d}.png"
        Image.fromarray(img).save(p)
        paths.append(p)
    return paths


def save_array(path, array: np.ndarray) -> None:
    """Array container for training IO (.npy: header carries shape and little-endian dtype)."""
    arr = np.asarray(array)
    np.save(path, arr.astype(arr.dtype.newbyteorder("<")), allow_pickle=False)


def load_array(path) -> np.ndarray:
    return np.load(path, allow_pickle=False)
