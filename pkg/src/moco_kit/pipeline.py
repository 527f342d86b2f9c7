"""Prompt → 3D motion → skeleton video → guided video generation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch

from .curation import extract_motion_prompt
from .errors import NoMotionVerb
from .motion import (KeypointSequence3D, MotionPrompt, ProceduralGenerator, default_topology,
                     generate_structure, motion_from_text)
from .render import project, rasterize_skeleton
from .trainkit.corpus import centered_camera
from .trainkit.evaluate import generate_video


@dataclass
class GeneratedClip:
    prompt: str
    motion_prompt: str
    motion_id: str
    keypoints: KeypointSequence3D
    skeleton: np.ndarray  # (T, H, W, 3)
    video: np.ndarray     # (T, H, W, 3)


def render_structure(seq: KeypointSequence3D, size=(64, 48)) -> np.ndarray:
    topo = default_topology()
    cam = centered_camera(seq.positions, size)
    return rasterize_skeleton(project(seq, cam), topo, cam, depth=seq.positions[..., 2]).frames


def generate_from_prompt(model, schedule, prompt: str, motion_prompt: str | None = None,
                         seed: int = 0, fps: int = 16, generator=None,
                         mode: str = "deterministic") -> GeneratedClip:
    """Full inference path for one prompt.

    The motion-specific prompt (extracted from ``prompt`` unless given) drives
    the structure generator; the full prompt conditions appearance.
    """
    if motion_prompt is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoMotionVerb)
            motion_prompt = extract_motion_prompt(prompt)
    motion_id = motion_from_text(motion_prompt)
    frames = model.config.frames
    seq = generate_structure(MotionPrompt(motion_prompt, motion_id, frames / fps, seed),
                             generator or ProceduralGenerator(fps=fps))
    skeleton = render_structure(seq, (model.config.width, model.config.height))
    video = generate_video(model, prompt, torch.from_numpy(skeleton).float(), schedule, seed, mode)
    return GeneratedClip(prompt, motion_prompt, motion_id, seq, skeleton, video.numpy())
