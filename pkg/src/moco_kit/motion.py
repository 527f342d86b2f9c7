"""3D keypoint sequences, skeleton topology and the procedural structure generator.

Coordinates are meters, Y-up, with the root joint at the origin on frame 0.
The procedural library drives a fixed 22-joint kinematic tree with joint
rotations only, so bone lengths are preserved exactly up to float rounding.
"""
from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import GeneratorUnavailable, InvalidDuration, UnknownMotion

JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
)
PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19)

# rest-pose offsets from the parent joint, body facing +z, left side at +x
REST_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [0.09, -0.06, 0.0], [-0.09, -0.06, 0.0], [0.0, 0.11, 0.0],
    [0.0, -0.39, 0.0], [0.0, -0.39, 0.0], [0.0, 0.13, 0.0],
    [0.0, -0.40, 0.0], [0.0, -0.40, 0.0], [0.0, 0.06, 0.0],
    [0.0, -0.05, 0.12], [0.0, -0.05, 0.12], [0.0, 0.21, 0.0],
    [0.08, 0.12, 0.0], [-0.08, 0.12, 0.0], [0.0, 0.15, 0.03],
    [0.10, 0.02, 0.0], [-0.10, 0.02, 0.0], [0.0, -0.26, 0.0],
    [0.0, -0.26, 0.0], [0.0, -0.25, 0.0], [0.0, -0.25, 0.0],
])

MOTIONS = ("walk", "run", "jump", "wave", "squat", "spin")

# verb forms that select a procedural motion from free text
_MOTION_WORDS = {
    "walk": "walk", "walks": "walk", "walking": "walk", "walked": "walk",
    "stroll": "walk", "strolls": "walk", "strolling": "walk",
    "run": "run", "runs": "run", "running": "run", "ran": "run",
    "jog": "run", "jogs": "run", "jogging": "run", "sprint": "run", "sprints": "run",
    "jump": "jump", "jumps": "jump", "jumping": "jump", "jumped": "jump",
    "hop": "jump", "hops": "jump", "hopping": "jump", "leap": "jump", "leaps": "jump",
    "wave": "wave", "waves": "wave", "waving": "wave", "waved": "wave",
    "squat": "squat", "squats": "squat", "squatting": "squat",
    "crouch": "squat", "crouches": "squat", "crouching": "squat",
    "spin": "spin", "spins": "spin", "spinning": "spin", "twirl": "spin",
    "twirls": "spin", "twirling": "spin", "turn": "spin", "turns": "spin",
}


@dataclass(frozen=True)
class SkeletonTopology:
    joint_names: tuple[str, ...]
    bone_list: tuple[tuple[int, int], ...]
    root_index: int = 0

    def __post_init__(self):
        k = len(self.joint_names)
        if k == 0:
            raise ValueError("topology needs at least one joint")
        if not 0 <= self.root_index < k:
            raise ValueError(f"root_index {self.root_index} out of range")
        for a, b in self.bone_list:
            if a == b or not (0 <= a < k and 0 <= b < k):
                raise ValueError(f"invalid bone ({a}, {b}) for {k} joints")
        if len(self.bone_list) != k - 1:
            raise ValueError("a tree over K joints has exactly K-1 bones")
        # connectivity from the root (with K-1 edges this also rules out cycles)
        adj: dict[int, list[int]] = {i: [] for i in range(k)}
        for a, b in self.bone_list:
            adj[a].append(b)
            adj[b].append(a)
        seen, stack = {self.root_index}, [self.root_index]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != k:
            raise ValueError("bone graph is not connected")

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    def index(self, name: str) -> int:
        return self.joint_names.index(name)


def default_topology() -> SkeletonTopology:
    bones = tuple((p, c) for c, p in enumerate(PARENTS) if p >= 0)
    return SkeletonTopology(JOINT_NAMES, bones, 0)


@dataclass(frozen=True)
class MotionPrompt:
    text: str
    motion_id: str
    duration_s: float
    seed: int = 0


@dataclass
class KeypointSequence3D:
    positions: np.ndarray  # (T_v, K, 3)
    fps: int
    joint_names: tuple[str, ...] = field(default=JOINT_NAMES)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 3 or self.positions.shape[2] != 3:
            raise ValueError(f"positions must be (T, K, 3), got {self.positions.shape}")
        if self.positions.shape[0] < 1:
            raise ValueError("sequence needs at least one frame")
        if self.positions.shape[1] != len(self.joint_names):
            raise ValueError("joint_names does not match the joint axis")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("keypoint positions contain non-finite values")

    @property
    def frames(self) -> int:
        return self.positions.shape[0]

    def bone_lengths(self, topology: SkeletonTopology) -> np.ndarray:
        """(T_v, n_bones) Euclidean bone lengths."""
        a = np.array([b[0] for b in topology.bone_list])
        b = np.array([b[1] for b in topology.bone_list])
        return np.linalg.norm(self.positions[:, a] - self.positions[:, b], axis=-1)


def motion_from_text(text: str) -> str:
    """First procedural motion label named by a verb in ``text``."""
    for word in re.findall(r"[a-z]+", text.lower()):
        if word in _MOTION_WORDS:
            return _MOTION_WORDS[word]
    raise UnknownMotion(f"no procedural motion matches {text!r}")


# -- kinematics ---------------------------------------------------------------

def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1),
                     np.stack([z, s, c], -1)], -2)


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1),
                     np.stack([-s, z, c], -1)], -2)


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1),
                     np.stack([z, z, o], -1)], -2)


def forward_kinematics(root_pos: np.ndarray, local_rot: np.ndarray) -> np.ndarray:
    """Joint positions from root translations (T, 3) and local rotations (T, K, 3, 3)."""
    t, k = local_rot.shape[:2]
    glob = np.empty_like(local_rot)
    pos = np.empty((t, k, 3))
    glob[:, 0] = local_rot[:, 0]
    pos[:, 0] = root_pos
    for j in range(1, k):
        p = PARENTS[j]
        glob[:, j] = glob[:, p] @ local_rot[:, j]
        pos[:, j] = pos[:, p] + glob[:, p] @ REST_OFFSETS[j]
    return pos


def _motion_curves(motion_id: str, s: np.ndarray, rng: np.random.Generator):
    """Root translation (T, 3) and per-joint local rotations (T, K, 3, 3) at times ``s``."""
    t = s.shape[0]
    amp = rng.uniform(0.9, 1.1)
    freq = rng.uniform(0.9, 1.1)
    rot = np.broadcast_to(np.eye(3), (t, 22, 3, 3)).copy()
    root = np.zeros((t, 3))
    deg = np.pi / 180.0
    zero = np.zeros(t)

    if motion_id in ("walk", "run"):
        running = motion_id == "run"
        speed = (1.25 if running else 0.9) * amp
        cycle = (1.1 if running else 1.0) * freq
        phase = rng.uniform(0.0, 2 * np.pi)
        ph = 2 * np.pi * cycle * s + phase
        swing = (24.0 if running else 22.0) * amp * deg
        bounce = 0.05 if running else 0.02
        root[:, 0] = speed * s
        root[:, 1] = bounce * (np.abs(np.sin(ph)) - np.abs(np.sin(phase)))
        lean = (12.0 if running else 3.0) * deg
        rot[:, 0] = _rot_y(zero + np.pi / 2) @ _rot_x(zero + lean)
        rot[:, 1] = _rot_x(-swing * np.sin(ph))
        rot[:, 2] = _rot_x(swing * np.sin(ph))
        knee = (45.0 if running else 35.0) * deg
        rot[:, 4] = _rot_x(knee * 0.5 * (1 + np.cos(ph)))
        rot[:, 5] = _rot_x(knee * 0.5 * (1 - np.cos(ph)))
        arm = (30.0 if running else 20.0) * amp * deg
        rot[:, 16] = _rot_x(arm * np.sin(ph))
        rot[:, 17] = _rot_x(-arm * np.sin(ph))
        elbow = -(80.0 if running else 15.0) * deg
        rot[:, 18] = _rot_x(zero + elbow)
        rot[:, 19] = _rot_x(zero + elbow)
    elif motion_id == "jump":
        period = 1.0
        lift = np.sin(np.pi * s / period) ** 2
        root[:, 1] = 0.25 * amp * lift
        bend = np.cos(np.pi * s / period) ** 2
        rot[:, 1] = _rot_x(-35.0 * deg * bend)
        rot[:, 2] = _rot_x(-35.0 * deg * bend)
        rot[:, 4] = _rot_x(60.0 * deg * bend)
        rot[:, 5] = _rot_x(60.0 * deg * bend)
        rot[:, 16] = _rot_z(100.0 * amp * deg * lift)
        rot[:, 17] = _rot_z(-100.0 * amp * deg * lift)
    elif motion_id == "wave":
        ph = 2 * np.pi * 1.5 * freq * s
        root[:, 0] = 0.005 * np.sin(2 * np.pi * 0.5 * s)
        rot[:, 17] = _rot_z(zero - 150.0 * deg)
        rot[:, 19] = _rot_z(35.0 * amp * deg * np.sin(ph))
        rot[:, 16] = _rot_z(zero + 10.0 * deg)
    elif motion_id == "squat":
        period = 1.5 / freq
        down = np.sin(np.pi * s / period) ** 2
        root[:, 1] = -0.30 * amp * down
        rot[:, 0] = _rot_x(15.0 * deg * down)
        rot[:, 1] = _rot_x(-80.0 * deg * down)
        rot[:, 2] = _rot_x(-80.0 * deg * down)
        rot[:, 4] = _rot_x(100.0 * deg * down)
        rot[:, 5] = _rot_x(100.0 * deg * down)
        rot[:, 16] = _rot_x(-80.0 * deg * down)
        rot[:, 17] = _rot_x(-80.0 * deg * down)
    elif motion_id == "spin":
        yaw = np.pi * freq * s
        root[:, 1] = 0.02 * np.sin(2 * np.pi * s) ** 2
        rot[:, 0] = _rot_y(yaw)
        rot[:, 16] = _rot_z(zero + 80.0 * amp * deg)
        rot[:, 17] = _rot_z(zero - 80.0 * amp * deg)
    else:
        raise UnknownMotion(motion_id)
    return root, rot


def synthesize_motion(prompt: MotionPrompt, topology: SkeletonTopology | None = None,
                      fps: int = 16) -> KeypointSequence3D:
    """Deterministic procedural motion for ``prompt.motion_id``.

    The frame count is ``round(duration_s * fps)``; the text of the prompt is
    ignored by this generator.
    """
    topology = topology or default_topology()
    if prompt.motion_id not in MOTIONS:
        raise UnknownMotion(prompt.motion_id)
    if not prompt.duration_s > 0:
        raise InvalidDuration(f"duration_s must be > 0, got {prompt.duration_s}")
    if topology.joint_names != JOINT_NAMES:
        raise ValueError("the procedural library only drives the default 22-joint tree")
    frames = max(1, int(round(prompt.duration_s * fps)))
    s = np.arange(frames) / fps
    rng = np.random.default_rng(prompt.seed)
    root, rot = _motion_curves(prompt.motion_id, s, rng)
    pos = forward_kinematics(root, rot)
    return KeypointSequence3D(pos, fps, topology.joint_names)


# -- structure generator handles -------------------------------------------

class StructureGeneratorHandle(Protocol):
    def generate(self, prompt: MotionPrompt) -> KeypointSequence3D: ...


@dataclass
class ProceduralGenerator:
    topology: SkeletonTopology = field(default_factory=default_topology)
    fps: int = 16

    def generate(self, prompt: MotionPrompt) -> KeypointSequence3D:
        return synthesize_motion(prompt, self.topology, self.fps)


@dataclass
class ExternalGenerator:
    """Adapter for a text-to-motion service speaking the keypoint file format.

    The service receives a JSON POST ``{"text", "motion_id", "duration_s",
    "seed"}`` and answers with a keypoint document.
    """
    url: str
    timeout: float = 10.0

    def generate(self, prompt: MotionPrompt) -> KeypointSequence3D:
        body = json.dumps({"text": prompt.text, "motion_id": prompt.motion_id,
                           "duration_s": prompt.duration_s, "seed": prompt.seed}).encode()
        req = urllib.request.Request(self.url, data=body,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read().decode()
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise GeneratorUnavailable(f"{self.url}: {exc}") from exc
        try:
            return loads_keypoints(payload)
        except (ValueError, KeyError, TypeError) as exc:
            raise GeneratorUnavailable(f"{self.url}: malformed response ({exc})") from exc


def generate_structure(prompt: MotionPrompt,
                       generator: StructureGeneratorHandle | None = None) -> KeypointSequence3D:
    generator = generator or ProceduralGenerator()
    seq = generator.generate(prompt)
    if not isinstance(seq, KeypointSequence3D):
        raise GeneratorUnavailable(f"generator returned {type(seq).__name__}")
    return seq


# -- keypoint file format -----------------------------------------------------

def _fmt(x: float) -> str:
    return "%.9g" % x


def dumps_keypoints(seq: KeypointSequence3D) -> str:
    frames = ",\n  ".join(
        "[" + ", ".join("[" + ", ".join(_fmt(v) for v in joint) + "]" for joint in frame) + "]"
        for frame in seq.positions
    )
    names = json.dumps(list(seq.joint_names))
    return f'{{"fps": {int(seq.fps)}, "joint_names": {names},\n "frames": [\n  {frames}\n]}}\n'


def loads_keypoints(text: str) -> KeypointSequence3D:
    doc = json.loads(text, parse_int=float)  # keeps the sign of "-0"
    pos = np.array(doc["frames"], dtype=np.float64)
    return KeypointSequence3D(pos, int(doc["fps"]), tuple(doc["joint_names"]))


def write_keypoints(path, seq: KeypointSequence3D) -> None:
    Path(path).write_text(dumps_keypoints(seq))


def read_keypoints(path) -> KeypointSequence3D:
    return loads_keypoints(Path(path).read_text())
