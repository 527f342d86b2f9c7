import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moco_kit.errors import GeneratorUnavailable, InvalidDuration, UnknownMotion
from moco_kit.motion import (MOTIONS, ExternalGenerator, KeypointSequence3D, MotionPrompt,
                             ProceduralGenerator, SkeletonTopology, default_topology,
                             dumps_keypoints, generate_structure, loads_keypoints,
                             motion_from_text, synthesize_motion)


def test_default_topology_is_a_22_joint_tree():
    topo = default_topology()
    assert topo.joint_count == 22
    assert len(topo.bone_list) == 21
    assert all(a != b and 0 <= a < 22 and 0 <= b < 22 for a, b in topo.bone_list)


@pytest.mark.parametrize("bones", [
    [(0, 1), (1, 1)],           # self loop
    [(0, 1), (0, 5)],           # index out of range
    [(0, 1), (1, 2), (2, 0)],   # cycle, no path to 3
])
def test_topology_rejects_broken_bone_lists(bones):
    with pytest.raises(ValueError):
        SkeletonTopology(tuple(f"j{i}" for i in range(4 if len(bones) == 3 else 3)), bones, 0)


def test_walk_two_seconds_has_32_frames():
    seq = synthesize_motion(MotionPrompt("a man walks", "walk", 2.0, 7))
    assert seq.frames == 32
    assert seq.positions.shape == (32, 22, 3)


def test_synthesis_is_deterministic():
    p = MotionPrompt("", "run", 1.5, 3)
    assert np.array_equal(synthesize_motion(p).positions, synthesize_motion(p).positions)


def test_walk_moves_the_root_and_wave_does_not():
    walk = synthesize_motion(MotionPrompt("", "walk", 2.0, 7)).positions[:, 0]
    wave = synthesize_motion(MotionPrompt("", "wave", 2.0, 7)).positions[:, 0]
    assert abs(walk[-1, 0] - walk[0, 0]) > 0.5
    assert np.max(np.linalg.norm(wave - wave[0], axis=-1)) < 0.05


def test_jump_rises_and_lands():
    seq = generate_structure(MotionPrompt("", "jump", 1.0, 0), ProceduralGenerator())
    y = seq.positions[:, 0, 1]
    assert seq.frames == 16
    assert y.max() > y[0] + 0.1
    assert abs(y[-1] - y[0]) < 0.02


def test_errors():
    with pytest.raises(UnknownMotion):
        synthesize_motion(MotionPrompt("", "moonwalk", 1.0))
    with pytest.raises(InvalidDuration):
        synthesize_motion(MotionPrompt("", "walk", 0.0))
    with pytest.raises(GeneratorUnavailable):
        generate_structure(MotionPrompt("", "walk", 1.0),
                           ExternalGenerator("http://127.0.0.1:9/none", timeout=0.5))


def test_empty_text_is_fine():
    assert generate_structure(MotionPrompt("", "spin", 0.5)).frames == 8


@settings(max_examples=30, deadline=None)
@given(motion=st.sampled_from(MOTIONS), seed=st.integers(0, 10_000),
       duration=st.floats(0.25, 3.0))
def test_rigid_and_smooth(motion, seed, duration):
    topo = default_topology()
    seq = synthesize_motion(MotionPrompt("", motion, duration, seed), topo)
    lengths = seq.bone_lengths(topo)
    assert np.max(np.abs(lengths - lengths[0]) / lengths[0]) < 0.01
    if seq.frames > 1:
        step = np.linalg.norm(np.diff(seq.positions, axis=0), axis=-1)
        assert step.max() < 0.3


def test_motion_words():
    assert motion_from_text("a girl jumps") == "jump"
    assert motion_from_text("the man is jogging") == "run"
    with pytest.raises(UnknownMotion):
        motion_from_text("a cat sleeps")


def test_keypoint_file_round_trip():
    seq = synthesize_motion(MotionPrompt("", "squat", 0.5, 2))
    text = dumps_keypoints(seq)
    doc = json.loads(text)
    assert set(doc) == {"fps", "joint_names", "frames"}
    back = loads_keypoints(text)
    # 9 significant digits: the second pass is a fixed point
    assert dumps_keypoints(back) == text
    assert np.allclose(back.positions, seq.positions, rtol=1e-8, atol=1e-12)


def test_keypoint_sequence_rejects_non_finite():
    pos = np.zeros((2, 22, 3))
    pos[1, 3, 0] = np.nan
    with pytest.raises(ValueError):
        KeypointSequence3D(pos, 16, default_topology().joint_names)
