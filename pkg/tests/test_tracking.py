import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from moco_kit.errors import InvalidLength, InvalidQuery, ShapeError
from moco_kit.tracking import (TrajectorySet, displacement, dumps_trajectories, loads_trajectories,
                               loss_track, pair_set, pair_weights, soft_track)

D64 = torch.float64


def brute_force_loss(gen, gt, divisor=2.0):
    """Pair-by-pair reference written with plain Python floats."""
    q, frames = len(gt), len(gt[0])
    num = den = 0.0
    for t in range(frames):
        for t2 in range(frames):
            if t == t2:
                continue
            w = math.exp(abs(t - t2) / divisor)
            err = 0.0
            for i in range(q):
                for c in range(2):
                    err += abs((gen[i][t2][c] - gen[i][t][c]) - (gt[i][t2][c] - gt[i][t][c]))
            num += w * err / (2 * q)
            den += w
    return num / den


def test_pair_set():
    assert pair_set(2) == [(0, 1), (1, 0)]
    assert len(pair_set(3)) == 6
    assert len(pair_set(10)) == 90
    with pytest.raises(InvalidLength):
        pair_set(1)


def test_pair_weights():
    w = pair_weights(3)
    assert w[0, 0] == 0 and w[0, 1] == math.exp(0.5) and w[2, 0] == math.exp(1.0)


def test_displacement():
    traj = TrajectorySet(torch.tensor([[[0.0, 0.0], [0.1, 0.0], [0.3, 0.0]]], dtype=D64))
    assert displacement(traj, 0, 2).tolist() == [[0.3, 0.0]]
    assert torch.equal(displacement(traj, 1, 1), torch.zeros(1, 2, dtype=D64))
    assert torch.equal(displacement(traj, 0, 2), -displacement(traj, 2, 0))
    with pytest.raises(IndexError):
        displacement(traj, 0, 3)


def test_worked_example():
    gt = [[[0.0, 0.0], [0.1, 0.0], [0.3, 0.0]]]
    gen = [[[0.0, 0.0], [0.1, 0.0], [0.4, 0.0]]]
    value = loss_track(torch.tensor(gen, dtype=D64), torch.tensor(gt, dtype=D64)).item()
    assert abs(value - 0.036297) < 1e-6
    assert abs(value - brute_force_loss(gen, gt)) < 1e-15
    assert abs(4 * math.exp(0.5) + 2 * math.e - 12.031449) < 1e-6


@settings(max_examples=100)
@given(frames=st.integers(2, 5), q=st.integers(1, 3), seed=st.integers(0, 2**31 - 1))
def test_matches_brute_force(frames, q, seed):
    rng = np.random.default_rng(seed)
    gen, gt = rng.random((q, frames, 2)), rng.random((q, frames, 2))
    value = loss_track(torch.tensor(gen), torch.tensor(gt)).item()
    ref = brute_force_loss(gen.tolist(), gt.tolist())
    assert abs(value - ref) <= 1e-12 * abs(ref)


@settings(max_examples=50)
@given(seed=st.integers(0, 10_000), shift=st.floats(-1, 1))
def test_properties(seed, shift):
    rng = np.random.default_rng(seed)
    gen, gt = torch.tensor(rng.random((2, 4, 2))), torch.tensor(rng.random((2, 4, 2)))
    assert loss_track(gt, gt).item() == 0.0
    assert loss_track(gt + shift, gt).item() < 1e-12
    assert loss_track(gen, gt).item() == pytest.approx(loss_track(gt, gen).item(), rel=1e-15)
    mae = torch.abs((gen[:, None] - gen[:, :, None]) - (gt[:, None] - gt[:, :, None]))
    assert loss_track(gen, gt).item() <= mae.mean(dim=(0, -1)).max().item() + 1e-15


def test_weight_monotonicity():
    # one pair carries all the error: longer intervals weigh more
    frames = 5
    per_gap = []
    for gap in range(1, frames):
        w = pair_weights(frames)
        mae = torch.zeros(frames, frames, dtype=D64)
        mae[0, gap] = 1.0
        per_gap.append(((w * mae).sum() / w.sum()).item())
    assert all(a < b for a, b in zip(per_gap, per_gap[1:]))


def test_shape_errors():
    with pytest.raises(ShapeError):
        loss_track(torch.zeros(1, 3, 2), torch.zeros(2, 3, 2))
    with pytest.raises(InvalidLength):
        TrajectorySet(torch.zeros(1, 1, 2))


def test_batched_loss_is_the_item_mean():
    rng = np.random.default_rng(0)
    gen, gt = torch.tensor(rng.random((3, 2, 4, 2))), torch.tensor(rng.random((3, 2, 4, 2)))
    items = [loss_track(gen[i], gt[i]).item() for i in range(3)]
    assert loss_track(gen, gt).item() == pytest.approx(np.mean(items), rel=1e-14)


# -- tracker --------------------------------------------------------------------

def _square_clip(frames=6, size=32, step=1):
    video = torch.zeros(frames, size, size, dtype=D64)
    for t in range(frames):
        video[t, 12:17, 8 + step * t:13 + step * t] = 1.0
    return video


def test_static_video_tracks_stay_put():
    rng = np.random.default_rng(0)
    frame = torch.tensor(rng.random((24, 24)))
    video = frame.expand(4, 24, 24)
    q = torch.tensor([[8.0, 9.0], [15.0, 12.0]])
    pts = soft_track(video, q).points * torch.tensor([24.0, 24.0])
    assert torch.all(torch.abs(pts - q[:, None]) < 0.5)


def test_translated_square_is_followed():
    pts = soft_track(_square_clip(), torch.tensor([[10.0, 14.0]])).points * 32
    disp = pts[0, :, 0] - pts[0, 0, 0]
    assert torch.all(torch.abs(disp - torch.arange(6, dtype=D64)) < 0.25)
    assert torch.all(torch.abs(pts[0, :, 1] - 14.0) < 0.25)


def test_tracker_gradient_wrt_pixels():
    rng = np.random.default_rng(2)
    video = torch.tensor(rng.random((3, 8, 8)), requires_grad=True)
    q = torch.tensor([[3.0, 4.0]])
    soft_track(video, q, patch_radius=2, temperature=0.5).points[0, 2, 0].backward()
    x = video.detach().clone()
    h = 1e-6
    fd = torch.zeros_like(x)
    flat = x.view(-1)
    for i in range(flat.numel()):
        old = flat[i].item()
        flat[i] = old + h
        up = soft_track(x, q, patch_radius=2, temperature=0.5).points[0, 2, 0].item()
        flat[i] = old - h
        dn = soft_track(x, q, patch_radius=2, temperature=0.5).points[0, 2, 0].item()
        flat[i] = old
        fd.view(-1)[i] = (up - dn) / (2 * h)
    err = torch.linalg.norm(video.grad - fd) / torch.linalg.norm(fd)
    assert err < 1e-3


def test_invalid_queries():
    video = torch.zeros(3, 8, 8)
    with pytest.raises(InvalidQuery):
        soft_track(video, [[8.5, 2.0]])
    with pytest.raises(InvalidQuery):
        soft_track(video, [[1.0, 1.0]], query_frame=3)


def test_trajectory_file_round_trip():
    traj = TrajectorySet(torch.tensor(np.random.default_rng(0).random((2, 3, 2))), 1)
    text = dumps_trajectories(traj)
    back = loads_trajectories(text)
    assert back.query_frame == 1
    assert dumps_trajectories(back) == text
    assert torch.allclose(back.points, traj.points, rtol=1e-8)
