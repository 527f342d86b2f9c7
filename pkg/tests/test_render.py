import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moco_kit.motion import MotionPrompt, SkeletonTopology, default_topology, synthesize_motion
from moco_kit.render import (PALETTE, CameraModel, dilate_support, draw_line, export_png_frames,
                             load_array, project, rasterize_mask, rasterize_skeleton, save_array)


def cam(**kw):
    base = dict(image_size=(64, 64), scale=10.0, principal_point=(32.0, 32.0))
    base.update(kw)
    return CameraModel(**base)


def test_projection_hand_values():
    pts = np.array([[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
    uv = project(pts, cam())
    assert uv.tolist() == [[[32.0, 32.0], [42.0, 32.0], [32.0, 22.0]]]


def test_weak_perspective_divides_scale():
    uv = project(np.array([[[1.0, 0.0, 5.0]]]), cam(mode="weak_perspective"))
    assert uv[0, 0, 0] == 37.0


@pytest.mark.parametrize("kw", [dict(scale=0.0), dict(principal_point=(64.0, 3.0)),
                                dict(mode="fisheye")])
def test_camera_validation(kw):
    with pytest.raises(ValueError):
        cam(**kw)


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_resolution_equivariance(xyz):
    pts = np.array([[xyz]])
    small = project(pts, CameraModel((64, 48), 20.0, (31.5, 20.25)))
    large = project(pts, CameraModel((128, 96), 40.0, (63.0, 40.5)))
    assert np.array_equal(2 * small, large)


def _two_joint_topology():
    return SkeletonTopology(("a", "b"), ((0, 1),), 0)


def test_vertical_line_pixel_count():
    canvas = np.zeros((48, 64, 3))
    draw_line(canvas, (30.0, 10.0), (30.0, 30.0), (1.0, 1.0, 1.0))
    n = np.count_nonzero(canvas.max(-1))
    assert 20 * 3 * 0.8 <= n <= 20 * 5


def test_coincident_joints_make_one_disc():
    topo = default_topology()
    pts = np.full((1, 22, 2), 20.0)
    raster = rasterize_skeleton(pts, topo, CameraModel())
    n = np.count_nonzero(raster.frames[0].max(-1))
    assert n <= np.pi * 3.5 ** 2 + 8


def test_raster_is_deterministic_and_bounded():
    topo = default_topology()
    seq = synthesize_motion(MotionPrompt("", "run", 1.0, 4))
    c = CameraModel(principal_point=(20.0, 24.0))
    a = rasterize_skeleton(project(seq, c), topo, c, depth=seq.positions[..., 2]).frames
    b = rasterize_skeleton(project(seq, c), topo, c, depth=seq.positions[..., 2]).frames
    assert a.tobytes() == b.tobytes()
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert a.shape == (16, 48, 64, 3)


def test_background_is_exactly_zero():
    topo = _two_joint_topology()
    r = rasterize_skeleton(np.array([[[10.0, 10.0], [12.0, 10.0]]]), topo, CameraModel())
    assert np.all(r.frames[0, 30:, 40:] == 0.0)


def test_out_of_bounds_joints_are_harmless():
    topo = default_topology()
    pts = np.full((2, 22, 2), -500.0)
    r = rasterize_skeleton(pts, topo, CameraModel())
    m = rasterize_mask(pts, topo, CameraModel(), r)
    assert not r.frames.any() and not m.frames.any()


def test_mask_is_a_binary_superset():
    topo = default_topology()
    seq = synthesize_motion(MotionPrompt("", "walk", 0.5, 1))
    c = CameraModel(principal_point=(28.0, 24.0))
    uv = project(seq, c)
    r = rasterize_skeleton(uv, topo, c)
    m = rasterize_mask(uv, topo, c, r).frames[..., 0]
    assert set(np.unique(m)) <= {0.0, 1.0}
    support = r.frames.max(-1) > 0
    assert np.all(m[support] == 1.0)
    assert m.sum() >= support.sum()


def test_disc_dilation_radius():
    support = np.zeros((48, 64), bool)
    y, x = np.mgrid[0:48, 0:64]
    support[(x - 32) ** 2 + (y - 24) ** 2 <= 9] = True
    d = dilate_support(support)
    radius = np.sqrt(d.sum() / np.pi)
    assert 8 <= radius <= 10
    assert d[24, 32 + 9] and not d[24, 32 + 11]


def test_palette_rows_are_saturated():
    assert PALETTE.shape == (22, 3)
    assert np.all(PALETTE.max(axis=1) == 1.0)


def test_export_and_array_io(tmp_path):
    frames = np.random.default_rng(0).random((3, 8, 8, 3))
    paths = export_png_frames(frames, tmp_path / "png")
    assert [p.name for p in paths] == ["frame_00000.png", "frame_00001.png", "frame_00002.png"]
    save_array(tmp_path / "a.npy", frames)
    back = load_array(tmp_path / "a.npy")
    assert back.dtype.str == "<f8" and np.array_equal(back, frames)
