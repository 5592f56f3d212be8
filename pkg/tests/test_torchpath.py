import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weldfeas.errors import GeometryError, InvalidArgument
from weldfeas.geom import rotation_angle
from weldfeas.torchpath import (ArcSegment, LineSegment, TorchTrajectory, WeldParams, WeldSeam, around_end_contour,
                                line_seam, plan_trajectory, torch_frame_from)

Z, X, Y = np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])


def _seam():
    # fillet along +y between a floor (normal +z) and a wall (normal -x)
    return line_seam([0.5, -0.2, 0.3], [0.5, 0.2, 0.3], Z, -X, "s")


def test_bisecting_torch_frame():
    # 45 deg tilt, no drag: the wire points along -(n1 + n2)/sqrt(2); TCP is stick-out back from the seam
    p = WeldParams(drag_angle=0.0)
    pose = torch_frame_from([0, 0, 0], Y, Z, -X, p)
    z = pose.rotation[:, 2]
    assert np.allclose(z, -(Z - X) / math.sqrt(2))
    assert np.allclose(pose.position, p.stick_out * (Z - X) / math.sqrt(2))
    assert np.dot(pose.rotation[:, 0], Y) > 0  # camera in front


@given(tilt=st.floats(math.radians(40), math.radians(50)), drag=st.floats(math.radians(-10), math.radians(15)),
       side=st.sampled_from(["front", "back"]), stick=st.floats(0.0, 0.03))
def test_welding_rules_hold(tilt, drag, side, stick):
    # tilt from plate 1, drag along travel, stick-out and camera roll as defined
    p = WeldParams(tilt_angle=tilt, drag_angle=drag, stick_out=stick, camera_side=side)
    pt = np.array([0.1, 0.2, 0.3])
    pose = torch_frame_from(pt, Y, Z, -X, p)
    R = pose.rotation
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12) and np.linalg.det(R) == pytest.approx(1.0)
    z = R[:, 2]
    assert math.asin(np.clip(np.dot(z, Y), -1, 1)) == pytest.approx(drag, abs=1e-9)
    transverse = -z + np.dot(z, Y) * Y
    transverse /= np.linalg.norm(transverse)
    assert math.asin(np.clip(np.dot(transverse, Z), -1, 1)) == pytest.approx(tilt, abs=1e-9)
    assert np.allclose(pose.position, pt - stick * z)
    assert np.sign(np.dot(R[:, 0], Y)) == (1 if side == "front" else -1)


def test_parallel_normals_rejected():
    with pytest.raises(GeometryError):
        torch_frame_from([0, 0, 0], Y, Z, Z, WeldParams())


def test_plan_line_samples_and_timing():
    p = WeldParams(cartesian_speed=0.01)
    tr = plan_trajectory(_seam(), p, sample_step=0.002)
    assert len(tr) == 201
    assert tr.arc_length[-1] == pytest.approx(0.4)
    assert tr.duration == pytest.approx(40.0)
    assert np.allclose(np.diff(tr.t), 0.2)
    assert np.allclose(np.linalg.norm(tr.positions - tr.weld_points, axis=1), p.stick_out)
    assert tr.meta["seam_s"][-1] == pytest.approx(0.4)


def test_arc_segment_geometry():
    arc = ArcSegment([0, 0, 0], [0, -1, 0], 0.15, -math.pi / 2, math.pi / 2, [0, -1, 0], "radial_out")
    assert arc.length == pytest.approx(0.15 * math.pi / 2)
    for s in np.linspace(0, arc.length, 7):
        p = arc.point(s)
        assert np.linalg.norm(p) == pytest.approx(0.15)
        assert np.dot(arc.tangent(s), p) == pytest.approx(0.0, abs=1e-12)
        n1, n2 = arc.normals(s)
        assert np.allclose(n2, p / 0.15)


def test_arc_seam_trajectory_keeps_stick_out():
    arc = ArcSegment([0, 0, 0], [0, -1, 0], 0.15, 0.0, math.pi / 2, [0, -1, 0], "radial_out")
    tr = plan_trajectory(WeldSeam((arc,), "a"), WeldParams())
    assert np.allclose(np.linalg.norm(tr.weld_points, axis=1), 0.15)
    assert np.allclose(np.linalg.norm(tr.positions - tr.weld_points, axis=1), 0.015)


def test_arc_rejects_bad_inputs():
    with pytest.raises(GeometryError):
        ArcSegment([0, 0, 0], [0, 0, 1], 0.0, 0.0, 1.0, Z, "radial_out")
    with pytest.raises(InvalidArgument):
        ArcSegment([0, 0, 0], [0, 0, 1], 0.1, 0.0, 1.0, Z, "sideways")


def test_seam_gap_rejected():
    a = LineSegment([0, 0, 0], [1, 0, 0], Z, Y)
    b = LineSegment([1, 0.001, 0], [1, 1, 0], Z, -X)
    with pytest.raises(GeometryError):
        WeldSeam((a, b))


def test_corner_is_blended_without_jumps():
    a = LineSegment([0, 0, 0], [0.3, 0, 0], Z, Y)
    b = LineSegment([0.3, 0, 0], [0.3, 0.3, 0], Z, -X)
    seam = WeldSeam((a, b), "L")
    assert [k for _, k in seam.corners()] == [0]
    tr = plan_trajectory(seam, WeldParams())
    rel = [rotation_angle(tr.T[i, :3, :3].T @ tr.T[i + 1, :3, :3]) for i in range(len(tr) - 1)]
    assert max(rel) < math.radians(3)


def test_reversed_seam_visits_same_points():
    arc = ArcSegment([0, 0, 0], [0, 0, 1], 0.2, 0.0, 1.0, Z, "radial_in")
    seam = WeldSeam((arc,), "a")
    rev = seam.reversed()
    assert np.allclose(rev.point(0.0), seam.point(seam.length))
    assert np.allclose(rev.point(rev.length), seam.point(0.0))
    assert rev.length == pytest.approx(seam.length)


def test_locate_out_of_range():
    with pytest.raises(InvalidArgument):
        _seam().locate(1.0)


def test_window_head_reverse_and_flip():
    tr = plan_trajectory(_seam(), WeldParams())
    w = tr.window(10, 20)
    assert len(w) == 11 and w.t[0] == 0.0 and w.arc_length[0] == 0.0
    assert np.allclose(w.T, tr.T[10:21])
    assert len(tr.head(5)) == 5
    r = tr.time_reversed()
    assert np.allclose(r.T[0], tr.T[-1]) and r.t[0] == 0.0
    assert np.allclose(np.diff(r.t), np.diff(tr.t)[::-1])
    f = tr.with_roll_flip()
    assert f.camera_side == "back"
    assert np.allclose(f.positions, tr.positions)
    assert np.allclose(f.T[:, :3, 2], tr.T[:, :3, 2])
    assert np.allclose(f.T[:, :3, 0], -tr.T[:, :3, 0])
    fast = tr.scaled_speed(2.0)
    assert fast.duration == pytest.approx(tr.duration / 2)


def test_around_end_contour_pivots_on_end_point():
    E = np.array([0.3, -0.5, 0.0])
    n = np.array([1.0, 0, 0])
    a = line_seam([0.3, -0.9, 0], E, Z, n, "a")
    b = line_seam(E, [0.3, -0.9, 0], Z, -n, "b")
    p = WeldParams()
    tr = around_end_contour(a, b, E, p)
    k = tr.meta["contour_segment"]
    piv = tr.segment_ids == k
    assert piv.sum() > 3
    assert np.allclose(np.linalg.norm(tr.positions[piv] - E, axis=1), p.stick_out)
    assert tr.meta["contour_angle"] == pytest.approx(math.pi, abs=1e-6)
    # the turn never reaches further into the rib than the drag offset it starts with
    y = tr.positions[piv, 1]
    assert np.all(y >= y[0] - 1e-9) and y[0] >= E[1] - p.stick_out * math.sin(p.drag_angle) - 1e-9
    steps = np.linalg.norm(np.diff(tr.positions, axis=0), axis=1)
    assert steps.max() < 0.0021
    assert np.allclose(tr.speed[piv][1:], 1.15 * p.cartesian_speed)


def test_around_end_requires_common_point():
    a = line_seam([0, 0, 0], [1, 0, 0], Z, Y)
    b = line_seam([1, 0.1, 0], [0, 0.1, 0], Z, -Y)
    with pytest.raises(GeometryError):
        around_end_contour(a, b, [1, 0, 0])


def test_params_validation_and_envelope():
    with pytest.raises(InvalidArgument):
        WeldParams(camera_side="left")
    with pytest.raises(InvalidArgument):
        WeldParams(cartesian_speed=0.0)
    assert WeldParams().envelope_warnings() == []
    assert len(WeldParams(drag_angle=math.radians(20)).envelope_warnings()) == 1
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        plan_trajectory(_seam(), WeldParams(cartesian_speed=0.1))
    assert any("speed" in str(w.message) for w in rec)
    assert WeldParams().updated(stick_out=None, drag_angle=0.0).drag_angle == 0.0


def test_free_camera_plans_front_variant():
    tr = plan_trajectory(_seam(), WeldParams(camera_side="free"))
    assert tr.camera_side == "front"


def test_from_poses():
    tr0 = plan_trajectory(_seam(), WeldParams())
    tr = TorchTrajectory.from_poses(tr0.poses[:5], dt=0.5)
    assert len(tr) == 5 and tr.t[-1] == 2.0
