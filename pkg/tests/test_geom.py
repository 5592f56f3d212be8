import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from weldfeas.errors import InvalidArgument
from weldfeas.geom import (Pose, axis_angle_to_matrix, compose, matrix_to_axis_angle, matrix_to_rpy, orthonormalize,
                           pose_distance, pose_from_rpy, rot_x, rot_y, rot_z, rotation_angle, rpy_to_matrix,
                           slerp_matrix, wrap_angle)

angles = st.floats(-math.pi, math.pi, allow_nan=False)
coords = st.floats(-2.0, 2.0, allow_nan=False)
unit_quats = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1)


def _rot(q):
    return Rotation.from_quat(np.asarray(q) / np.linalg.norm(q)).as_matrix()


def test_elementary_rotations_trivial():
    # quarter turns map the axes as expected
    assert np.allclose(rot_z(math.pi / 2) @ [1, 0, 0], [0, 1, 0])
    assert np.allclose(rot_x(math.pi / 2) @ [0, 1, 0], [0, 0, 1])
    assert np.allclose(rot_y(math.pi / 2) @ [0, 0, 1], [1, 0, 0])


@given(angles, st.floats(-1.5, 1.5), angles)
def test_rpy_matches_scipy_extrinsic_xyz(r, p, y):
    # independent oracle: scipy fixed-axis x-y-z
    assert np.allclose(rpy_to_matrix(r, p, y), Rotation.from_euler("xyz", [r, p, y]).as_matrix(), atol=1e-12)
    assert np.allclose(matrix_to_rpy(rpy_to_matrix(r, p, y)), (r, p, y), atol=1e-9)


def test_rpy_gimbal_lock_roundtrips_matrix():
    R = rpy_to_matrix(0.3, math.pi / 2, -0.2)
    assert np.allclose(rpy_to_matrix(*matrix_to_rpy(R)), R, atol=1e-12)


@given(unit_quats)
def test_axis_angle_matches_scipy_rotvec(q):
    R = _rot(q)
    axis, ang = matrix_to_axis_angle(R)
    rv = Rotation.from_matrix(R).as_rotvec()
    assert ang == pytest.approx(np.linalg.norm(rv), abs=1e-9)
    assert np.allclose(axis_angle_to_matrix(axis, ang), R, atol=1e-9)
    assert rotation_angle(R) == pytest.approx(ang, abs=1e-12)


def test_axis_angle_near_half_turn():
    R = axis_angle_to_matrix([1, 2, 3], math.pi)
    axis, ang = matrix_to_axis_angle(R)
    assert ang == pytest.approx(math.pi)
    assert np.allclose(axis_angle_to_matrix(axis, ang), R, atol=1e-9)


def test_zero_axis_rejected():
    with pytest.raises(InvalidArgument):
        axis_angle_to_matrix([0, 0, 0], 1.0)


@given(unit_quats, st.lists(coords, min_size=3, max_size=3), unit_quats, st.lists(coords, min_size=3, max_size=3))
def test_pose_group_laws(qa, pa, qb, pb):
    a, b = Pose(pa, _rot(qa)), Pose(pb, _rot(qb))
    ab = compose(a, b)
    assert np.allclose(ab.matrix(), a.matrix() @ b.matrix(), atol=1e-12)
    ident = compose(a, a.inverse())
    assert np.allclose(ident.matrix(), np.eye(4), atol=1e-12)
    pts = np.array([[0.1, -0.2, 0.3], [1.0, 0.0, 0.0]])
    assert np.allclose(ab.apply(pts), a.apply(b.apply(pts)), atol=1e-12)
    d_pos, d_ang = pose_distance(a, b)
    assert d_pos == pytest.approx(np.linalg.norm(np.subtract(pa, pb)))
    assert d_ang == pytest.approx(Rotation.from_matrix(_rot(qa).T @ _rot(qb)).magnitude(), abs=1e-7)


@given(st.floats(-50, 50, allow_nan=False))
def test_wrap_angle_range_and_equivalence(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angle_boundary():
    assert wrap_angle(-math.pi) == math.pi
    assert np.all(wrap_angle(np.array([math.pi, 3 * math.pi])) == math.pi)


def test_orthonormalize_keeps_proper_rotation():
    R = rpy_to_matrix(0.1, 0.2, 0.3) + 1e-6
    Q = orthonormalize(R)
    assert np.allclose(Q @ Q.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(Q) == pytest.approx(1.0)


def test_slerp_endpoints_and_midpoint():
    Ra, Rb = np.eye(3), rot_z(1.0)
    assert np.allclose(slerp_matrix(Ra, Rb, 0.0), Ra)
    assert np.allclose(slerp_matrix(Ra, Rb, 1.0), Rb)
    assert np.allclose(slerp_matrix(Ra, Rb, 0.5), rot_z(0.5))


def test_pose_from_rpy_rejects_nan():
    with pytest.raises(InvalidArgument):
        pose_from_rpy(0, 0, float("nan"), 0, 0, 0)
