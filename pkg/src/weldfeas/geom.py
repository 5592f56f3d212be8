"""Rigid transforms: rotations as 3x3 arrays, poses as (position, rotation) pairs.

Roll/pitch/yaw follow the fixed-axis X-Y-Z convention, ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from weldfeas.errors import InvalidArgument


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def matrix_to_rpy(R: np.ndarray) -> tuple[float, float, float]:
    """Inverse of :func:`rpy_to_matrix`; pitch is returned in [-pi/2, pi/2]."""
    pitch = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
    if abs(math.cos(pitch)) < 1e-12:
        # gimbal lock: fold everything into yaw
        return 0.0, pitch, math.atan2(-R[0, 1], R[1, 1])
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return roll, pitch, yaw


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle_to_matrix(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise InvalidArgument("rotation axis has zero length")
    k = skew(axis / n)
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def rotation_angle(R: np.ndarray) -> float:
    """Angle of rotation of ``R`` in [0, pi]."""
    # atan2 form stays accurate near 0 and pi, unlike acos of the trace
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return math.atan2(0.5 * np.linalg.norm(w), 0.5 * (np.trace(R) - 1.0))


def matrix_to_axis_angle(R: np.ndarray) -> tuple[np.ndarray, float]:
    angle = rotation_angle(R)
    if angle < 1e-12:
        return np.array([0.0, 0.0, 1.0]), 0.0
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if math.pi - angle > 1e-6:
        return w / np.linalg.norm(w), angle
    # near pi the antisymmetric part vanishes; use the symmetric part instead
    B = 0.5 * (R + np.eye(3))
    i = int(np.argmax(np.diag(B)))
    axis = B[:, i] / math.sqrt(max(B[i, i], 1e-300))
    axis /= np.linalg.norm(axis)
    if np.dot(axis, w) < 0.0:
        axis = -axis
    return axis, angle


def orthonormalize(R: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform mapping child coordinates into the parent frame."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "rotation", R)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.eye(3))

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, 3], T[:3, :3])

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> "Pose":
        return cls(np.array([x, y, z]), np.eye(3))

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(-Rt @ self.position, Rt)

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def apply(self, points) -> np.ndarray:
        """Map point(s) of shape (..., 3) from child to parent coordinates."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.position

    def __repr__(self) -> str:
        p = ", ".join(f"{v:.6g}" for v in self.position)
        rpy = ", ".join(f"{v:.6g}" for v in matrix_to_rpy(self.rotation))
        return f"Pose(position=({p}), rpy=({rpy}))"


def pose_from_rpy(x: float, y: float, z: float, roll: float, pitch: float, yaw: float) -> Pose:
    vals = (x, y, z, roll, pitch, yaw)
    if not all(math.isfinite(float(v)) for v in vals):
        raise InvalidArgument(f"non-finite pose component in {vals!r}")
    return Pose(np.array([x, y, z], dtype=float), rpy_to_matrix(roll, pitch, yaw))


def compose(a: Pose, b: Pose) -> Pose:
    """Pose that applies ``b`` first, then ``a``."""
    R = a.rotation @ b.rotation
    # keep products from drifting off SO(3) over long chains
    if abs(np.linalg.det(R) - 1.0) > 1e-12 or np.abs(R @ R.T - np.eye(3)).max() > 1e-12:
        R = orthonormalize(R)
    return Pose(a.rotation @ b.position + a.position, R)


def pose_distance(a: Pose, b: Pose) -> tuple[float, float]:
    """Return (translation distance [m], relative rotation angle [rad])."""
    d_pos = float(np.linalg.norm(a.position - b.position))
    d_ang = rotation_angle(a.rotation.T @ b.rotation)
    return d_pos, d_ang


def slerp_matrix(Ra: np.ndarray, Rb: np.ndarray, u: float, axis=None, angle=None) -> np.ndarray:
    """Interpolate from ``Ra`` (u=0) to ``Rb`` (u=1) about a fixed world axis.

    ``axis``/``angle`` override the shortest-arc rotation, which is needed when
    the relative rotation is a half turn and the direction is ambiguous.
    """
    if axis is None:
        axis, angle = matrix_to_axis_angle(Rb @ Ra.T)
    if angle == 0.0:
        return Ra.copy()
    return axis_angle_to_matrix(axis, u * angle) @ Ra


def transforms_to_poses(T: np.ndarray) -> list[Pose]:
    return [Pose.from_matrix(t) for t in np.asarray(T)]
