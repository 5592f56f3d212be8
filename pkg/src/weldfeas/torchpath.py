"""Torch pose trajectories along fillet-weld seams.

A seam is an ordered chain of line and arc segments. Each segment carries the
two plate normals of the fillet (pointing into free space). The torch frame at
a seam point is built from the welding rules:

* work direction ``w``: in the plane transverse to travel, at ``tilt_angle``
  from the reference plate (normal ``n1``) toward the free space;
* torch axis ``z`` (wire direction, pointing at the seam): ``-w`` pitched by
  ``drag_angle`` toward travel (positive = push);
* TCP (contact-tube tip) ``stick_out`` back along the axis from the seam point;
* roll about the axis fixed by the camera: its boresight (``x``) projects onto
  +travel for ``front`` and -travel for ``back``.

Times come from the TCP path length divided by the commanded speed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from weldfeas.errors import GeometryError, InvalidArgument
from weldfeas.geom import Pose, axis_angle_to_matrix, matrix_to_axis_angle, rot_z

CAMERA_SIDES = ("front", "back", "free")
DEFAULT_STEP = 0.002
CORNER_HALF_WINDOW = 0.10
CONTOUR_SPEEDUP = 1.15
# largest torch rotation between two samples of an around-end pivot; keeps the
# finite-difference joint rates accurate where the TCP barely moves
PIVOT_ANGLE_STEP = math.radians(1.0)
G0_TOL = 1e-9


@dataclass(frozen=True)
class WeldParams:
    tilt_angle: float = math.pi / 4
    drag_angle: float = math.radians(7.0)
    stick_out: float = 0.015
    camera_side: str = "front"
    cartesian_speed: float = 0.015  # 90 cm/min

    def __post_init__(self):
        if self.camera_side not in CAMERA_SIDES:
            raise InvalidArgument(f"camera_side must be one of {CAMERA_SIDES}")
        if self.stick_out < 0 or self.cartesian_speed <= 0:
            raise InvalidArgument("stick_out must be >= 0 and cartesian_speed > 0")

    def envelope_warnings(self) -> list[str]:
        out = []
        if not math.radians(-10.0) - 1e-12 <= self.drag_angle <= math.radians(15.0) + 1e-12:
            out.append(f"drag angle {math.degrees(self.drag_angle):.1f} deg outside [-10, +15] deg")
        cm_min = self.cartesian_speed * 6000.0
        if not 15.0 - 1e-9 <= cm_min <= 90.0 + 1e-9:
            out.append(f"speed {cm_min:.1f} cm/min outside [15, 90] cm/min")
        if not math.radians(40.0) - 1e-12 <= self.tilt_angle <= math.radians(50.0) + 1e-12:
            out.append(f"tilt {math.degrees(self.tilt_angle):.1f} deg outside [40, 50] deg")
        return out

    def updated(self, **kw) -> "WeldParams":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise GeometryError("zero-length direction")
    return v / n


@dataclass(frozen=True, eq=False)
class LineSegment:
    start: np.ndarray
    end: np.ndarray
    n1: np.ndarray
    n2: np.ndarray

    def __post_init__(self):
        for k in ("start", "end", "n1", "n2"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float).reshape(3))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def point(self, s: float) -> np.ndarray:
        L = self.length
        return self.start + (self.end - self.start) * (s / L if L > 0 else 0.0)

    def tangent(self, s: float) -> np.ndarray:
        if self.length < 1e-12:
            raise GeometryError("degenerate tangent on zero-length line segment")
        return (self.end - self.start) / self.length

    def normals(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        return self.n1, self.n2


@dataclass(frozen=True, eq=False)
class ArcSegment:
    """Circular arc ``center + radius (cos th u + sin th v)``, th from start_angle.

    ``u`` is ``ref`` projected on the plane normal to ``axis`` (default: world x,
    or world y when the axis is along x); ``v = axis x u``. Normals may be fixed
    vectors or one of ``"radial_out"``/``"radial_in"``.
    """

    center: np.ndarray
    axis: np.ndarray
    radius: float
    start_angle: float
    sweep: float
    n1: object
    n2: object
    ref: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "axis", _unit(self.axis))
        ref = self.ref
        if ref is None:
            ref = np.array([1.0, 0.0, 0.0]) if abs(self.axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        ref = np.asarray(ref, dtype=float)
        u = ref - np.dot(ref, self.axis) * self.axis
        object.__setattr__(self, "ref", _unit(u))
        for k in ("n1", "n2"):
            v = getattr(self, k)
            if not isinstance(v, str):
                object.__setattr__(self, k, np.asarray(v, dtype=float).reshape(3))
            elif v not in ("radial_out", "radial_in"):
                raise InvalidArgument(f"unknown normal keyword {v!r}")
        if self.radius <= 0:
            raise GeometryError("arc radius must be positive")

    @property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def _angle(self, s: float) -> float:
        return self.start_angle + math.copysign(s / self.radius, self.sweep)

    def _radial(self, th: float) -> np.ndarray:
        v = np.cross(self.axis, self.ref)
        return math.cos(th) * self.ref + math.sin(th) * v

    def point(self, s: float) -> np.ndarray:
        return self.center + self.radius * self._radial(self._angle(s))

    def tangent(self, s: float) -> np.ndarray:
        if self.sweep == 0:
            raise GeometryError("degenerate tangent on zero-sweep arc")
        th = self._angle(s)
        v = np.cross(self.axis, self.ref)
        return math.copysign(1.0, self.sweep) * (-math.sin(th) * self.ref + math.cos(th) * v)

    def normals(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        radial = self._radial(self._angle(s))

        def resolve(n):
            if isinstance(n, str):
                return radial if n == "radial_out" else -radial
            return n

        return resolve(self.n1), resolve(self.n2)


@dataclass(frozen=True, eq=False)
class WeldSeam:
    segments: tuple
    name: str = "seam"

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise InvalidArgument("empty seam")
        for k in range(len(self.segments) - 1):
            a, b = self.segments[k], self.segments[k + 1]
            gap = np.linalg.norm(a.point(a.length) - b.point(0.0))
            if gap > G0_TOL:
                raise GeometryError(f"seam {self.name!r}: gap of {gap:.3g} m between segments {k} and {k + 1}")

    @property
    def lengths(self) -> np.ndarray:
        return np.array([seg.length for seg in self.segments])

    @property
    def length(self) -> float:
        return float(self.lengths.sum())

    def locate(self, s: float) -> tuple[int, float]:
        L = self.length
        if s < -1e-12 or s > L + 1e-12:
            raise InvalidArgument(f"arc length {s} outside [0, {L}]")
        s = min(max(s, 0.0), L)
        acc = 0.0
        for k, seg in enumerate(self.segments):
            if s <= acc + seg.length or k == len(self.segments) - 1:
                return k, min(s - acc, seg.length)
            acc += seg.length
        raise AssertionError("unreachable")

    def point(self, s: float) -> np.ndarray:
        k, u = self.locate(s)
        return self.segments[k].point(u)

    def corners(self, angle_tol: float = 1e-6) -> list[tuple[float, int]]:
        """Arc-length positions of tangent or normal discontinuities."""
        out = []
        acc = 0.0
        for k in range(len(self.segments) - 1):
            a, b = self.segments[k], self.segments[k + 1]
            acc += a.length
            ta, tb = a.tangent(a.length), b.tangent(0.0)
            na, nb = a.normals(a.length), b.normals(0.0)
            jump = max(
                math.acos(np.clip(np.dot(ta, tb), -1.0, 1.0)),
                math.acos(np.clip(np.dot(_unit(na[0]), _unit(nb[0])), -1.0, 1.0)),
                math.acos(np.clip(np.dot(_unit(na[1]), _unit(nb[1])), -1.0, 1.0)),
            )
            if jump > angle_tol:
                out.append((acc, k))
        return out

    def reversed(self) -> "WeldSeam":
        segs = []
        for seg in reversed(self.segments):
            if isinstance(seg, LineSegment):
                segs.append(LineSegment(seg.end, seg.start, seg.n1, seg.n2))
            else:
                segs.append(ArcSegment(seg.center, seg.axis, seg.radius, seg.start_angle + seg.sweep,
                                       -seg.sweep, seg.n1, seg.n2, seg.ref))
        return WeldSeam(tuple(segs), self.name + "~rev")


def line_seam(start, end, n1, n2, name: str = "seam") -> WeldSeam:
    return WeldSeam((LineSegment(start, end, n1, n2),), name)


def torch_frame_from(point, tangent, n1, n2, params: WeldParams, drag: float | None = None,
                     camera_side: str | None = None) -> Pose:
    t = _unit(tangent)
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    n1 = _unit(n1 - np.dot(n1, t) * t)
    e1 = n2 - np.dot(n2, t) * t - np.dot(n2, n1) * n1
    if np.linalg.norm(e1) < 1e-9:
        raise GeometryError("plate normals are parallel; fillet undefined")
    e1 = _unit(e1)
    w = math.cos(params.tilt_angle) * e1 + math.sin(params.tilt_angle) * n1
    d = params.drag_angle if drag is None else drag
    z = -math.cos(d) * w + math.sin(d) * t
    side = params.camera_side if camera_side is None else camera_side
    x = _unit(t - np.dot(t, z) * z)
    if side == "back":
        x = -x
    y = np.cross(z, x)
    R = np.column_stack([x, y, z])
    return Pose(np.asarray(point, dtype=float) - params.stick_out * z, R)


def torch_frame_at(seam: WeldSeam, s: float, params: WeldParams, drag: float | None = None) -> Pose:
    """Nominal TCP pose at arc length ``s`` (no corner blending)."""
    k, u = seam.locate(s)
    seg = seam.segments[k]
    n1, n2 = seg.normals(u)
    return torch_frame_from(seg.point(u), seg.tangent(u), n1, n2, params, drag)


@dataclass(eq=False)
class TorchTrajectory:
    """Time-stamped TCP poses in the world frame.

    Attributes:
        t: (N,) times [s].
        T: (N, 4, 4) TCP poses.
        arc_length: (N,) cumulative TCP path length [m].
        weld_points: (N, 3) seam point the torch is aimed at.
        speed: (N,) commanded TCP speed at each sample [m/s].
        travel: (N, 3) travel direction the torch frame was built on; inside
            corner windows and around-end turns this is the blended tangent.
    """

    t: np.ndarray
    T: np.ndarray
    arc_length: np.ndarray
    weld_points: np.ndarray
    speed: np.ndarray
    camera_side: str = "front"
    name: str = "trajectory"
    segment_ids: np.ndarray | None = None
    travel: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def poses(self) -> list[Pose]:
        return [Pose.from_matrix(T) for T in self.T]

    @property
    def positions(self) -> np.ndarray:
        return self.T[:, :3, 3]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def with_roll_flip(self) -> "TorchTrajectory":
        """Same path with the camera on the other side (half turn about the torch axis)."""
        flip = np.eye(4)
        flip[:3, :3] = rot_z(math.pi)
        side = {"front": "back", "back": "front"}.get(self.camera_side, self.camera_side)
        return replace(self, T=self.T @ flip, camera_side=side, meta=dict(self.meta))

    def scaled_speed(self, k: float) -> "TorchTrajectory":
        """Same geometric samples traversed ``k`` times faster."""
        return replace(self, t=self.t[0] + (self.t - self.t[0]) / k, speed=self.speed * k, meta=dict(self.meta))

    def _take(self, idx) -> "TorchTrajectory":
        return replace(self, t=self.t[idx], T=self.T[idx], arc_length=self.arc_length[idx],
                       weld_points=self.weld_points[idx], speed=self.speed[idx],
                       segment_ids=None if self.segment_ids is None else self.segment_ids[idx],
                       travel=None if self.travel is None else self.travel[idx],
                       meta=dict(self.meta))

    def head(self, n: int) -> "TorchTrajectory":
        return self._take(slice(0, n))

    def window(self, i0: int, i1: int) -> "TorchTrajectory":
        """Samples ``i0..i1`` inclusive, re-timed to start at zero."""
        out = self._take(slice(i0, i1 + 1))
        out.t = out.t - out.t[0]
        out.arc_length = out.arc_length - out.arc_length[0]
        return out

    def time_reversed(self) -> "TorchTrajectory":
        """The same poses visited in reverse order.

        Poses, weld points and the recorded travel directions are unchanged, so
        every per-sample check (reach, collision, singularity, static torque)
        sees exactly the same states; only the joint velocity signs flip.
        """
        out = self._take(slice(None, None, -1))
        out.t = self.t[-1] - out.t
        out.arc_length = self.arc_length[-1] - out.arc_length
        return out

    @classmethod
    def from_poses(cls, poses, dt: float = 0.1, weld_points=None, name: str = "trajectory") -> "TorchTrajectory":
        T = np.array([p.matrix() if isinstance(p, Pose) else p for p in poses], dtype=float)
        n = len(T)
        steps = np.linalg.norm(np.diff(T[:, :3, 3], axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(steps)])
        wp = T[:, :3, 3] if weld_points is None else np.asarray(weld_points, dtype=float)
        speed = np.concatenate([steps / dt, [steps[-1] / dt if n > 1 else 0.0]]) if n > 1 else np.zeros(1)
        return cls(np.arange(n) * dt, T, arc, wp, speed, name=name)


def _corner_windows(seam: WeldSeam) -> list[tuple[float, float]]:
    """(s_corner, half_width) for each interior corner, windows never overlapping."""
    corners = seam.corners()
    lengths = seam.lengths
    corner_segs = {k for _, k in corners}
    out = []
    for s_c, k in corners:
        prev_avail = lengths[k] / 2 if (k - 1) in corner_segs else lengths[k]
        next_avail = lengths[k + 1] / 2 if (k + 1) in corner_segs else lengths[k + 1]
        hw = min(CORNER_HALF_WINDOW, prev_avail, next_avail)
        out.append((s_c, hw))
    return out


def _seam_frames(seam: WeldSeam, params: WeldParams, step: float):
    """Uniform seam-arc-length samples: (seam s, weld points, TCP frames, segment ids, travel)."""
    if step <= 0:
        raise InvalidArgument("sample_step must be positive")
    L = seam.length
    if L <= 0:
        raise GeometryError(f"seam {seam.name!r} has zero length")
    n = max(1, math.ceil(L / step - 1e-9))
    s = np.linspace(0.0, L, n + 1)
    windows = _corner_windows(seam)
    pts = np.empty((n + 1, 3))
    T = np.empty((n + 1, 4, 4))
    seg_ids = np.empty(n + 1, dtype=int)
    travel = np.empty((n + 1, 3))
    for i, si in enumerate(s):
        k, u = seam.locate(si)
        seg = seam.segments[k]
        pts[i] = seg.point(u)
        seg_ids[i] = k
        pose = None
        for s_c, hw in windows:
            if abs(si - s_c) < hw:
                # orientation blend across the corner, anchored at the window edges
                fa = torch_frame_at(seam, s_c - hw, params)
                fb = torch_frame_at(seam, s_c + hw, params)
                axis, ang = matrix_to_axis_angle(fb.rotation @ fa.rotation.T)
                uu = (si - (s_c - hw)) / (2 * hw)
                Rb = axis_angle_to_matrix(axis, uu * ang) if ang > 0 else np.eye(3)
                R = Rb @ fa.rotation
                ka, ua = seam.locate(s_c - hw)
                travel[i] = Rb @ seam.segments[ka].tangent(ua)
                pose = Pose(pts[i] - params.stick_out * R[:, 2], R)
                break
        if pose is None:
            n1, n2 = seg.normals(u)
            travel[i] = seg.tangent(u)
            pose = torch_frame_from(pts[i], travel[i], n1, n2, params)
        T[i] = pose.matrix()
    return s, pts, T, seg_ids, travel


def _assemble(pieces, name: str, camera_side: str, meta=None) -> TorchTrajectory:
    """Join pieces of (weld_points, T, speed, seg_ids, travel), dropping duplicated joints."""
    W, TT, V, S, D = [], [], [], [], []
    for k, (pts, T, v, sid, trv) in enumerate(pieces):
        if k > 0 and TT and np.allclose(T[0], TT[-1][-1], atol=1e-12):
            pts, T, sid, trv = pts[1:], T[1:], sid[1:], trv[1:]
        W.append(pts)
        TT.append(T)
        V.append(np.full(len(T), v))
        S.append(sid)
        D.append(trv)
    D = np.concatenate(D)
    W = np.concatenate(W)
    T = np.concatenate(TT)
    V = np.concatenate(V)
    S = np.concatenate(S)
    steps = np.linalg.norm(np.diff(T[:, :3, 3], axis=0), axis=1)
    if np.any(steps <= 0):
        raise GeometryError("trajectory has repeated TCP positions")
    # a step takes the speed of the sample it ends on
    dt = steps / V[1:]
    t = np.concatenate([[0.0], np.cumsum(dt)])
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    return TorchTrajectory(t, T, arc, W, V, camera_side=camera_side, name=name, segment_ids=S, travel=D,
                           meta=meta or {})


def plan_trajectory(seam: WeldSeam, params: WeldParams = WeldParams(),
                    sample_step: float = DEFAULT_STEP) -> TorchTrajectory:
    """Sample a seam into a timed TCP trajectory.

    ``camera_side="free"`` plans the front variant; use
    :meth:`TorchTrajectory.with_roll_flip` for the other one.
    """
    for msg in params.envelope_warnings():
        warnings.warn(msg, stacklevel=2)
    side = "front" if params.camera_side == "free" else params.camera_side
    p = replace(params, camera_side=side)
    s, pts, T, sid, trv = _seam_frames(seam, p, sample_step)
    return _assemble([(pts, T, params.cartesian_speed, sid, trv)], seam.name, side, {"seam_s": s})


def _contour_rotation(Fa: Pose, Fb: Pose, outward: np.ndarray, end_point: np.ndarray, stick_out: float):
    axis, ang = matrix_to_axis_angle(Fb.rotation @ Fa.rotation.T)
    if abs(ang - math.pi) > 1e-6:
        return axis, ang
    # half turn: go the way that keeps the torch outside the part
    best = None
    for ax, a in ((axis, ang), (-axis, ang)):
        Rm = axis_angle_to_matrix(ax, 0.5 * a) @ Fa.rotation
        tcp_mid = end_point - stick_out * Rm[:, 2]
        score = float(np.dot(tcp_mid - end_point, outward))
        if best is None or score > best[0]:
            best = (score, ax, a)
    return best[1], best[2]


def around_end_contour(seam_a: WeldSeam, seam_b: WeldSeam, end_point, params: WeldParams = WeldParams(),
                       sample_step: float = DEFAULT_STEP, name: str | None = None) -> TorchTrajectory:
    """Weld ``seam_a``, pivot the torch around ``end_point``, then weld ``seam_b``.

    During the pivot the wire stays aimed at ``end_point``; the TCP moves on a
    sphere of radius ``stick_out`` around it while the torch frame turns from
    the end frame of ``seam_a`` to the start frame of ``seam_b`` at
    ``1.15 x cartesian_speed``.
    """
    E = np.asarray(end_point, dtype=float)
    ea = seam_a.point(seam_a.length)
    sb0 = seam_b.point(0.0)
    if np.linalg.norm(ea - E) > 1e-6 or np.linalg.norm(sb0 - E) > 1e-6:
        raise GeometryError("seams are not coincident at the end point")
    for msg in params.envelope_warnings():
        warnings.warn(msg, stacklevel=2)
    side = "front" if params.camera_side == "free" else params.camera_side
    p = replace(params, camera_side=side)

    _, pa, Ta, ida, tra = _seam_frames(seam_a, p, sample_step)
    _, pb, Tb, idb, trb = _seam_frames(seam_b, p, sample_step)
    Fa, Fb = Pose.from_matrix(Ta[-1]), Pose.from_matrix(Tb[0])
    k_last = len(seam_a.segments) - 1
    outward = seam_a.segments[k_last].tangent(seam_a.segments[k_last].length)
    axis, ang = _contour_rotation(Fa, Fb, outward, E, p.stick_out)

    # sample the pivot finely, then resample uniformly in TCP path length
    u_fine = np.linspace(0.0, 1.0, 2001)
    R_fine = np.array([axis_angle_to_matrix(axis, u * ang) @ Fa.rotation for u in u_fine])
    tcp_fine = E - p.stick_out * R_fine[:, :, 2]
    seg_len = np.linalg.norm(np.diff(tcp_fine, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    n = max(2, math.ceil(cum[-1] / sample_step - 1e-9), math.ceil(abs(ang) / PIVOT_ANGLE_STEP - 1e-9))
    targets = np.linspace(0.0, cum[-1], n + 1)
    u_s = np.interp(targets, cum, u_fine)
    Tc = np.empty((n + 1, 4, 4))
    trc = np.empty((n + 1, 3))
    for i, u in enumerate(u_s):
        Ru = axis_angle_to_matrix(axis, u * ang)
        trc[i] = Ru @ tra[-1]
        R = Ru @ Fa.rotation
        Tc[i] = np.eye(4)
        Tc[i, :3, :3] = R
        Tc[i, :3, 3] = E - p.stick_out * R[:, 2]
    pc = np.repeat(E[None], n + 1, axis=0)
    nseg_a = len(seam_a.segments)
    idc = np.full(n + 1, nseg_a)
    v = params.cartesian_speed
    pieces = [
        (pa, Ta, v, ida, tra),
        (pc, Tc, v * CONTOUR_SPEEDUP, idc, trc),
        (pb, Tb, v, idb + nseg_a + 1, trb),
    ]
    meta = {"contour_segment": nseg_a, "contour_length": float(cum[-1]), "contour_angle": float(ang)}
    return _assemble(pieces, name or f"{seam_a.name}+{seam_b.name}", side, meta)
