"""Closed-form inverse kinematics for the PUMA-like and UR-like arms.

Both solvers return up to eight branches. Branches are indexed by a label of
the form ``s±e±w±`` (shoulder, elbow, wrist); the index order is the
lexicographic order of the labels so posture numbering is stable.

PUMA-like: spherical wrist decomposition. The wrist centre fixes q1 (two
shoulder branches around the lateral offset), q2/q3 come from a planar 2R
problem (elbow up/down), and the wrist is a ZYZ Euler triple (two flips).

UR-like: the usual parallel-axis closed form. q1 follows from the lateral
offset constraint on the joint-5 origin, q5 from the angle between the tool
axis and the shoulder axis, q6 from the remaining tool rotation, then a planar
2R problem gives q2/q3 and q4 closes the sum q2+q3+q4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from weldfeas.errors import InvalidArgument, NoSolution
from weldfeas.geom import Pose, pose_distance, wrap_angle
from weldfeas.robotmodel import RobotModel, fk_matrix, joint_frames

# discriminants down to -DEGENERACY_TOL still count as real roots
DEGENERACY_TOL = 1e-10
# below this a discriminant is rounding noise around a double root: the two
# branches coalesce
DOUBLE_ROOT_TOL = 1e-11

LABELS = tuple(f"s{s}e{e}w{w}" for s in "+-" for e in "+-" for w in "+-")


@dataclass
class IkSolutionSet:
    solutions: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def as_array(self) -> np.ndarray:
        return np.array(self.solutions).reshape(-1, 6)


def _targets(model: RobotModel, T_tcp: np.ndarray) -> np.ndarray:
    """TCP targets (N,4,4) -> joint-6 frame targets."""
    return T_tcp @ np.linalg.inv(model.tcp.matrix())


def _rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    R = np.zeros(np.shape(theta) + (3, 3))
    R[..., 0, 0] = c
    R[..., 0, 1] = -s
    R[..., 1, 0] = s
    R[..., 1, 1] = c
    R[..., 2, 2] = 1.0
    return R


def _rot_x(alpha):
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _sqrt_disc(x):
    """sqrt of a discriminant, tolerating tiny negatives; returns (root, ok, degenerate)."""
    ok = x >= -DEGENERACY_TOL
    degenerate = x <= DOUBLE_ROOT_TOL
    return np.where(degenerate, 0.0, np.sqrt(np.clip(x, 0.0, None))), ok, degenerate


def _solve_puma(model: RobotModel, T6: np.ndarray):
    n = T6.shape[0]
    off = model.dh[0].d
    L1 = model.dh[1].a
    L2 = model.dh[2].d
    W = T6[:, :3, 3]
    R06 = T6[:, :3, :3]
    offs = np.array([r.theta_offset for r in model.dh])

    q = np.zeros((n, 8, 6))
    valid = np.ones((n, 8), dtype=bool)
    degen = np.zeros((n, 8), dtype=bool)

    rho2 = W[:, 0] ** 2 + W[:, 1] ** 2
    r_abs, ok_s, dg_s = _sqrt_disc(rho2 - off ** 2)
    h = W[:, 2]
    psi = np.arctan2(W[:, 1], W[:, 0])
    for sb in (0, 1):
        r = r_abs if sb == 0 else -r_abs
        q1 = psi - np.arctan2(-off, r)
        cg = (r * r + h * h - L1 * L1 - L2 * L2) / (2.0 * L1 * L2)
        sg_abs, ok_e, dg_e = _sqrt_disc(1.0 - cg * cg)
        for eb in (0, 1):
            sg = sg_abs if eb == 0 else -sg_abs
            gamma = np.arctan2(sg, np.clip(cg, -1.0, 1.0))
            q2 = np.arctan2(h, r) - np.arctan2(L2 * sg, L1 + L2 * np.clip(cg, -1.0, 1.0))
            q3 = gamma - np.pi / 2
            qa = np.zeros((n, 6))
            qa[:, 0], qa[:, 1], qa[:, 2] = q1, q2, q3
            R03 = joint_frames(model, qa - offs)[:, 3, :3, :3]  # q4 = 0 here
            M = np.swapaxes(R03, -1, -2) @ R06
            sb5_abs = np.hypot(M[:, 0, 2], M[:, 1, 2])
            dg_w = sb5_abs <= DEGENERACY_TOL
            for wb in (0, 1):
                idx = sb * 4 + eb * 2 + wb
                q5 = np.arctan2(sb5_abs if wb == 0 else -sb5_abs, M[:, 2, 2])
                sbeta = -np.sin(q5)
                safe = np.where(dg_w, 1.0, sbeta)
                q4 = np.where(dg_w, 0.0, np.arctan2(M[:, 1, 2] / safe, M[:, 0, 2] / safe))
                q6 = np.arctan2(M[:, 2, 1] / safe, -M[:, 2, 0] / safe)
                if dg_w.any():
                    # q4 pinned to zero, q6 takes the whole residual roll
                    qd = np.column_stack([q1, q2, q3, q4, q5, np.zeros(n)])
                    R_rest = np.swapaxes(joint_frames(model, qd - offs)[:, 6, :3, :3], -1, -2) @ R06
                    q6 = np.where(dg_w, np.arctan2(R_rest[:, 1, 0], R_rest[:, 0, 0]), q6)
                q[:, idx] = np.column_stack([q1, q2, q3, q4, q5, q6])
                valid[:, idx] = ok_s & ok_e
                degen[:, idx] = dg_s | dg_e | dg_w
                if sb == 1:
                    valid[:, idx] &= ~dg_s
                if eb == 1:
                    valid[:, idx] &= ~dg_e
                if wb == 1:
                    valid[:, idx] &= ~dg_w
    return q, valid, degen


def _solve_ur(model: RobotModel, T6: np.ndarray):
    n = T6.shape[0]
    d4, d6 = model.dh[3].d, model.dh[5].d
    a2, a3 = model.dh[1].a, model.dh[2].a
    C = np.zeros((6, 4, 4))
    for i, row in enumerate(model.dh):
        C[i] = np.eye(4)
        C[i, :3, :3] = _rot_x(row.alpha)
        C[i, :3, 3] = [row.a, 0.0, row.d]

    p6 = T6[:, :3, 3]
    R6 = T6[:, :3, :3]
    x6, y6, z6 = R6[:, :, 0], R6[:, :, 1], R6[:, :, 2]
    p5 = p6 - d6 * z6

    q = np.zeros((n, 8, 6))
    valid = np.ones((n, 8), dtype=bool)
    degen = np.zeros((n, 8), dtype=bool)

    rho = np.hypot(p5[:, 0], p5[:, 1])
    psi = np.arctan2(p5[:, 1], p5[:, 0])
    ratio = np.divide(d4, rho, out=np.full(n, np.inf), where=rho > 0)
    cos_phi, ok_s, dg_s = _sqrt_disc(1.0 - ratio ** 2)
    phi = np.arctan2(np.clip(ratio, -1.0, 1.0), cos_phi)
    for sb in (0, 1):
        q1 = psi + phi if sb == 0 else psi + np.pi - phi
        z1 = np.column_stack([np.sin(q1), -np.cos(q1), np.zeros(n)])
        c5 = np.clip(np.einsum("ij,ij->i", z6, z1), -1.0, 1.0)
        xz = np.einsum("ij,ij->i", x6, z1)
        yz = np.einsum("ij,ij->i", y6, z1)
        s5_abs = np.hypot(xz, yz)
        dg_w = s5_abs <= DEGENERACY_TOL
        # T01 inverse, shared by both wrist branches
        T01 = np.zeros((n, 4, 4))
        T01[:, :3, :3] = _rot_z(q1)
        T01[:, 3, 3] = 1.0
        T01 = T01 @ C[0]
        T01_inv = np.linalg.inv(T01)
        for wb in (0, 1):
            s5 = s5_abs if wb == 0 else -s5_abs
            q5 = np.arctan2(s5, c5)
            safe = np.where(dg_w, 1.0, s5)
            q6 = np.where(dg_w, 0.0, np.arctan2(-yz / safe, xz / safe))
            T45 = np.zeros((n, 4, 4))
            T45[:, :3, :3] = _rot_z(q5)
            T45[:, 3, 3] = 1.0
            T45 = T45 @ C[4]
            T56 = np.zeros((n, 4, 4))
            T56[:, :3, :3] = _rot_z(q6)
            T56[:, 3, 3] = 1.0
            T56 = T56 @ C[5]
            T14 = T01_inv @ T6 @ np.linalg.inv(T45 @ T56)
            px = T14[:, 0, 3]
            py = T14[:, 1, 3]
            c3 = (px * px + py * py - a2 * a2 - a3 * a3) / (2.0 * a2 * a3)
            s3_abs, ok_e, dg_e = _sqrt_disc(1.0 - c3 * c3)
            for eb in (0, 1):
                idx = sb * 4 + eb * 2 + wb
                s3 = s3_abs if eb == 0 else -s3_abs
                c3c = np.clip(c3, -1.0, 1.0)
                q3 = np.arctan2(s3, c3c)
                q2 = np.arctan2(py, px) - np.arctan2(a3 * s3, a2 + a3 * c3c)
                q4 = np.arctan2(T14[:, 1, 0], T14[:, 0, 0]) - q2 - q3
                q[:, idx] = np.column_stack([q1, q2, q3, q4, q5, q6])
                valid[:, idx] = ok_s & ok_e
                degen[:, idx] = dg_s | dg_e | dg_w
                if sb == 1:
                    valid[:, idx] &= ~dg_s
                if eb == 1:
                    valid[:, idx] &= ~dg_e
                if wb == 1:
                    valid[:, idx] &= ~dg_w
    return q, valid, degen


def solve_ik_batch(model: RobotModel, T_tcp, verify_tol: float | None = 1e-6):
    """Solve IK for a stack of TCP targets given in the robot base frame.

    Args:
        T_tcp: (N, 4, 4) or (4, 4) homogeneous targets.
        verify_tol: when set, branches whose FK misses the target by more than
            this (metres, and radians) are marked invalid.

    Returns:
        ``(q, valid, degenerate)`` with shapes (N, 8, 6), (N, 8), (N, 8).
        Branch ``k`` corresponds to ``LABELS[k]``; angles are in (-pi, pi].
    """
    T = np.asarray(T_tcp, dtype=float)
    single = T.ndim == 2
    T = T.reshape(-1, 4, 4)
    if not np.all(np.isfinite(T)):
        raise InvalidArgument("IK target is not finite")
    T6 = _targets(model, T)
    if model.morphology == "puma":
        q, valid, degen = _solve_puma(model, T6)
    elif model.morphology == "ur":
        q, valid, degen = _solve_ur(model, T6)
    else:
        raise InvalidArgument(f"no closed-form IK for morphology {model.morphology!r}")
    q = wrap_angle(q - np.array([r.theta_offset for r in model.dh]))
    q = np.where(np.isfinite(q), q, 0.0)
    if verify_tol is not None and valid.any():
        F = fk_matrix(model, q.reshape(-1, 6)).reshape(q.shape[0], 8, 4, 4)
        dp = np.linalg.norm(F[..., :3, 3] - T[:, None, :3, 3], axis=-1)
        Rrel = np.swapaxes(F[..., :3, :3], -1, -2) @ T[:, None, :3, :3]
        tr = np.clip((np.trace(Rrel, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
        da = np.arccos(tr)
        valid &= (dp <= verify_tol) & (da <= verify_tol)
    if single:
        return q[0], valid[0], degen[0]
    return q, valid, degen


def solve_ik(model: RobotModel, target: Pose) -> IkSolutionSet:
    """All real IK solutions for a TCP target (base frame)."""
    q, valid, degen = solve_ik_batch(model, target.matrix())
    out = IkSolutionSet()
    for k in range(8):
        if not valid[k]:
            continue
        qk = q[k]
        if any(np.all(np.abs(wrap_angle(qk - s)) <= 1e-9) for s in out.solutions):
            continue
        out.solutions.append(qk.copy())
        out.labels.append(LABELS[k])
        out.degenerate.append(bool(degen[k]))
    return out


def joint_distance(a, b) -> float:
    """Max-norm distance between two configurations, angles compared on the circle."""
    return float(np.max(np.abs(wrap_angle(np.asarray(a) - np.asarray(b)))))


def nearest_solution(solutions, reference) -> np.ndarray:
    """Member of ``solutions`` closest to ``reference`` in wrapped max-norm."""
    sols = solutions.solutions if isinstance(solutions, IkSolutionSet) else list(solutions)
    if len(sols) == 0:
        raise NoSolution("empty IK solution set")
    best = min(range(len(sols)), key=lambda i: joint_distance(sols[i], reference))
    return np.asarray(sols[best])


def check_solution(model: RobotModel, q, target: Pose) -> tuple[float, float]:
    return pose_distance(Pose.from_matrix(fk_matrix(model, q)), target)
