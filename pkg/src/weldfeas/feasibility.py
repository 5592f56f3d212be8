"""Per-posture feasibility of a torch trajectory for a robot at a given base.

For every IK branch at the first sample the branch is followed continuously
along the path, joint speeds are taken by finite differences in time, gravity
torques come from the static model, and four gates are applied: collisions
(with margin), singularity proximity, joint speed and joint torque.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from weldfeas.collision import DEFAULT_MARGIN, CollisionGeometry, sweep_check
from weldfeas.errors import NotApplicable
from weldfeas.geom import Pose, wrap_angle
from weldfeas.ik import LABELS, solve_ik_batch
from weldfeas.robotmodel import RobotModel, joint_frames
from weldfeas.statics import static_torques
from weldfeas.torchpath import TorchTrajectory, WeldParams

SINGULARITY_MARGIN_DEG = 6.0
BRANCH_BREAK = math.pi / 2
SPEED_UTILIZATION = 0.8

# order used to break ties between failures at the same sample
_HARD_KINDS = ("unreachable", "branch_break", "collision", "singularity")


@dataclass(frozen=True)
class SingularityGate:
    margin_deg: float = SINGULARITY_MARGIN_DEG

    def __post_init__(self):
        if not self.margin_deg > 0:
            raise ValueError("singularity margin must be positive")


@dataclass
class Failure:
    kind: str
    sample: int
    joint: int | None = None  # 1-based
    ratio: float | None = None
    pair: tuple | None = None
    detail: str | None = None

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "sample": self.sample}
        if self.joint is not None:
            d["joint"] = self.joint
        if self.ratio is not None:
            d["ratio"] = self.ratio
        if self.pair is not None:
            d["pair"] = list(self.pair)
        if self.detail is not None:
            d["detail"] = self.detail
        return d


@dataclass
class JointTrajectory:
    """Joint-space samples of one tracked posture (possibly a prefix of the path)."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    tau: np.ndarray
    label: str
    clearance: np.ndarray | None = None
    proximity: np.ndarray | None = None  # (N, 3) degrees: wrist, elbow, shoulder

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class FeasibilityVerdict:
    feasible: bool
    failure: Failure | None
    failures: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def first_failure_sample(self) -> int | None:
        return min((f.sample for f in self.failures), default=None)


@dataclass
class PostureResult:
    label: str
    camera_side: str
    seed: np.ndarray
    verdict: FeasibilityVerdict
    trajectory: JointTrajectory | None = None

    @property
    def posture(self) -> str:
        return f"{self.label}/{self.camera_side}"


@dataclass
class PostureSeed:
    label: str
    q: np.ndarray
    camera_side: str
    traj: TorchTrajectory


def _local_targets(base: Pose | None, traj: TorchTrajectory) -> np.ndarray:
    if base is None:
        return traj.T
    return base.inverse().matrix() @ traj.T


def _variants(traj: TorchTrajectory, params: WeldParams | None):
    if params is not None and params.camera_side == "free":
        return [traj, traj.with_roll_flip()]
    return [traj]


def enumerate_postures(model: RobotModel, base: Pose | None, traj: TorchTrajectory,
                       params: WeldParams | None = None) -> list[PostureSeed]:
    """IK branches at the first sample; both camera sides when ``params.camera_side`` is free."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    seeds = []
    for tr in _variants(traj, params):
        q, valid, _ = solve_ik_batch(model, _local_targets(base, tr.head(1))[0])
        kept: list[np.ndarray] = []
        for k in range(8):
            if valid[k] and not any(np.all(np.abs(wrap_angle(q[k] - s)) <= 1e-9) for s in kept):
                kept.append(q[k])
                seeds.append(PostureSeed(LABELS[k], q[k].copy(), tr.camera_side, tr))
    return seeds


def _track(qs: np.ndarray, valid: np.ndarray, seeds: np.ndarray):
    """Follow several seeds through precomputed IK sets.

    Returns (q (S, N, 6) unwrapped, stop (S,), kind (S,)) where ``stop`` is the
    first sample that could not be tracked (N when complete).
    """
    S = len(seeds)
    N = qs.shape[0]
    out = np.zeros((S, N, 6))
    out[:, 0] = seeds
    stop = np.full(S, N)
    kind = np.array([""] * S, dtype=object)
    alive = np.ones(S, dtype=bool)
    for k in range(1, N):
        if not alive.any():
            break
        prev = out[:, k - 1]
        diff = wrap_angle(qs[k][None, :, :] - prev[:, None, :])  # (S, 8, 6)
        dist = np.abs(diff).max(axis=-1)
        dist = np.where(valid[k][None, :], dist, np.inf)
        best = dist.argmin(axis=1)
        bd = dist[np.arange(S), best]
        none = alive & ~valid[k].any()
        brk = alive & ~none & (bd > BRANCH_BREAK)
        for mask, name in ((none, "unreachable"), (brk, "branch_break")):
            stop[mask] = k
            kind[mask] = name
        alive &= ~(none | brk)
        out[alive, k] = prev[alive] + diff[np.arange(S), best][alive]
    return out, stop, kind


def track_branch(model: RobotModel, base: Pose | None, traj: TorchTrajectory, seed) -> JointTrajectory | Failure:
    """Follow one posture along the trajectory; a Failure on unreachable/branch break."""
    qs, valid, _ = solve_ik_batch(model, _local_targets(base, traj))
    q, stop, kind = _track(qs, valid, np.asarray(seed, dtype=float)[None])
    if stop[0] < len(traj):
        return Failure(str(kind[0]), int(stop[0]))
    return _joint_trajectory(model, base, traj, q[0], _label_of(qs[0], valid[0], seed))


def _label_of(q0, valid0, seed) -> str:
    d = np.where(valid0, np.abs(wrap_angle(q0 - np.asarray(seed))).max(axis=1), np.inf)
    return LABELS[int(d.argmin())] if np.isfinite(d.min()) else "custom"


def joint_velocities(t: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided at both ends."""
    if len(t) < 2:
        return np.zeros_like(q)
    return np.gradient(q, t, axis=0, edge_order=1)


def _joint_trajectory(model, base, traj, q, label) -> JointTrajectory:
    n = len(q)
    t = traj.t[:n]
    return JointTrajectory(t, q, joint_velocities(t, q), static_torques(model, q, base), label)


def singularity_proximity(model: RobotModel, q) -> np.ndarray:
    """Angular distance [deg] to the wrist, elbow and shoulder singularities.

    * wrist: angle between the joint-4 and joint-6 axes (|q5| folded to [0, 90]);
    * elbow: inner-elbow angle away from full extension;
    * shoulder: angle at joint 2 between the base axis and the wrist point,
      i.e. the wrist point's distance from the joint-1 axis seen from the shoulder.

    Works on (6,) or (..., 6); returns (3,) or (..., 3).
    """
    q = np.asarray(q, dtype=float)
    q5 = np.abs(wrap_angle(q[..., 4]))
    wrist = np.minimum(q5, np.pi - q5)
    if model.morphology == "puma":
        elbow = np.abs(wrap_angle(q[..., 2] + np.pi / 2))
    else:
        elbow = np.abs(wrap_angle(q[..., 2]))
    F = joint_frames(model, q)
    W = F[..., 3 if model.morphology == "puma" else 5, :3, 3]
    p2 = F[..., 1, :3, 3]
    lateral = model.dh[0].d if model.morphology == "puma" else model.dh[3].d
    rho2 = W[..., 0] ** 2 + W[..., 1] ** 2
    r_eff = np.sqrt(np.maximum(rho2 - lateral**2, 0.0))
    reach = np.linalg.norm(W - p2, axis=-1)
    shoulder = np.arcsin(np.clip(r_eff / np.maximum(reach, 1e-12), 0.0, 1.0))
    return np.degrees(np.stack([wrist, elbow, shoulder], axis=-1))


SINGULARITY_CLASSES = ("wrist", "elbow", "shoulder")


def _stats(qdot, tau, model) -> dict:
    if len(qdot) == 0:
        return {}
    sp = np.abs(qdot) / model.speed_max
    tq = np.abs(tau) / model.torque_max
    si = np.unravel_index(int(np.argmax(sp)), sp.shape)
    ti = np.unravel_index(int(np.argmax(tq)), tq.shape)
    return {
        "speed_mean_pct": float(100 * sp.mean()),
        "speed_max_pct": float(100 * sp.max()),
        "speed_argmax_joint": int(si[1]) + 1,
        "speed_argmax_sample": int(si[0]),
        "torque_mean_pct": float(100 * tq.mean()),
        "torque_max_pct": float(100 * tq.max()),
        "torque_argmax_joint": int(ti[1]) + 1,
        "torque_argmax_sample": int(ti[0]),
        "samples": int(len(qdot)),
    }


def _verdict(model, jt: JointTrajectory, track_failure: Failure | None, sweep, gate: SingularityGate):
    failures: list[Failure] = []
    if track_failure is not None:
        failures.append(track_failure)
    if sweep is not None and sweep.index is not None:
        failures.append(Failure("collision", sweep.index, pair=sweep.verdict.witness,
                                detail=f"clearance {sweep.verdict.min_clearance:.4f} m"))
    if len(jt):
        low = jt.proximity < gate.margin_deg
        hit = np.nonzero(low.any(axis=1))[0]
        if len(hit):
            k = int(hit[0])
            cls = SINGULARITY_CLASSES[int(np.argmin(jt.proximity[k]))]
            failures.append(Failure("singularity", k, detail=cls))
        sp = np.abs(jt.qdot) / model.speed_max
        tq = np.abs(jt.tau) / model.torque_max
        for name, r in (("torque_exceeded", tq), ("speed_exceeded", sp)):
            over = np.nonzero((r > 1.0).any(axis=1))[0]
            if len(over):
                k, j = np.unravel_index(int(np.argmax(r)), r.shape)
                failures.append(Failure(name, int(over[0]), joint=int(j) + 1, ratio=float(r[k, j]),
                                        detail=f"peak at sample {int(k)}"))
    hard = [f for f in failures if f.kind in _HARD_KINDS]
    if hard:
        primary = min(hard, key=lambda f: (f.sample, _HARD_KINDS.index(f.kind)))
    else:
        primary = next((f for kind in ("torque_exceeded", "speed_exceeded") for f in failures if f.kind == kind), None)
    return FeasibilityVerdict(primary is None, primary, failures, _stats(jt.qdot, jt.tau, model))


def evaluate(model: RobotModel, base: Pose | None, geom: CollisionGeometry | None, traj: TorchTrajectory,
             params: WeldParams | None = None, margin: float = DEFAULT_MARGIN,
             gate: SingularityGate = SingularityGate()) -> list[PostureResult]:
    """Verdict for every posture, best first.

    Ordering: feasible postures first, then by peak normalised joint speed and
    peak normalised torque (both ascending). Infeasible postures follow in the
    same order, so the result is deterministic.
    """
    results: list[PostureResult] = []
    for tr in _variants(traj, params):
        qs, valid, _ = solve_ik_batch(model, _local_targets(base, tr))
        seeds, labels = [], []
        for k in range(8):
            if valid[0, k] and not any(np.all(np.abs(wrap_angle(qs[0, k] - s)) <= 1e-9) for s in seeds):
                seeds.append(qs[0, k])
                labels.append(LABELS[k])
        if not seeds:
            v = FeasibilityVerdict(False, Failure("unreachable", 0), [Failure("unreachable", 0)], {})
            results.append(PostureResult("none", tr.camera_side, np.full(6, np.nan), v, None))
            continue
        qtr, stop, kind = _track(qs, valid, np.array(seeds))
        for s, label in enumerate(labels):
            n = int(stop[s])
            jt = _joint_trajectory(model, base, tr, qtr[s, :n], label)
            jt.proximity = singularity_proximity(model, jt.q)
            sweep = None
            if geom is not None:
                sweep = sweep_check(geom, model, jt.q, margin, base, tr.weld_points[:n])
                jt.clearance = sweep.clearance
            tf = Failure(str(kind[s]), n) if n < len(tr) else None
            results.append(PostureResult(label, tr.camera_side, seeds[s].copy(),
                                         _verdict(model, jt, tf, sweep, gate), jt))

    def key(r: PostureResult):
        st = r.verdict.stats
        return (not r.verdict.feasible, st.get("speed_max_pct", math.inf), st.get("torque_max_pct", math.inf))

    return sorted(results, key=key)


@dataclass
class SpeedLimit:
    v_max: float
    limiting_joint: int
    ratio: float
    posture: str


def max_cartesian_speed(model: RobotModel, base: Pose | None, geom: CollisionGeometry | None,
                        traj: TorchTrajectory, params: WeldParams | None = None,
                        margin: float = DEFAULT_MARGIN, results: list | None = None) -> SpeedLimit:
    """Highest weld speed keeping every joint at or below 80 % of its speed limit.

    Joint speeds scale linearly with path speed, so one evaluation at the
    trajectory's own speed suffices. Postures failing for any reason other
    than speed are ignored; the best remaining posture sets the limit.
    """
    if results is None:
        results = evaluate(model, base, geom, traj, params, margin)
    best = None
    for r in results:
        f = r.verdict.failure
        if f is not None and f.kind != "speed_exceeded":
            continue
        jt = r.trajectory
        ratio = np.abs(jt.qdot) / model.speed_max
        k, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        peak = float(ratio[k, j])
        if best is None or peak < best[0]:
            best = (peak, int(j) + 1, r.posture)
    if best is None:
        raise NotApplicable("no posture is feasible apart from joint speed limits")
    peak, joint, posture = best
    v_test = float(np.median(traj.speed)) if params is None else params.cartesian_speed
    if peak <= 0:
        raise NotApplicable("joint speeds are zero along the whole path")
    return SpeedLimit(SPEED_UTILIZATION * v_test / peak, joint, peak, posture)
