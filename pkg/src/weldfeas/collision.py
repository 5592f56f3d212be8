"""Capsule-based collision checking of the arm, torch and a primitive scene.

Every link is one capsule expressed in its joint frame (see
:func:`weldfeas.robotmodel.joint_frames`); the torch is a chain of capsules in
the flange frame. Scene primitives are boxes, finite cylinders and half-spaces.

Distances are signed: positive clearance between surfaces, negative on
penetration. Capsule-capsule and capsule-half-space distances are exact;
capsule-box and capsule-cylinder distances minimise the (convex) signed
distance field of the solid along the capsule axis with a golden-section
search, which converges to machine precision on convex functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from weldfeas.errors import GeometryError, InvalidArgument
from weldfeas.geom import Pose
from weldfeas.robotmodel import RobotModel, _link_constant, joint_frames

DEFAULT_MARGIN = 0.01
DENSIFY_STEP = 0.05  # rad
WELD_EXCLUSION_RADIUS = 0.05
LINK_RADII = (0.05, 0.05, 0.05, 0.04, 0.04, 0.04)
TORCH_RADIUS = 0.02
TOOL_CLEARANCE_START = 0.09  # torch body starts this far out along the flange axis (clears the wrist)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 64


@dataclass(frozen=True, eq=False)
class Capsule:
    """Segment ``a``-``b`` swept by a sphere of ``radius`` (a == b gives a sphere)."""

    a: np.ndarray
    b: np.ndarray
    radius: float
    frame: int = 0  # index into joint_frames output
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(3))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(3))
        if not self.radius > 0:
            raise InvalidArgument(f"capsule {self.name!r}: radius must be > 0")


@dataclass(frozen=True, eq=False)
class Box:
    pose: Pose
    half_extents: np.ndarray
    name: str = "box"
    workpiece: bool = True

    def __post_init__(self):
        h = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(h <= 0):
            raise InvalidArgument(f"box {self.name!r}: half extents must be > 0")
        object.__setattr__(self, "half_extents", h)

    def sdf(self, p: np.ndarray) -> np.ndarray:
        local = (p - self.pose.position) @ self.pose.rotation
        q = np.abs(local) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True, eq=False)
class Cylinder:
    """Finite cylinder along the local z-axis, centred on ``pose``."""

    pose: Pose
    radius: float
    length: float
    name: str = "cylinder"
    workpiece: bool = True

    def __post_init__(self):
        if not (self.radius > 0 and self.length > 0):
            raise InvalidArgument(f"cylinder {self.name!r}: radius and length must be > 0")

    def sdf(self, p: np.ndarray) -> np.ndarray:
        local = (p - self.pose.position) @ self.pose.rotation
        dr = np.linalg.norm(local[..., :2], axis=-1) - self.radius
        dz = np.abs(local[..., 2]) - self.length / 2
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        inside = np.minimum(np.maximum(dr, dz), 0.0)
        return outside + inside


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """Solid ``{x : n . (x - point) <= 0}``; ``normal`` points to free space."""

    point: np.ndarray
    normal: np.ndarray
    name: str = "floor"
    workpiece: bool = False

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if np.linalg.norm(n) < 1e-12:
            raise InvalidArgument("half-space normal must be non-zero")
        object.__setattr__(self, "normal", n / np.linalg.norm(n))
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))

    def sdf(self, p: np.ndarray) -> np.ndarray:
        return (p - self.point) @ self.normal


@dataclass(frozen=True, eq=False)
class CollisionGeometry:
    """Robot capsules plus the scene.

    Attributes:
        links: six capsules, one per link, in joint-frame coordinates.
        tool: capsules in the flange frame (index 6 of ``joint_frames``).
        scene: environment primitives.
        self_pairs: pairs of body names tested for self-collision.
        env_links: link names tested against the scene.
    """

    links: tuple
    tool: tuple
    scene: tuple = ()
    self_pairs: tuple = ()
    env_links: tuple = ()
    weld_exclusion: float = WELD_EXCLUSION_RADIUS

    def __post_init__(self):
        if len(self.links) != 6:
            raise InvalidArgument("every one of the six links needs exactly one capsule")
        for k in ("links", "tool", "scene", "self_pairs", "env_links"):
            object.__setattr__(self, k, tuple(getattr(self, k)))

    def with_scene(self, scene) -> "CollisionGeometry":
        return CollisionGeometry(self.links, self.tool, tuple(scene), self.self_pairs, self.env_links,
                                 self.weld_exclusion)

    def scaled_radii(self, k: float) -> "CollisionGeometry":
        def sc(c):
            return Capsule(c.a, c.b, c.radius * k, c.frame, c.name)
        return CollisionGeometry(tuple(sc(c) for c in self.links), tuple(sc(c) for c in self.tool), self.scene,
                                 self.self_pairs, self.env_links, self.weld_exclusion)


def robot_geometry(model: RobotModel, link_radii=LINK_RADII, torch_radius: float = TORCH_RADIUS,
                   scene=(), link_trim=None) -> CollisionGeometry:
    """Default capsules for a model: each link spans its two joint origins.

    The torch is a straight body along the flange axis that bends into a neck
    ending at the TCP. ``link_trim`` maps a link index (1-based) to the
    distance cut from the start of its capsule.
    """
    C = _link_constant(model)
    trim = dict(link_trim or {})
    if model.morphology == "puma":
        # the shoulder sits at the mounting plane; keep the upper-arm root clear
        trim.setdefault(2, 0.08)
    links = []
    for i in range(6):
        end = C[i][:3, 3].copy()
        start = np.zeros(3)
        L = np.linalg.norm(end)
        cut = trim.get(i + 1, 0.0)
        if cut and L > cut:
            start = end * (cut / L)
        links.append(Capsule(start, end, link_radii[i], frame=i, name=f"link{i + 1}"))

    # torch: flange axis up to the bend, then the neck along the TCP z-axis
    tcp = model.tcp
    tip = tcp.position
    axis = tcp.rotation[:, 2]
    # bend point: where the neck line crosses the flange z-axis
    axis_lateral = math.hypot(axis[0], axis[1])
    back = math.hypot(tip[0], tip[1]) / axis_lateral if axis_lateral > 1e-12 else 0.0
    bend = tip - back * axis
    body_start = np.array([0.0, 0.0, min(TOOL_CLEARANCE_START, bend[2])])
    tool = [Capsule(body_start, bend, torch_radius, frame=6, name="tool"),
            Capsule(bend, tip, torch_radius, frame=6, name="tool")]

    lens = [np.linalg.norm(C[i][:3, 3]) for i in range(6)]
    names = [f"link{i + 1}" for i in range(6)]
    pairs = []
    for i in range(6):
        for j in range(i + 2, 6):
            if i >= 3 and j >= 3:
                continue  # wrist links
            if all(lens[k] < 1e-12 for k in range(i + 1, j)):
                continue  # only zero-length links between: effectively adjacent
            pairs.append((names[i], names[j]))
    for i in range(3):
        if model.morphology == "puma" and i == 2:
            continue  # the offset fifth axis lets the torch fold back alongside the forearm
        pairs.append(("tool", names[i]))
    env_links = tuple(names[1:]) + ("tool",)
    return CollisionGeometry(tuple(links), tuple(tool), tuple(scene), tuple(pairs), env_links)


# -- distance kernels ---------------------------------------------------------------

def segment_segment_distance(p0, p1, q0, q1) -> np.ndarray:
    """Exact distance between segments p0-p1 and q0-q1, batched over leading axes.

    The arguments are put in a canonical order first, so swapping the two
    segments gives a bit-identical result.
    """
    p0, p1, q0, q1 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p0, p1, q0, q1)))
    diff = np.concatenate([p0 - q0, p1 - q1], axis=-1)
    first = np.argmax(diff != 0, axis=-1)[..., None]
    swap = (np.take_along_axis(diff, first, axis=-1) > 0)
    p0, q0 = np.where(swap, q0, p0), np.where(swap, p0, q0)
    p1, q1 = np.where(swap, q1, p1), np.where(swap, p1, q1)
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    f = np.einsum("...i,...i->...", d2, r)
    c = np.einsum("...i,...i->...", d1, r)
    b = np.einsum("...i,...i->...", d1, d2)
    eps = 1e-15
    denom = a * e - b * b
    pa = a <= eps  # first segment is a point
    pe = e <= eps  # second segment is a point
    a_ = np.where(pa, 1.0, a)
    e_ = np.where(pe, 1.0, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > eps * np.maximum(a * e, eps), np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e_
        # clamp t to the second segment and re-project onto the first
        s = np.where(t < 0.0, np.clip(-c / a_, 0.0, 1.0), s)
        s = np.where(t > 1.0, np.clip((b - c) / a_, 0.0, 1.0), s)
        t = np.clip(t, 0.0, 1.0)
        # degenerate cases: project the point onto the other segment
        s = np.where(pe, np.clip(-c / a_, 0.0, 1.0), s)
        t = np.where(pe, 0.0, t)
        t = np.where(pa, np.clip(f / e_, 0.0, 1.0), t)
        s = np.where(pa, 0.0, s)
        t = np.where(pa & pe, 0.0, t)
    c1 = p0 + s[..., None] * d1
    c2 = q0 + t[..., None] * d2
    return np.linalg.norm(c1 - c2, axis=-1)


def segment_sdf_min(sdf, a, b, lo=None, hi=None) -> np.ndarray:
    """Minimum of a convex SDF along segments a-b (parameters in [lo, hi])."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = a.shape[:-1]
    lo = np.zeros(shape) if lo is None else np.broadcast_to(np.asarray(lo, dtype=float), shape).copy()
    hi = np.ones(shape) if hi is None else np.broadcast_to(np.asarray(hi, dtype=float), shape).copy()
    d = b - a

    def f(t):
        return sdf(a + t[..., None] * d)

    lo0, hi0 = lo.copy(), hi.copy()
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(_GOLDEN_ITERS):
        left = f1 <= f2  # minimum bracketed by [lo, x2]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        fresh = np.where(left, hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo))
        ff = f(fresh)
        x1, x2 = np.where(left, fresh, x2), np.where(left, x1, fresh)
        f1, f2 = np.where(left, ff, f2), np.where(left, f1, ff)
    return np.minimum.reduce([f1, f2, f(lo0), f(hi0)])


def capsule_capsule_distance(a0, a1, ra, b0, b1, rb) -> np.ndarray:
    return segment_segment_distance(a0, a1, b0, b1) - (ra + rb)


def capsule_primitive_distance(prim, a, b, radius, lo=None, hi=None) -> np.ndarray:
    """Signed clearance between a capsule (or the sub-segment [lo, hi] of it) and a primitive."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if isinstance(prim, HalfSpace):
        lo_ = 0.0 if lo is None else lo
        hi_ = 1.0 if hi is None else hi
        pa = a + np.asarray(lo_)[..., None] * (b - a)
        pb = a + np.asarray(hi_)[..., None] * (b - a)
        return np.minimum(prim.sdf(pa), prim.sdf(pb)) - radius
    return segment_sdf_min(prim.sdf, a, b, lo, hi) - radius


def _outside_sphere_intervals(a, b, center, radius):
    """Parameter intervals of segment a-b lying outside a sphere: ([0, t1], [t2, 1]).

    Returned as (lo1, hi1, ok1, lo2, hi2, ok2); an interval is empty when ok is False.
    """
    d = b - a
    m = a - center
    A = np.einsum("...i,...i->...", d, d)
    B = 2 * np.einsum("...i,...i->...", d, m)
    Cc = np.einsum("...i,...i->...", m, m) - radius**2
    disc = B * B - 4 * A * Cc
    safeA = np.where(A > 1e-18, A, 1.0)
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-B - sq) / (2 * safeA)
    t2 = (-B + sq) / (2 * safeA)
    hit = (disc > 0) & (A > 1e-18)
    # no intersection with the ball's interior: whole segment is outside (unless a point inside)
    whole_out = ~hit & (Cc >= 0)
    lo1 = np.zeros_like(A)
    hi1 = np.where(hit, np.clip(t1, 0.0, 1.0), 1.0)
    ok1 = whole_out | (hit & (t1 > 0.0))
    lo2 = np.where(hit, np.clip(t2, 0.0, 1.0), 1.0)
    hi2 = np.ones_like(A)
    ok2 = hit & (t2 < 1.0)
    return lo1, hi1, ok1, lo2, hi2, ok2


# -- state checks -------------------------------------------------------------------

@dataclass
class CollisionVerdict:
    colliding: bool
    min_clearance: float
    witness: tuple
    margin: float = DEFAULT_MARGIN


@dataclass
class ClearanceBatch:
    """Per-state minimum clearance and the pair attaining it."""

    clearance: np.ndarray
    witness: list

    def verdict(self, k: int, margin: float) -> CollisionVerdict:
        c = float(self.clearance[k])
        return CollisionVerdict(c < margin, c, self.witness[k], margin)


def _world_capsules(geom: CollisionGeometry, F: np.ndarray):
    """Endpoints of every robot capsule in the world, {name: [(a, b, r), ...]}."""
    out: dict[str, list] = {}
    for cap in geom.links + geom.tool:
        R = F[:, cap.frame, :3, :3]
        p = F[:, cap.frame, :3, 3]
        a = np.einsum("nij,j->ni", R, cap.a) + p
        b = np.einsum("nij,j->ni", R, cap.b) + p
        out.setdefault(cap.name, []).append((a, b, cap.radius))
    return out


def clearances(geom: CollisionGeometry, model: RobotModel, q, base: Pose | None = None,
               weld_points=None) -> ClearanceBatch:
    """Minimum signed clearance over all tested pairs for a batch of configurations.

    Args:
        q: (6,) or (N, 6) joint angles.
        weld_points: optional (N, 3) weld points; around each, a sphere of
            ``geom.weld_exclusion`` is ignored for torch-vs-workpiece pairs.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = q.shape[0]
    F = joint_frames(model, q, base).reshape(n, 8, 4, 4)
    caps = _world_capsules(geom, F)
    wp = None if weld_points is None else np.asarray(weld_points, dtype=float).reshape(n, 3)

    best = np.full(n, np.inf)
    who = np.full(n, -1)
    pairs: list[tuple] = []

    def update(d, pair):
        better = d < best
        best[better] = d[better]
        who[better] = len(pairs)
        pairs.append(pair)

    for na, nb in geom.self_pairs:
        for a0, a1, ra in caps[na]:
            for b0, b1, rb in caps[nb]:
                update(capsule_capsule_distance(a0, a1, ra, b0, b1, rb), (na, nb))

    for name in geom.env_links:
        for a0, a1, r in caps.get(name, []):
            for prim in geom.scene:
                if name == "tool" and prim.workpiece and wp is not None:
                    lo1, hi1, ok1, lo2, hi2, ok2 = _outside_sphere_intervals(a0, a1, wp, geom.weld_exclusion)
                    d1 = np.where(ok1, capsule_primitive_distance(prim, a0, a1, r, lo1, hi1), np.inf)
                    d2 = np.where(ok2, capsule_primitive_distance(prim, a0, a1, r, lo2, hi2), np.inf)
                    d = np.minimum(d1, d2)
                else:
                    d = capsule_primitive_distance(prim, a0, a1, r)
                update(d, (name, prim.name))
    return ClearanceBatch(best, [pairs[k] if k >= 0 else None for k in who])


def check_state(geom: CollisionGeometry, model: RobotModel, q, margin: float = DEFAULT_MARGIN,
                base: Pose | None = None, weld_point=None) -> CollisionVerdict:
    wp = None if weld_point is None else np.asarray(weld_point, dtype=float).reshape(1, 3)
    return clearances(geom, model, np.asarray(q, dtype=float).reshape(1, 6), base, wp).verdict(0, margin)


@dataclass
class SweepResult:
    """Outcome of checking a joint path.

    Attributes:
        index: first path sample in collision (a collision between samples k
            and k+1 is reported at k+1), or None when clear.
        verdict: the colliding state's verdict (or the tightest one when clear).
        clearance: (N,) minimum clearance per path sample, including the
            densified states leading up to it.
    """

    index: int | None
    verdict: CollisionVerdict
    clearance: np.ndarray

    @property
    def clear(self) -> bool:
        return self.index is None


def densify(path: np.ndarray, weld_points=None, max_step: float = DENSIFY_STEP):
    """Insert linearly interpolated states so no joint moves more than ``max_step``.

    Returns (states, weld_points, owner) where ``owner[k]`` is the path index
    each state is attributed to.
    """
    path = np.asarray(path, dtype=float)
    if len(path) == 0:
        raise InvalidArgument("empty path")
    jumps = np.abs(np.diff(path, axis=0)).max(axis=1) if len(path) > 1 else np.zeros(0)
    counts = np.maximum(1, np.ceil(jumps / max_step - 1e-12).astype(int))
    states = [path[:1]]
    owners = [np.zeros(1, dtype=int)]
    wps = None if weld_points is None else [np.asarray(weld_points, dtype=float)[:1]]
    for k, m in enumerate(counts):
        u = (np.arange(1, m + 1) / m)[:, None]
        states.append(path[k] + u * (path[k + 1] - path[k]))
        owners.append(np.full(m, k + 1))
        if wps is not None:
            w = np.asarray(weld_points, dtype=float)
            wps.append(w[k] + u * (w[k + 1] - w[k]))
    return (np.concatenate(states), None if wps is None else np.concatenate(wps), np.concatenate(owners))


def sweep_check(geom: CollisionGeometry, model: RobotModel, path, margin: float = DEFAULT_MARGIN,
                base: Pose | None = None, weld_points=None) -> SweepResult:
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if path.shape[0] == 0:
        raise InvalidArgument("empty path")
    states, wps, owner = densify(path, weld_points)
    batch = clearances(geom, model, states, base, wps)
    per_sample = np.full(len(path), np.inf)
    np.minimum.at(per_sample, owner, batch.clearance)
    hits = np.nonzero(batch.clearance < margin)[0]
    if len(hits):
        k = int(hits[0])
        return SweepResult(int(owner[k]), batch.verdict(k, margin), per_sample)
    k = int(np.argmin(batch.clearance))
    return SweepResult(None, batch.verdict(k, margin), per_sample)


def scene_from_dicts(items) -> tuple:
    """Build scene primitives from plain dicts (scenario-file form)."""
    from weldfeas._num import parse_number
    from weldfeas.geom import pose_from_rpy

    def nums(v):
        return [parse_number(x) for x in v]

    out = []
    for it in items:
        kind = it.get("type")
        name = it.get("name", kind)
        wp = bool(it.get("workpiece", kind != "halfspace"))
        if kind == "box":
            out.append(Box(pose_from_rpy(*nums(it["pose"])), nums(it["half_extents"]), name, wp))
        elif kind == "cylinder":
            out.append(Cylinder(pose_from_rpy(*nums(it["pose"])), parse_number(it["radius"]),
                                parse_number(it["length"]), name, wp))
        elif kind == "halfspace":
            out.append(HalfSpace(nums(it["point"]), nums(it["normal"]), name, wp))
        else:
            raise GeometryError(f"unknown primitive type {kind!r}")
    return tuple(out)
