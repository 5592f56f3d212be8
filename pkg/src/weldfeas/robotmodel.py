"""Kinematic and mass description of the two 6R morphologies.

Both chains are written as six rows of (d, a, alpha). Two row conventions are
supported:

``standard``
    link transform ``Rz(q) Tz(d) Tx(a) Rx(alpha)`` (UR-like arm).
``khalil``
    link transform ``Rz(q) Tx(a) Rx(alpha) Tz(d)``. Regrouped, this is the
    Khalil-Kleinfinger modified convention with each table row holding the
    twist/length of the next frame, which is how the PUMA-like table reads:
    0.42 m upper arm, 0.38 m forearm along the joint-4 axis, a 0.11 m lateral
    shoulder offset and a spherical wrist.

Lumped link masses and centres of mass are expressed in the *joint frame*: the
frame whose z-axis is joint i's axis, located where the previous link ends and
already rotated by q_i (``T_0,i-1 @ Rz(q_i)``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from weldfeas._num import format_number, parse_number
from weldfeas.errors import ConfigError, InvalidArgument
from weldfeas.geom import Pose, rot_y

RPM = 2.0 * math.pi / 60.0

CONVENTIONS = ("standard", "khalil")
MORPHOLOGIES = ("puma", "ur")


@dataclass(frozen=True)
class DHRow:
    d: float
    a: float
    alpha: float
    theta_offset: float = 0.0

    def __post_init__(self):
        for v in (self.d, self.a, self.alpha, self.theta_offset):
            if not math.isfinite(v):
                raise InvalidArgument(f"non-finite DH parameter in {self}")


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    morphology: str
    convention: str
    dh: tuple
    tcp: Pose
    speed_max: np.ndarray
    torque_max: np.ndarray
    masses: np.ndarray
    coms: np.ndarray
    l_arm: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.morphology not in MORPHOLOGIES:
            raise InvalidArgument(f"unsupported morphology {self.morphology!r}")
        if self.convention not in CONVENTIONS:
            raise InvalidArgument(f"unknown DH convention {self.convention!r}")
        if len(self.dh) != 6:
            raise InvalidArgument("a 6R model needs exactly six DH rows")
        object.__setattr__(self, "dh", tuple(self.dh))
        for attr, shape in (("speed_max", (6,)), ("torque_max", (6,)), ("masses", (6,)), ("coms", (6, 3))):
            arr = np.array(getattr(self, attr), dtype=float)
            if arr.shape != shape:
                raise InvalidArgument(f"{attr} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def d(self) -> np.ndarray:
        return np.array([r.d for r in self.dh])

    @property
    def a(self) -> np.ndarray:
        return np.array([r.a for r in self.dh])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([r.alpha for r in self.dh])

    def with_masses(self, masses) -> "RobotModel":
        return RobotModel(self.name, self.morphology, self.convention, self.dh, self.tcp,
                          self.speed_max, self.torque_max, masses, self.coms, self.l_arm, dict(self.meta))

    def with_limits(self, speed_max=None, torque_max=None) -> "RobotModel":
        return RobotModel(self.name, self.morphology, self.convention, self.dh, self.tcp,
                          self.speed_max if speed_max is None else speed_max,
                          self.torque_max if torque_max is None else torque_max,
                          self.masses, self.coms, self.l_arm, dict(self.meta))


# -- builtin morphologies ---------------------------------------------------

# 5 rpm = pi/6 rad/s, 10 rpm = pi/3 rad/s
SPEED_MAX = np.array([math.pi / 6] * 3 + [math.pi / 3] * 3)
TORQUE_MAX = np.array([65.0, 65.0, 65.0, 20.0, 20.0, 20.0])

# 45 degree bend between the last joint axis and the torch; lateral offset along
# the joint-6 x-axis, bend about its y-axis.
TORCH_BEND = math.pi / 4


def tcp_mount(reach: float, offset: float, bend: float = TORCH_BEND) -> Pose:
    """Transform from the joint-6 frame to the contact-tube tip."""
    return Pose(np.array([offset, 0.0, reach]), rot_y(bend))


def ur_like() -> RobotModel:
    p2 = math.pi / 2
    return RobotModel(
        name="UR-like",
        morphology="ur",
        convention="standard",
        dh=(
            DHRow(0.117, 0.0, p2),
            DHRow(0.0, 0.38, 0.0),
            DHRow(0.0, 0.355, 0.0),
            DHRow(-0.11, 0.0, p2),
            DHRow(0.22, 0.0, -p2),
            DHRow(0.19, 0.0, 0.0),
        ),
        tcp=tcp_mount(0.19, 0.04),
        speed_max=SPEED_MAX,
        torque_max=TORQUE_MAX,
        masses=np.array([1040, 3190, 890, 740, 740, 2000]) / 1000.0,
        coms=np.array([
            [0.0, -0.08, 0.0],
            [0.362, 0.0, 0.05],
            [0.295, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, -0.03, 0.08],
        ]),
        l_arm=0.735,
    )


def puma_like() -> RobotModel:
    p2 = math.pi / 2
    return RobotModel(
        name="PUMA-like",
        morphology="puma",
        convention="khalil",
        dh=(
            DHRow(0.11, 0.0, p2),
            DHRow(0.0, 0.42, 0.0),
            DHRow(0.38, 0.0, -p2),
            DHRow(0.0, 0.0, p2),
            DHRow(0.0, 0.0, -p2),
            DHRow(0.0, 0.0, 0.0),
        ),
        tcp=tcp_mount(0.37, 0.03),
        speed_max=SPEED_MAX,
        torque_max=TORQUE_MAX,
        masses=np.array([1040, 3210, 1040, 860, 740, 2000]) / 1000.0,
        coms=np.array([
            [0.0, 0.08, 0.0],
            [0.4, 0.0, 0.0],
            [0.0, 0.05, 0.0],
            [0.0, 0.1, -0.05],
            [0.0, 0.0, 0.0],
            [-0.03, 0.0, 0.11],
        ]),
        l_arm=0.793,
    )


def builtin_models() -> tuple[RobotModel, RobotModel]:
    """Return the (PUMA-like, UR-like) pair."""
    return puma_like(), ur_like()


def get_model(key: str) -> RobotModel:
    key = key.lower()
    if key in ("ur", "ur-like"):
        return ur_like()
    if key in ("puma", "puma-like"):
        return puma_like()
    raise InvalidArgument(f"unknown robot {key!r}; expected 'ur' or 'puma'")


# -- kinematics ---------------------------------------------------------------

def _link_constant(model: RobotModel) -> np.ndarray:
    """(6, 4, 4) constant part of each link transform (everything after Rz(q))."""
    out = np.zeros((6, 4, 4))
    for i, r in enumerate(model.dh):
        ca, sa = math.cos(r.alpha), math.sin(r.alpha)
        Rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]], dtype=float)
        T = np.eye(4)
        T[:3, :3] = Rx
        if model.convention == "standard":
            T[:3, 3] = [r.a, 0.0, r.d]
        else:
            T[:3, 3] = np.array([r.a, 0.0, 0.0]) + Rx @ np.array([0.0, 0.0, r.d])
        out[i] = T
    return out


def _rz_batch(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    T = np.zeros(theta.shape + (4, 4))
    T[..., 0, 0] = c
    T[..., 0, 1] = -s
    T[..., 1, 0] = s
    T[..., 1, 1] = c
    T[..., 2, 2] = 1.0
    T[..., 3, 3] = 1.0
    return T


def joint_frames(model: RobotModel, q, base: Pose | None = None) -> np.ndarray:
    """Frames along the chain for a batch of configurations.

    Args:
        q: joint angles, shape (6,) or (N, 6).
        base: optional base pose; frames are then expressed in the world.

    Returns:
        Array of shape (..., 8, 4, 4): index i in 0..5 is joint i+1's frame
        (after its rotation), 6 is the joint-6 frame at the end of the chain
        (flange) and 7 is the TCP.
    """
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    qb = q.reshape(-1, 6)
    n = qb.shape[0]
    C = _link_constant(model)
    offs = np.array([r.theta_offset for r in model.dh])
    Rz = _rz_batch(qb + offs)
    out = np.empty((n, 8, 4, 4))
    T = np.broadcast_to(base.matrix() if base is not None else np.eye(4), (n, 4, 4)).copy()
    for i in range(6):
        T = T @ Rz[:, i]
        out[:, i] = T
        T = T @ C[i]
    out[:, 6] = T
    out[:, 7] = T @ model.tcp.matrix()
    return out[0] if single else out


def forward_kinematics(model: RobotModel, q, base: Pose | None = None) -> Pose:
    """TCP pose for one configuration (in the base frame unless ``base`` is given)."""
    return Pose.from_matrix(joint_frames(model, q, base)[7])


def fk_matrix(model: RobotModel, q, base: Pose | None = None) -> np.ndarray:
    return joint_frames(model, q, base)[..., 7, :, :]


def geometric_jacobian(model: RobotModel, q, base: Pose | None = None) -> np.ndarray:
    """6x6 Jacobian at the TCP; rows are (linear velocity, angular velocity)."""
    F = joint_frames(model, q, base)
    z = F[..., :6, :3, 2]
    p = F[..., :6, :3, 3]
    p_tcp = F[..., 7, :3, 3]
    lin = np.cross(z, p_tcp[..., None, :] - p)
    J = np.concatenate([np.swapaxes(lin, -1, -2), np.swapaxes(z, -1, -2)], axis=-2)
    return J


def wrist_center(model: RobotModel, q, base: Pose | None = None) -> np.ndarray:
    """Point where the wrist axes meet (PUMA) / joint-5 frame origin (UR)."""
    F = joint_frames(model, q, base)
    if model.morphology == "puma":
        return F[..., 3, :3, 3]
    # UR: origin of the joint-6 frame, i.e. where d5 ends
    return F[..., 5, :3, 3]


def reach_bound(model: RobotModel) -> float:
    """Upper bound on the TCP distance from the base origin."""
    return float(np.sum(np.abs(model.d)) + np.sum(np.abs(model.a)) + np.linalg.norm(model.tcp.position))


# -- config files ---------------------------------------------------------------

def model_to_dict(model: RobotModel) -> dict:
    return {
        "schema_version": 1,
        "name": model.name,
        "morphology": model.morphology,
        "convention": model.convention,
        "dh": [
            {"d": r.d, "a": r.a, "alpha": format_number(r.alpha), "theta_offset": format_number(r.theta_offset)}
            if r.theta_offset else {"d": r.d, "a": r.a, "alpha": format_number(r.alpha)}
            for r in model.dh
        ],
        "tcp": {
            "position": [float(v) for v in model.tcp.position],
            "bend": format_number(float(math.atan2(model.tcp.rotation[0, 2], model.tcp.rotation[2, 2]))),
        },
        "speed_max_rpm": [round(float(v) / RPM, 12) for v in model.speed_max],
        "torque_max": [float(v) for v in model.torque_max],
        "masses_g": [round(float(m) * 1000.0, 9) for m in model.masses],
        "coms": [[float(v) for v in c] for c in model.coms],
        "l_arm": model.l_arm,
    }


def model_from_dict(data: dict) -> RobotModel:
    try:
        dh = tuple(
            DHRow(parse_number(r["d"]), parse_number(r["a"]), parse_number(r["alpha"]),
                  parse_number(r.get("theta_offset", 0.0)))
            for r in data["dh"]
        )
        tcp = data["tcp"]
        bend = parse_number(tcp.get("bend", TORCH_BEND))
        return RobotModel(
            name=str(data["name"]),
            morphology=str(data["morphology"]),
            convention=str(data.get("convention", "standard")),
            dh=dh,
            tcp=Pose(np.array(tcp["position"], dtype=float), rot_y(bend)),
            speed_max=np.array([parse_number(v) for v in data["speed_max_rpm"]]) * RPM,
            torque_max=np.array([parse_number(v) for v in data["torque_max"]]),
            masses=np.array([parse_number(v) for v in data["masses_g"]]) / 1000.0,
            coms=np.array(data["coms"], dtype=float),
            l_arm=parse_number(data["l_arm"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid robot model description: {exc}") from exc


def load_model(path) -> RobotModel:
    with open(Path(path), encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
