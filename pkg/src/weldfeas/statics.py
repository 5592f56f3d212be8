"""Static gravity torques from a Newton-Euler backward sweep over lumped masses."""

from __future__ import annotations

import numpy as np

from weldfeas.geom import Pose
from weldfeas.robotmodel import RobotModel, joint_frames

GRAVITY = np.array([0.0, 0.0, -9.81])


def com_positions(model: RobotModel, q, base: Pose | None = None) -> np.ndarray:
    """World positions of the six lumped centres of mass, shape (..., 6, 3)."""
    F = joint_frames(model, q, base)[..., :6, :, :]
    return np.einsum("...kij,kj->...ki", F[..., :3, :3], model.coms) + F[..., :3, 3]


def static_torques(model: RobotModel, q, base: Pose | None = None, g=GRAVITY) -> np.ndarray:
    """Actuator torques [N m] holding configuration ``q`` against gravity.

    The sweep runs from the tool back to the base, accumulating the weight
    carried beyond each joint and its moment about that joint's axis point.
    The returned torque is what the motor must supply, i.e. the gradient of
    the gravitational potential, ``tau_i = -z_i . sum_k (c_k - p_i) x m_k g``.

    Works on a single configuration (6,) or a batch (N, 6). Gravity is given
    in the world frame; the base pose reorients the chain, not gravity.
    """
    F = joint_frames(model, q, base)[..., :6, :, :]
    z = F[..., :3, 2]
    p = F[..., :3, 3]
    c = np.einsum("...kij,kj->...ki", F[..., :3, :3], model.coms) + p
    w = model.masses[:, None] * np.asarray(g, dtype=float)  # (6, 3) weights

    tau = np.zeros(z.shape[:-1])
    force = np.zeros(z.shape[:-2] + (3,))
    moment = np.zeros(z.shape[:-2] + (3,))  # about the world origin
    for i in range(5, -1, -1):
        force = force + w[i]
        moment = moment + np.cross(c[..., i, :], w[i])
        # moment about joint i's axis point: M_O - p_i x F
        m_i = moment - np.cross(p[..., i, :], force)
        tau[..., i] = -np.einsum("...j,...j->...", z[..., i, :], m_i)
    return tau


def potential_energy(model: RobotModel, q, base: Pose | None = None, g=GRAVITY) -> np.ndarray:
    c = com_positions(model, q, base)
    return -np.einsum("...kj,kj->...", c, model.masses[:, None] * np.asarray(g, dtype=float))


def torque_utilization(model: RobotModel, tau) -> np.ndarray:
    """|tau_i| / tau_max_i."""
    return np.abs(tau) / model.torque_max
