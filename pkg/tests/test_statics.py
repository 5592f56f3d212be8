import math

import numpy as np
import pytest

from weldfeas.geom import pose_from_rpy
from weldfeas.robotmodel import get_model, joint_frames
from weldfeas.statics import GRAVITY, com_positions, potential_energy, static_torques, torque_utilization


def _numeric_gradient(m, q, base, h=1e-6):
    g = np.zeros(6)
    for i in range(6):
        dq = np.zeros(6)
        dq[i] = h
        g[i] = (potential_energy(m, q + dq, base) - potential_energy(m, q - dq, base)) / (2 * h)
    return g


@pytest.mark.parametrize("key", ["puma", "ur"])
@pytest.mark.parametrize("base", [None, pose_from_rpy(0, 0, 0.8, 0, math.pi / 2, 0)])
def test_static_torque_is_potential_gradient(key, base, rng):
    # motor torque balancing gravity equals dV/dq
    m = get_model(key)
    for _ in range(25):
        q = rng.uniform(-math.pi, math.pi, 6)
        tau = static_torques(m, q, base)
        grad = _numeric_gradient(m, q, base)
        assert np.allclose(tau, grad, rtol=1e-5, atol=1e-6 * np.abs(grad).max())


@pytest.mark.parametrize("key", ["puma", "ur"])
def test_static_torque_matches_com_jacobian_transpose(key, rng):
    # second oracle: tau = -sum_k J_k^T m_k g with J_k the COM point Jacobian
    m = get_model(key)
    q = rng.uniform(-math.pi, math.pi, 6)
    F = joint_frames(m, q)
    c = com_positions(m, q)
    tau = np.zeros(6)
    for k in range(6):
        for i in range(k + 1):
            z, p = F[i, :3, 2], F[i, :3, 3]
            tau[i] -= np.dot(np.cross(z, c[k] - p), m.masses[k] * GRAVITY)
    assert np.allclose(static_torques(m, q), tau, atol=1e-12)


def test_batch_shape_and_first_joint_free_of_gravity(rng):
    # with a vertical first axis gravity exerts no torque on joint 1
    m = get_model("ur")
    q = rng.uniform(-3, 3, (7, 6))
    tau = static_torques(m, q)
    assert tau.shape == (7, 6)
    assert np.allclose(tau[:, 0], 0.0, atol=1e-12)


def test_wall_mount_loads_first_joint():
    m = get_model("puma")
    base = pose_from_rpy(0, 0, 0.8, 0, math.pi / 2, 0)
    tau = static_torques(m, np.array([0.3, 0.2, -0.4, 0.1, 0.5, 0.0]), base)
    assert abs(tau[0]) > 0.1


def test_torque_utilization():
    m = get_model("ur")
    assert np.allclose(torque_utilization(m, -m.torque_max), 1.0)
