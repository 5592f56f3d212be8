import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weldfeas.errors import InvalidArgument, NoSolution
from weldfeas.geom import Pose
from weldfeas.ik import LABELS, check_solution, joint_distance, nearest_solution, solve_ik, solve_ik_batch
from weldfeas.robotmodel import fk_matrix, forward_kinematics, get_model, joint_frames, reach_bound

joint_vectors = st.lists(st.floats(-math.pi, math.pi, allow_nan=False), min_size=6, max_size=6)


def test_labels_are_lexicographic():
    assert LABELS[0] == "s+e+w+" and LABELS[-1] == "s-e-w-" and len(set(LABELS)) == 8
    assert list(LABELS) == sorted(LABELS, key=lambda s: s.replace("+", "0").replace("-", "1"))


def _near_branch_fold(m, q, tol=1e-3):
    """True near a shoulder, elbow or wrist fold where two branches meet."""
    if m.morphology == "ur":
        shoulder_offset, elbow = abs(m.dh[3].d), abs(math.sin(q[2]))
    else:
        shoulder_offset, elbow = abs(m.dh[0].d), abs(math.cos(q[2]))
    wrist_centre = joint_frames(m, q)[5][:3, 3]
    shoulder = abs(math.hypot(wrist_centre[0], wrist_centre[1]) - shoulder_offset)
    return min(shoulder, elbow, abs(math.sin(q[4]))) < tol


@pytest.mark.parametrize("key", ["puma", "ur"])
@given(q=joint_vectors)
def test_ik_contains_seed_and_is_sound(key, q):
    # completeness (the generating configuration is found) and soundness (every answer hits the target)
    m = get_model(key)
    target = forward_kinematics(m, q)
    sols = solve_ik(m, target)
    for s in sols:
        d_pos, d_ang = check_solution(m, s, target)
        assert d_pos < 1e-8 and d_ang < 1e-8
    if _near_branch_fold(m, q):
        # joint error at a fold grows like the square root of rounding noise
        return
    assert any(joint_distance(s, q) < 1e-7 for s in sols)


def test_puma_generic_target_has_eight_solutions(rng):
    m = get_model("puma")
    q = rng.uniform(-math.pi, math.pi, (200, 6))
    counts = [len(solve_ik(m, forward_kinematics(m, qi))) for qi in q]
    assert np.mean(np.equal(counts, 8)) > 0.97


def test_ur_solution_counts_are_even(rng):
    m = get_model("ur")
    q = rng.uniform(-math.pi, math.pi, (200, 6))
    for qi in q:
        assert len(solve_ik(m, forward_kinematics(m, qi))) % 2 == 0


@pytest.mark.parametrize("key", ["puma", "ur"])
def test_out_of_reach_has_no_solution(key):
    m = get_model(key)
    far = Pose([reach_bound(m) + 0.5, 0.0, 0.0], np.eye(3))
    assert len(solve_ik(m, far)) == 0
    with pytest.raises(NoSolution):
        nearest_solution(solve_ik(m, far), np.zeros(6))


def test_batch_matches_single(rng):
    m = get_model("ur")
    q = rng.uniform(-3, 3, (20, 6))
    T = fk_matrix(m, q)
    qb, vb, _ = solve_ik_batch(m, T)
    for k in range(20):
        q1, v1, _ = solve_ik_batch(m, T[k])
        assert np.array_equal(v1, vb[k])
        assert np.allclose(q1[v1], qb[k][vb[k]])


def test_batch_rejects_nan():
    with pytest.raises(InvalidArgument):
        solve_ik_batch(get_model("puma"), np.full((4, 4), np.nan))


def test_nearest_solution_picks_closest(rng):
    m = get_model("puma")
    q = rng.uniform(-2, 2, 6)
    sols = solve_ik(m, forward_kinematics(m, q))
    assert joint_distance(nearest_solution(sols, q + 1e-3), q) < 1e-6


def test_joint_distance_wraps():
    assert joint_distance([math.pi - 0.1] + [0] * 5, [-math.pi + 0.1] + [0] * 5) == pytest.approx(0.2)
