from __future__ import annotations

import math

import numpy as np
import pytest

from choreokit import (
    InputError,
    JointDef,
    RobotProfile,
    Trajectory,
    forward_kinematics,
    load_profile,
    segment_distance,
    self_collision_risk,
    validate_trajectory,
)
from choreokit.motion import MotifSpec, SinusoidSpec, sample_motif
from choreokit.robot_model import segment_distance as seg_dist
from choreokit.trajectory import uniform_times

from oracles import (
    fk_points_oracle,
    min_chain_distance_sampled,
    sampled_segment_distance,
)


def _joint(name, axis=(0, 0, 1), offset=(0, 0, 0), rpy=(0, 0, 0),
           limits=(-2 * math.pi, 2 * math.pi), vel=math.pi, acc=40.0):
    return JointDef(
        name=name,
        axis=axis,
        offset_m=offset,
        rpy_rad=rpy,
        position_limits_rad=limits,
        velocity_limit_rad_s=vel,
        acceleration_limit_rad_s2=acc,
    )


def _straight_profile(lengths):
    """Test arm: all z axes, links stacked along +z, no fixed rotations."""
    joints = tuple(
        _joint(f"j{i}", offset=(0.0, 0.0, L)) for i, L in enumerate(lengths)
    )
    return RobotProfile(name="straight", joints=joints, control_rate_hz=100.0)


def test_fk_zero_pose_is_composition_of_fixed_transforms():
    lengths = [0.2, 0.3, 0.25, 0.1, 0.1, 0.05]
    prof = _straight_profile(lengths)
    pts = forward_kinematics(prof, np.zeros(6)).p
    assert pts.shape == (7, 3)
    # with identity joint rotations the chain is just the stacked offsets
    np.testing.assert_allclose(pts[:, 2], np.concatenate([[0.0], np.cumsum(lengths)]))
    np.testing.assert_allclose(pts[:, :2], 0.0)


def test_fk_matches_homogeneous_matrix_oracle(ur5e):
    rng = np.random.default_rng(42)
    for _ in range(200):
        q = rng.uniform(-math.pi, math.pi, size=6)
        impl = forward_kinematics(ur5e, q).p
        ref = fk_points_oracle(ur5e, q)
        assert np.abs(impl - ref).max() < 1e-12


def test_base_half_turn_negates_tool_xy(ur5e):
    base = forward_kinematics(ur5e, np.zeros(6)).p
    turned = forward_kinematics(ur5e, np.array([math.pi, 0, 0, 0, 0, 0])).p
    # every point past the base joint mirrors through the base z axis
    np.testing.assert_allclose(turned[1:, 0], -base[1:, 0], atol=1e-12)
    np.testing.assert_allclose(turned[1:, 1], -base[1:, 1], atol=1e-12)
    np.testing.assert_allclose(turned[:, 2], base[:, 2], atol=1e-12)


def test_base_joint_equivariance(ur5e):
    rng = np.random.default_rng(3)
    for _ in range(25):
        q = rng.uniform(-2.0, 2.0, size=6)
        delta = rng.uniform(-math.pi, math.pi)
        q2 = q.copy()
        q2[0] += delta
        a = forward_kinematics(ur5e, q).p
        b = forward_kinematics(ur5e, q2).p
        c, s = math.cos(delta), math.sin(delta)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        assert np.abs(b - a @ rot.T).max() < 1e-9


def test_consecutive_point_distances_equal_link_lengths(ur5e):
    rng = np.random.default_rng(11)
    expected = [np.linalg.norm(j.offset_m) for j in ur5e.joints]
    for _ in range(50):
        q = rng.uniform(-math.pi, math.pi, size=6)
        pts = forward_kinematics(ur5e, q).p
        lens = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        np.testing.assert_allclose(lens, expected, atol=1e-12)


def test_fk_rejects_bad_input(ur5e):
    with pytest.raises(InputError):
        forward_kinematics(ur5e, np.zeros(5))
    with pytest.raises(InputError):
        forward_kinematics(ur5e, [0, 0, math.nan, 0, 0, 0])


def test_segment_distance_hand_cases():
    # crossing segments touch
    assert segment_distance((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0)) == 0.0
    # parallel unit apart
    assert segment_distance((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)) == pytest.approx(1.0)
    # disjoint colinear: gap between endpoints
    assert segment_distance((0, 0, 0), (1, 0, 0), (3, 0, 0), (4, 0, 0)) == pytest.approx(2.0)
    # degenerate: both segments are points
    assert segment_distance((0, 0, 0), (0, 0, 0), (0, 3, 4), (0, 3, 4)) == pytest.approx(5.0)


def test_segment_distance_matches_sampling_oracle():
    rng = np.random.default_rng(8)
    for _ in range(40):
        pts = rng.uniform(-1.0, 1.0, size=(4, 3))
        exact = segment_distance(pts[0], pts[1], pts[2], pts[3])
        approx = sampled_segment_distance(pts[0], pts[1], pts[2], pts[3], n=2000)
        # the sampled value can only overestimate, by at most the grid pitch
        assert exact <= approx + 1e-12
        assert approx - exact < 2e-3


def test_segment_distance_symmetry_and_sign():
    rng = np.random.default_rng(9)
    for _ in range(60):
        pts = rng.uniform(-1.0, 1.0, size=(4, 3))
        d1 = seg_dist(pts[0], pts[1], pts[2], pts[3])
        d2 = seg_dist(pts[2], pts[3], pts[0], pts[1])
        assert d1 >= 0.0
        assert d1 == pytest.approx(d2, abs=1e-12)


def test_straight_arm_reports_no_risk(ur5e):
    check = self_collision_risk(ur5e, np.zeros(6))
    assert not check.risk
    assert check.min_distance_m > ur5e.collision_clearance_m


def test_folded_configuration_flagged(ur5e, folded_q):
    pts = forward_kinematics(ur5e, folded_q).p
    # the construction puts the tool point within 5 cm of the upper arm
    tool_gap = seg_dist(pts[6], pts[6], pts[1], pts[2])
    assert tool_gap < 0.05
    check = self_collision_risk(ur5e, folded_q)
    assert check.risk
    assert check.min_distance_m < ur5e.collision_clearance_m


def test_folded_min_distance_matches_sampling_oracle(ur5e, folded_q):
    pts = forward_kinematics(ur5e, folded_q).p
    check = self_collision_risk(ur5e, folded_q)
    ref = min_chain_distance_sampled(pts, n=2000)
    assert check.min_distance_m == pytest.approx(ref, abs=1e-3)


def test_collision_uses_clearance_override(ur5e, folded_q):
    check = self_collision_risk(ur5e, folded_q, clearance_m=0.01)
    assert not check.risk  # same distance, tighter clearance


def _traj(qs, rate):
    qs = np.asarray(qs, dtype=float)
    return Trajectory(rate=rate, ts=uniform_times(qs.shape[0], rate), qs=qs, source="motif")


def test_velocity_violation_on_pi_step(ur5e):
    qs = np.zeros((2, 6))
    qs[1, 2] = math.pi
    report = validate_trajectory(ur5e, _traj(qs, 500.0))
    vels = [v for v in report.violations if v.kind == "velocity" and v.joint == 2]
    assert vels
    # one-sided difference at both samples: pi * 500 metricized
    assert vels[0].value == pytest.approx(math.pi * 500.0, abs=1e-6)
    assert vels[0].value == pytest.approx(1570.8, abs=0.1)


def test_stirring_motif_passes_velocity_check(ur5e):
    elbow = SinusoidSpec.from_freq(A_rad=math.pi / 4, freq_hz=0.5)
    rest = SinusoidSpec()
    motif = MotifSpec(
        id="stir",
        label="stir",
        duration_s=10.0,
        joints=(rest, rest, elbow, rest, rest, rest),
    )
    traj = sample_motif(motif, 500.0)
    report = validate_trajectory(ur5e, traj)
    assert not [v for v in report.violations if v.kind == "velocity"]
    # analytic peak A*omega = pi^2/4, well under the elbow limit
    assert math.pi ** 2 / 4 < ur5e.joints[2].velocity_limit_rad_s


def test_position_violation_reports_every_sample(ur5e):
    qs = np.zeros((6, 6))
    qs[1, 2] = 3.2  # beyond the elbow's single-turn limit
    qs[4, 2] = 3.3
    report = validate_trajectory(ur5e, _traj(qs, 10.0))
    pos = [v for v in report.violations if v.kind == "position"]
    assert {v.sample for v in pos} >= {1, 4}
    assert all(v.joint == 2 for v in pos)


def test_acceleration_violation_detected(ur5e):
    # a one-sample spike: central second difference 2*dq*rate^2
    qs = np.zeros((5, 6))
    qs[2, 1] = 0.004
    report = validate_trajectory(ur5e, _traj(qs, 500.0))
    accs = [v for v in report.violations if v.kind == "acceleration"]
    assert accs
    assert max(v.value for v in accs) == pytest.approx(2 * 0.004 * 500.0**2, rel=1e-9)
    assert not [v for v in report.violations if v.kind == "velocity"]


def test_validation_requires_two_samples(ur5e):
    with pytest.raises(InputError):
        validate_trajectory(ur5e, _traj(np.zeros((1, 6)), 100.0))


def test_empty_report_means_safe(ur5e):
    qs = np.tile(np.array([0.0, -0.4, 0.5, 0.1, 0.2, 0.0]), (20, 1))
    report = validate_trajectory(ur5e, _traj(qs, 100.0))
    assert report.ok
    assert report.violations == ()


def test_profile_rejects_wrong_joint_count():
    joints = tuple(_joint(f"j{i}") for i in range(5))
    with pytest.raises(InputError):
        RobotProfile(name="short", joints=joints)


def test_profile_rejects_bad_limits():
    with pytest.raises(InputError):
        _joint("bad", limits=(1.0, -1.0))
    with pytest.raises(InputError):
        _joint("bad", vel=0.0)
    with pytest.raises(InputError):
        _joint("bad", axis=(0, 0, 0))


def test_profile_file_roundtrip(tmp_path, ur5e):
    # the shipped file parses into the same values a fresh load produces
    again = load_profile(
        __import__("importlib.resources", fromlist=["files"])
        .files("choreokit")
        .joinpath("data/ur5e.profile")
    )
    assert again == ur5e
    assert again.joint_names() == (
        "shoulder_pan",
        "shoulder_lift",
        "elbow",
        "wrist_1",
        "wrist_2",
        "wrist_3",
    )


def test_profile_load_errors(tmp_path):
    bad = tmp_path / "bad.profile"
    bad.write_text("name: x\njoints: [{name: j0}]\n")
    with pytest.raises(InputError):
        load_profile(bad)
    missing = tmp_path / "missing.profile"
    with pytest.raises(InputError):
        load_profile(missing)


def test_neutral_q_is_limit_midpoints(ur5e):
    mids = ur5e.neutral_q()
    for j, mid in zip(ur5e.joints, mids):
        lo, hi = j.position_limits_rad
        assert mid == pytest.approx((lo + hi) / 2)
