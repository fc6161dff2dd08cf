"""Reference-path geometry, pure pursuit, and demonstration recording tests.

Path shape is checked against closed-form arc geometry (lateral displacement,
arclength, tangent continuity); the tracker against analytic special cases
and curvature on a circle; recorded demos for determinism and bit-exact
replayability.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from rowturn.demos import (
    SEG_ENTRY,
    SEG_EXIT,
    SEG_TURN,
    DemoJitter,
    DemoTimeout,
    PursuitParams,
    RecoverySpec,
    ReferencePath,
    collect_dataset,
    generate_demo,
    jittered_start_pose,
    nominal_start_pose,
    path_done,
    plan_row_skip_path,
    pursuit_control,
    replay_demo,
)
from rowturn.world import Pose, RobotState, wrap_angle

from conftest import SMALL_FIELD


# ---------------------------------------------------------------------------
# Reference path geometry


def test_path_waypoint_spacing(small_path):
    seg = np.hypot(np.diff(small_path.points[:, 0]), np.diff(small_path.points[:, 1]))
    assert seg.max() <= 0.05  # coarse contract
    assert seg.max() <= 0.02 + 1e-9  # actual densification target
    assert seg.min() > 0.0


def test_path_tangent_continuity(small_path):
    dth = np.abs([wrap_angle(b - a) for a, b in zip(small_path.tangents, small_path.tangents[1:])])
    assert dth.max() <= 0.2


def test_path_endpoint_geometry(small_stalks, small_path):
    pitch = small_stalks.row_pitch
    y0 = small_stalks.lane_center_y(0)
    assert small_path.points[0, 1] == pytest.approx(y0)
    # two-lane displacement: for the default pitch this is 1.52 m
    assert small_path.points[-1, 1] - small_path.points[0, 1] == pytest.approx(2 * pitch)
    assert small_path.tangents[0] == 0.0
    assert small_path.tangents[-1] == pytest.approx(math.pi)
    assert small_path.points[-1, 0] < small_stalks.row_length  # re-enters the field


def test_path_arclength_closed_form(small_stalks):
    exit_back, headland, entry_len = 3.0, 1.0, 3.0
    path = plan_row_skip_path(small_stalks, 0, exit_back, headland, entry_len)
    expected = exit_back + math.pi * small_stalks.row_pitch + entry_len
    assert path.total_length == pytest.approx(expected, rel=0.01)
    # arc tangents sweep 0 -> pi monotonically
    turn = [t for t, tag in zip(path.tangents, path.tags) if tag == SEG_TURN]
    assert all(b > a for a, b in zip(turn, turn[1:]))
    assert {SEG_EXIT, SEG_TURN, SEG_ENTRY} == set(path.tags)


def test_path_point_at_arclength(small_path):
    assert small_path.point_at_arclength(0.0) == tuple(small_path.points[0])
    assert small_path.point_at_arclength(1e9) == tuple(small_path.points[-1])
    # arclength lookup lands within one waypoint step of the requested s
    s = small_path.total_length / 2.0
    x, y = small_path.point_at_arclength(s)
    i = small_path.nearest_index(x, y)
    assert abs(small_path.arclength[i] - s) <= 0.03


def test_path_invalid_lane(small_stalks):
    with pytest.raises(ValueError, match="start_lane"):
        plan_row_skip_path(small_stalks, small_stalks.num_lanes - 1)
    with pytest.raises(ValueError, match="start_lane"):
        plan_row_skip_path(small_stalks, -1)


# ---------------------------------------------------------------------------
# Pure pursuit


def test_pursuit_straight_ahead_zero_turn(small_path, pursuit, robot):
    p0 = small_path.points[0]
    state = RobotState(Pose(float(p0[0]), float(p0[1]), 0.0))
    v, w = pursuit_control(state, small_path, pursuit, robot)
    assert w == pytest.approx(0.0, abs=1e-9)
    assert v == pytest.approx(pursuit.v_ref)


def test_pursuit_turns_toward_offset_target(small_path, pursuit, robot):
    p0 = small_path.points[0]
    left = RobotState(Pose(float(p0[0]), float(p0[1]) - 0.2, 0.0))  # path is to the left
    _, w_left = pursuit_control(left, small_path, pursuit, robot)
    assert w_left > 0.0
    right = RobotState(Pose(float(p0[0]), float(p0[1]) + 0.2, 0.0))
    _, w_right = pursuit_control(right, small_path, pursuit, robot)
    assert w_right < 0.0


def test_pursuit_speed_floor_when_reversed(small_path, pursuit, robot):
    p0 = small_path.points[0]
    state = RobotState(Pose(float(p0[0]), float(p0[1]), math.pi))  # facing backwards
    v, w = pursuit_control(state, small_path, pursuit, robot)
    assert v == pytest.approx(0.3 * pursuit.v_ref)
    assert abs(w) <= robot.omega_max


def test_pursuit_curvature_on_circle(robot, pursuit):
    """Tracking a circle of radius r yields measured curvature near 1/r."""
    r = 0.76
    phis = np.arange(0.0, 2 * math.pi, 0.02 / r)
    pts = np.stack([r * np.cos(phis), r * np.sin(phis)], axis=1)
    tans = np.array([wrap_angle(p + math.pi / 2) for p in phis])
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    path = ReferencePath(pts, tans, np.concatenate([[0.0], np.cumsum(seg)]), ["c"] * len(pts))

    from rowturn.world import step_dynamics

    state = RobotState(Pose(r, 0.0, math.pi / 2), v=pursuit.v_ref)
    curvatures = []
    for _ in range(150):
        v, w = pursuit_control(state, path, pursuit, robot)
        state = step_dynamics(state, (v, w), robot)
        if state.v > 0.1:
            curvatures.append(state.omega / state.v)
    mean_k = float(np.mean(curvatures[20:]))  # discard the velocity ramp
    assert mean_k == pytest.approx(1.0 / r, rel=0.15)


def test_path_done_radius(small_path, pursuit):
    end = small_path.points[-1]
    at_end = RobotState(Pose(float(end[0]), float(end[1]) + 0.05, 0.0))
    away = RobotState(Pose(float(end[0]) - 1.0, float(end[1]), 0.0))
    assert path_done(at_end, small_path, pursuit)
    assert not path_done(away, small_path, pursuit)


# ---------------------------------------------------------------------------
# Demonstrations


def _demo(small_stalks, small_path, robot, rays5, pursuit, seed=3, perturb=None):
    init = nominal_start_pose(small_stalks, 0)
    return generate_demo(
        small_stalks, small_path, init, robot, rays5, 2, pursuit, perturb, seed, 0
    )


def test_nominal_demo_reaches_target_lane(small_stalks, small_path, robot, rays5, pursuit):
    demo = _demo(small_stalks, small_path, robot, rays5, pursuit)
    final = demo.steps[-1].state
    assert abs(final.pose.y - small_stalks.lane_center_y(2)) < 0.15 * small_stalks.row_pitch
    assert abs(wrap_angle(final.pose.theta - math.pi)) < math.radians(10.0)
    assert all(s.status.ok for s in demo.steps)
    assert demo.meta.target_lane == 2 and demo.meta.source == "privileged"
    assert demo.meta.dt == robot.dt


def test_demo_actions_within_limits(small_stalks, small_path, robot, rays5, pursuit):
    demo = _demo(small_stalks, small_path, robot, rays5, pursuit)
    acts = np.array([s.action for s in demo.steps])
    assert np.abs(acts[:, 0]).max() <= robot.v_max
    assert np.abs(acts[:, 1]).max() <= robot.omega_max


def test_demo_determinism(small_stalks, small_path, robot, rays5, pursuit):
    a = _demo(small_stalks, small_path, robot, rays5, pursuit, seed=9)
    b = _demo(small_stalks, small_path, robot, rays5, pursuit, seed=9)
    assert len(a.steps) == len(b.steps)
    for sa, sb in zip(a.steps, b.steps):
        assert sa.state == sb.state and sa.action == sb.action
        np.testing.assert_array_equal(sa.obs, sb.obs)


def test_recovery_demo_saturates_then_recovers(
    small_stalks, small_path, robot, rays5, pursuit
):
    demo = _demo(
        small_stalks, small_path, robot, rays5, pursuit, seed=4, perturb=RecoverySpec()
    )
    w = np.array([s.action[1] for s in demo.steps])
    assert (np.abs(w) == robot.omega_max).sum() >= RecoverySpec().steps
    assert demo.meta.recovery
    final = demo.steps[-1].state
    assert abs(final.pose.y - small_stalks.lane_center_y(2)) < 0.15 * small_stalks.row_pitch


def test_demo_replay_is_bit_exact(small_stalks, small_path, robot, rays5, pursuit):
    demo = _demo(small_stalks, small_path, robot, rays5, pursuit, seed=12)
    states = replay_demo(demo, robot)
    assert len(states) == len(demo.steps)
    for replayed, recorded in zip(states, demo.steps):
        assert replayed == recorded.state  # exact float equality


def test_demo_rejects_colliding_start(small_stalks, small_path, robot, rays5, pursuit):
    sx, sy = small_stalks.centers[0]
    with pytest.raises(ValueError, match="collision"):
        generate_demo(
            small_stalks,
            small_path,
            Pose(float(sx), float(sy), 0.0),
            robot,
            rays5,
            2,
            pursuit,
            None,
            0,
            0,
        )


def test_demo_timeout_carries_partial(small_stalks, small_path, robot, rays5, pursuit):
    init = nominal_start_pose(small_stalks, 0)
    with pytest.raises(DemoTimeout) as exc_info:
        generate_demo(
            small_stalks, small_path, init, robot, rays5, 2, pursuit, None, 0, 0,
            timeout_s=0.3,
        )
    assert len(exc_info.value.partial.steps) == 3


def test_jittered_start_pose_bounds(small_stalks):
    jitter = DemoJitter()
    base = nominal_start_pose(small_stalks, 1)
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(50):
        p = jittered_start_pose(small_stalks, 1, rng, jitter)
        assert abs(p.x - base.x) <= jitter.longitudinal
        assert abs(p.y - base.y) <= jitter.lateral
        assert abs(wrap_angle(p.theta - base.theta)) <= jitter.heading


def test_collect_dataset_mix_and_lane_cycling(robot, rays5, pursuit):
    demos = collect_dataset(
        n=4, base_seed=100, mix=0.5, field_spec=SMALL_FIELD, robot=robot, rays=rays5,
        n_obs=2, params=pursuit,
    )
    assert [d.meta.recovery for d in demos] == [True, True, False, False]
    num_start_lanes = SMALL_FIELD.num_rows - 1 - 2
    assert [d.meta.start_lane for d in demos] == [
        (100 + i) % num_start_lanes for i in range(4)
    ]
    assert [d.meta.seed for d in demos] == [100, 101, 102, 103]
    # every demo runs on its own seeded field
    assert demos[0].meta.field_spec.seed == 100
    assert demos[1].meta.field_spec.seed == 101


def test_collect_dataset_validation(robot, rays5):
    with pytest.raises(ValueError, match="n must be"):
        collect_dataset(0, 0, 0.0, SMALL_FIELD, robot, rays5, 2)
    with pytest.raises(ValueError, match="mix"):
        collect_dataset(1, 0, 1.5, SMALL_FIELD, robot, rays5, 2)
