"""Privileged demonstrator for the left row-skip turn.

Plans a geometric reference path (exit straight, two left quarter-arcs,
reversed entry straight two lanes over), tracks it with pure pursuit, and
records observation/action trajectories, optionally with seeded mid-turn
disturbances followed by recovery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .world import (
    FieldSpec,
    Pose,
    RayScanConfig,
    RobotSpec,
    RobotState,
    SimStatus,
    StalkMap,
    World,
    generate_field,
    wrap_angle,
)

WAYPOINT_STEP = 0.02  # meters between consecutive waypoints

SEG_EXIT = "exit"
SEG_TURN = "turn_arc"
SEG_ENTRY = "entry"


@dataclass
class ReferencePath:
    """Dense waypoint path with tangents, cumulative arclength, and tags."""

    points: np.ndarray  # (N, 2)
    tangents: np.ndarray  # (N,) headings
    arclength: np.ndarray  # (N,) cumulative, starts at 0
    tags: list[str]

    def __len__(self) -> int:
        return len(self.points)

    @property
    def total_length(self) -> float:
        return float(self.arclength[-1])

    def nearest_index(self, x: float, y: float) -> int:
        d2 = (self.points[:, 0] - x) ** 2 + (self.points[:, 1] - y) ** 2
        return int(np.argmin(d2))

    def point_at_arclength(self, s: float) -> tuple[float, float]:
        s = min(max(s, 0.0), self.total_length)
        i = int(np.searchsorted(self.arclength, s))
        i = min(i, len(self.points) - 1)
        return float(self.points[i, 0]), float(self.points[i, 1])


def plan_row_skip_path(
    stalks: StalkMap,
    start_lane: int,
    exit_back: float = 3.0,
    headland: float = 1.0,
    entry_len: float = 3.0,
) -> ReferencePath:
    """Left row-skip reference: lane k out along +x, U-turn, lane k+2 back.

    The headland point sits `headland` meters past the last stalk; the turn
    is two left quarter-arcs of radius row_pitch, displacing the path two
    lane pitches upward with heading reversed.
    """
    if not (0 <= start_lane and start_lane + 2 < stalks.num_lanes):
        raise ValueError(
            f"start_lane {start_lane} invalid: need lanes {start_lane} and "
            f"{start_lane + 2} within [0, {stalks.num_lanes})"
        )

    pitch = stalks.row_pitch
    y0 = stalks.lane_center_y(start_lane)
    x_h = stalks.row_length + headland
    x_start = x_h - exit_back

    pts: list[tuple[float, float]] = []
    tans: list[float] = []
    tags: list[str] = []

    n_exit = max(2, int(math.ceil(exit_back / WAYPOINT_STEP)) + 1)
    for x in np.linspace(x_start, x_h, n_exit):
        pts.append((float(x), y0))
        tans.append(0.0)
        tags.append(SEG_EXIT)

    # Two left quarter-arcs of radius pitch sharing the center (x_h, y0 + pitch):
    # together a semicircle sweeping the heading 0 -> pi and displacing 2*pitch.
    n_arc = max(3, int(math.ceil(math.pi * pitch / WAYPOINT_STEP)) + 1)
    for phi in np.linspace(0.0, math.pi, n_arc)[1:]:
        pts.append((x_h + pitch * math.sin(phi), y0 + pitch * (1.0 - math.cos(phi))))
        tans.append(wrap_angle(float(phi)))
        tags.append(SEG_TURN)

    y2 = y0 + 2.0 * pitch
    n_entry = max(2, int(math.ceil(entry_len / WAYPOINT_STEP)) + 1)
    for x in np.linspace(x_h, x_h - entry_len, n_entry)[1:]:
        pts.append((float(x), y2))
        tans.append(math.pi)
        tags.append(SEG_ENTRY)

    points = np.array(pts, dtype=np.float64)
    seg = np.hypot(np.diff(points[:, 0]), np.diff(points[:, 1]))
    arclength = np.concatenate([[0.0], np.cumsum(seg)])
    return ReferencePath(points, np.array(tans), arclength, tags)


# ---------------------------------------------------------------------------
# Pure pursuit


@dataclass(frozen=True)
class PursuitParams:
    lookahead: float = 0.5
    v_ref: float = 0.6
    done_radius: float = 0.1


def pursuit_control(
    state: RobotState, path: ReferencePath, params: PursuitParams, robot: RobotSpec
) -> tuple[float, float]:
    """Pure-pursuit command toward the lookahead point on the path.

    omega = 2 v_ref sin(alpha) / lookahead for bearing alpha to the target
    in the robot frame; linear speed backs off with cos(alpha), floored at
    0.3 of v_ref. Both commands are clamped to robot limits.
    """
    if len(path) == 0:
        raise ValueError("empty reference path")
    p = state.pose
    i_near = path.nearest_index(p.x, p.y)
    tx, ty = path.point_at_arclength(float(path.arclength[i_near]) + params.lookahead)
    alpha = wrap_angle(math.atan2(ty - p.y, tx - p.x) - p.theta)
    omega = 2.0 * params.v_ref * math.sin(alpha) / params.lookahead
    v = params.v_ref * max(0.3, math.cos(alpha))
    v = min(max(v, -robot.v_max), robot.v_max)
    omega = min(max(omega, -robot.omega_max), robot.omega_max)
    return v, omega


def path_done(state: RobotState, path: ReferencePath, params: PursuitParams) -> bool:
    ex = path.points[-1, 0] - state.pose.x
    ey = path.points[-1, 1] - state.pose.y
    return math.hypot(ex, ey) <= params.done_radius


# ---------------------------------------------------------------------------
# Demonstrations


@dataclass(frozen=True)
class RecoverySpec:
    """Seeded command disturbance with scripted recovery.

    Two disturbance profiles:

    - kick (``dither_sigma == 0``): a burst of saturated angular velocity for
      ``steps`` ticks, a seeded delay after the turn begins. Covers large
      off-nominal excursions and the recovery from them.
    - dither (``dither_sigma > 0``): zero-mean angular-velocity noise added to
      every command, continuously corrected by the controller on the next
      tick. This breaks the correlation between the recent command history
      and the future plan that otherwise lets a learned policy copy its own
      execution noise forward instead of steering back to the row pattern.
    """

    steps: int = 5
    delay_max: int = 15  # ticks after entering the turn before a kick
    dither_sigma: float = 0.0  # rad/s; > 0 selects the dither profile


@dataclass
class DemoStep:
    obs: np.ndarray
    action: tuple[float, float]
    state: RobotState
    status: SimStatus


@dataclass
class DemoMeta:
    seed: int
    field_spec: FieldSpec
    start_pose: Pose
    source: str  # "privileged" | "teleop" | "policy"
    recovery: bool
    start_lane: int
    target_lane: int
    # teleop recordings may begin mid-motion and at a different tick rate;
    # replay needs both to re-simulate bit-exactly
    start_vel: tuple[float, float] = (0.0, 0.0)
    dt: float = 0.1


@dataclass
class Demonstration:
    steps: list[DemoStep]
    meta: DemoMeta


class DemoTimeout(RuntimeError):
    """Tracking did not finish in time; carries the partial trajectory."""

    def __init__(self, message: str, partial: Demonstration):
        super().__init__(message)
        self.partial = partial


def generate_demo(
    stalks: StalkMap,
    path: ReferencePath,
    init: Pose,
    robot: RobotSpec,
    rays: RayScanConfig,
    n_obs: int,
    params: PursuitParams,
    perturb: RecoverySpec | None,
    seed: int,
    start_lane: int,
    timeout_s: float = 60.0,
) -> Demonstration:
    """Closed-loop pursuit rollout, recorded step by step.

    Contact is not terminal: every step is recorded, including ones in
    collision, so recovery behavior stays in the data. When `perturb` is
    set with `dither_sigma == 0`, a seeded number of ticks after the turn
    begins the command is overridden with saturated angular velocity for
    `perturb.steps` ticks, after which the controller resumes. With
    `dither_sigma > 0`, seeded zero-mean noise is added to every angular
    command instead, and the controller corrects on the following tick.
    """
    from .world import check_collision

    if not check_collision(stalks, init, robot).ok:
        raise ValueError(f"initial pose ({init.x:.3f}, {init.y:.3f}) is in collision")

    rng = np.random.Generator(np.random.PCG64(seed))
    override_delay = int(rng.integers(0, perturb.delay_max + 1)) if perturb else 0
    override_sign = float(rng.choice([-1.0, 1.0])) if perturb else 0.0

    world = World(stalks, robot, rays, n_obs, init)
    meta = DemoMeta(
        seed=seed,
        field_spec=stalks.spec,
        start_pose=init,
        source="privileged",
        recovery=perturb is not None,
        start_lane=start_lane,
        target_lane=start_lane + 2,
        dt=robot.dt,
    )
    steps: list[DemoStep] = []
    max_ticks = int(round(timeout_s / robot.dt))
    turn_tick: int | None = None

    for tick in range(max_ticks):
        if path_done(world.state, path, params):
            if not steps:
                raise ValueError("initial pose already at path end")
            return Demonstration(steps, meta)

        obs = world.observe()
        v_cmd, w_cmd = pursuit_control(world.state, path, params, world.robot)

        if perturb is not None:
            if perturb.dither_sigma > 0.0:
                w_cmd += float(rng.normal(0.0, perturb.dither_sigma))
                w_cmd = min(max(w_cmd, -robot.omega_max), robot.omega_max)
            else:
                if turn_tick is None:
                    i_near = path.nearest_index(world.state.pose.x, world.state.pose.y)
                    if path.tags[i_near] == SEG_TURN:
                        turn_tick = tick
                if turn_tick is not None and turn_tick + override_delay <= tick < (
                    turn_tick + override_delay + perturb.steps
                ):
                    w_cmd = override_sign * robot.omega_max

        state, status = world.step(v_cmd, w_cmd)
        steps.append(DemoStep(obs, (v_cmd, w_cmd), state, status))

    raise DemoTimeout(
        f"demonstration timed out after {timeout_s}s (seed {seed})",
        Demonstration(steps, meta),
    )


@dataclass(frozen=True)
class DemoJitter:
    longitudinal: float = 0.5
    lateral: float = 0.1
    heading: float = math.radians(10.0)


def nominal_start_pose(stalks: StalkMap, start_lane: int) -> Pose:
    """End-of-row starting pose: half a meter shy of the last stalk."""
    return Pose(stalks.row_length - 0.5, stalks.lane_center_y(start_lane), 0.0)


def jittered_start_pose(
    stalks: StalkMap, start_lane: int, rng: np.random.Generator, jitter: DemoJitter
) -> Pose:
    base = nominal_start_pose(stalks, start_lane)
    dx = rng.uniform(-jitter.longitudinal, jitter.longitudinal)
    dy = rng.uniform(-jitter.lateral, jitter.lateral)
    dth = rng.uniform(-jitter.heading, jitter.heading)
    return Pose(base.x + dx, base.y + dy, wrap_angle(base.theta + dth))


def collect_dataset(
    n: int,
    base_seed: int,
    mix: float,
    field_spec: FieldSpec,
    robot: RobotSpec,
    rays: RayScanConfig,
    n_obs: int,
    params: PursuitParams | None = None,
    start_lane: int | None = None,
    recovery: RecoverySpec | None = None,
    jitter: DemoJitter | None = None,
) -> list[Demonstration]:
    """n demonstrations over n distinct seeded fields and jittered starts.

    The first ceil(mix * n) indices carry a perturbation-and-recovery
    override; every demo gets its own field seed and start-pose draw, all
    derived from base_seed. start_lane None cycles the feasible start lanes
    by seed, matching the evaluation grid's coverage. Any generation
    failure aborts with the failing seed in the message.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must be in [0, 1], got {mix}")
    params = params or PursuitParams()
    recovery = recovery or RecoverySpec()
    jitter = jitter or DemoJitter()

    n_recovery = math.ceil(mix * n)
    demos: list[Demonstration] = []
    for i in range(n):
        seed = base_seed + i
        try:
            spec_i = replace(field_spec, seed=seed)
            stalks = generate_field(spec_i)
            lane = seed % (stalks.num_lanes - 2) if start_lane is None else start_lane
            pose_rng = np.random.Generator(np.random.PCG64(seed ^ 0x5EED))
            init = jittered_start_pose(stalks, lane, pose_rng, jitter)
            path = plan_row_skip_path(stalks, lane)
            demo = generate_demo(
                stalks,
                path,
                init,
                robot,
                rays,
                n_obs,
                params,
                recovery if i < n_recovery else None,
                seed,
                lane,
            )
        except Exception as exc:
            raise RuntimeError(f"demo generation failed for seed {seed}: {exc}") from exc
        demos.append(demo)
    return demos


def replay_demo(demo: Demonstration, robot: RobotSpec) -> list[RobotState]:
    """Re-simulate the recorded actions from the start pose.

    Returns the state after each action; bit-equality with the recorded
    states is the dataset's replay-consistency guarantee. The recording's
    own dt and initial velocities win over the passed robot's.
    """
    from .world import step_dynamics

    spec = replace(robot, dt=demo.meta.dt)
    state = RobotState(demo.meta.start_pose, *demo.meta.start_vel)
    out = []
    for step in demo.steps:
        state = step_dynamics(state, step.action, spec)
        out.append(state)
    return out
