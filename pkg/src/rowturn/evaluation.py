"""Closed-loop rollout harness: scenario grids, receding-horizon execution,
success judgment, and metric aggregation.

Success means settling onto the target lane centerline (within 0.15 pitch
laterally, heading within 20 deg of the return direction pi) at least 1 m
inside the field, with no earlier collision. Collision terminates rollouts
here, unlike demo recording.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .demos import (
    DemoMeta,
    DemoStep,
    Demonstration,
    PursuitParams,
    ReferencePath,
    nominal_start_pose,
    path_done,
    plan_row_skip_path,
    pursuit_control,
)
from .diffusion import Checkpoint, reverse_sample
from .world import (
    FieldSpec,
    Pose,
    RayScanConfig,
    RobotSpec,
    RobotState,
    SimStatus,
    StalkMap,
    StatusKind,
    World,
    check_collision,
    generate_field,
    wrap_angle,
)

POSE_CLASSES = ("end_of_row", "before_end", "lateral_offset", "heading_offset")

LATERAL_TOL_FRAC = 0.15  # of row_pitch
HEADING_TOL = math.radians(20.0)
PENETRATION_MIN = 1.0  # meters inside the field along the entry direction


class Outcome(enum.Enum):
    SUCCESS = "Success"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"
    WRONG_LANE = "WrongLane"
    OUT_OF_BOUNDS = "OutOfBounds"


@dataclass(frozen=True)
class Scenario:
    seed: int
    kind: str  # one of POSE_CLASSES
    start_pose: Pose
    start_lane: int
    target_lane: int


@dataclass
class ScenarioGrid:
    scenarios: list[Scenario]
    field_spec: FieldSpec
    robot_spec: RobotSpec


def build_scenarios(
    field_spec: FieldSpec,
    robot_spec: RobotSpec,
    seeds: list[int],
    kinds: tuple[str, ...] = POSE_CLASSES,
) -> ScenarioGrid:
    """One scenario per (seed, pose class); start lanes cycle with the seed.

    Every start pose is verified collision-free on its own generated field.
    """
    for k in kinds:
        if k not in POSE_CLASSES:
            raise ValueError(f"unknown pose class {k!r}")
    scenarios = []
    for seed in seeds:
        stalks = generate_field(replace(field_spec, seed=seed))
        n_starts = stalks.num_lanes - 2
        if n_starts < 1:
            raise ValueError("field too narrow for a row-skip turn")
        lane = seed % n_starts
        base = nominal_start_pose(stalks, lane)
        sign = 1.0 if seed % 2 == 0 else -1.0
        for kind in kinds:
            if kind == "end_of_row":
                pose = base
            elif kind == "before_end":
                pose = Pose(base.x - 1.0, base.y, base.theta)
            elif kind == "lateral_offset":
                pose = Pose(base.x, base.y + sign * 0.1, base.theta)
            else:  # heading_offset
                pose = Pose(base.x, base.y, wrap_angle(base.theta + sign * math.radians(10.0)))
            status = check_collision(stalks, pose, robot_spec)
            if status.kind != StatusKind.OK:
                raise ValueError(f"seed {seed} {kind}: start pose not collision-free ({status})")
            scenarios.append(Scenario(seed, kind, pose, lane, lane + 2))
    return ScenarioGrid(scenarios, field_spec, robot_spec)


# ---------------------------------------------------------------------------
# Policies


class Policy(Protocol):
    horizon: int

    def propose(self, obs: np.ndarray, state: RobotState) -> np.ndarray:
        """Raw-unit action chunk (horizon, 2) for the current situation."""
        ...


class DiffusionPolicy:
    """Checkpoint-backed sampler: normalize obs, reverse-sample, denormalize."""

    def __init__(self, ckpt: Checkpoint, rng: np.random.Generator):
        self.den = ckpt.denoiser
        self.sched = ckpt.schedule
        self.norm = ckpt.norm
        self.rng = rng
        self.horizon = ckpt.denoiser.horizon

    def propose(self, obs: np.ndarray, state: RobotState) -> np.ndarray:
        if obs.shape != (self.den.obs_dim,):
            raise ValueError(
                f"observation dim {obs.shape} does not match checkpoint ({self.den.obs_dim},)"
            )
        chunk = reverse_sample(self.den, self.norm.normalize_obs(obs), self.sched, self.rng)
        return self.norm.denormalize_actions(chunk)


class PursuitChunkPolicy:
    """Privileged oracle: rolls the pure-pursuit controller forward H steps
    through the same deterministic dynamics, so executing a chunk prefix
    reproduces the demonstrator exactly."""

    def __init__(
        self,
        path: ReferencePath,
        robot: RobotSpec,
        horizon: int,
        params: PursuitParams | None = None,
    ):
        self.path = path
        self.robot = robot
        self.horizon = horizon
        self.params = params or PursuitParams()

    def propose(self, obs: np.ndarray, state: RobotState) -> np.ndarray:
        from .world import step_dynamics

        chunk = np.zeros((self.horizon, 2))
        cur = state
        for i in range(self.horizon):
            if path_done(cur, self.path, self.params):
                break  # hold zero commands past the path end
            v, w = pursuit_control(cur, self.path, self.params, self.robot)
            chunk[i] = (v, w)
            cur = step_dynamics(cur, (v, w), self.robot)
        return chunk


def pursuit_policy_factory(horizon: int, params: PursuitParams | None = None):
    """make_policy hook for run_grid evaluating the demonstrator itself."""

    def make(world: World, scenario: Scenario) -> PursuitChunkPolicy:
        path = plan_row_skip_path(world.stalks, scenario.start_lane)
        return PursuitChunkPolicy(path, world.robot, horizon, params)

    return make


def diffusion_policy_factory(ckpt: Checkpoint, seed: int):
    """Each scenario gets an independent, scenario-seeded sampling stream."""

    def make(world: World, scenario: Scenario) -> DiffusionPolicy:
        rng = np.random.Generator(np.random.PCG64([seed, scenario.seed]))
        return DiffusionPolicy(ckpt, rng)

    return make


# ---------------------------------------------------------------------------
# Judgment


def judge_entry(state: RobotState, stalks: StalkMap) -> int | None:
    """Lane index if the state satisfies the lane-entry condition, else None."""
    x, y, th = state.pose.x, state.pose.y, state.pose.theta
    if not (0.0 <= x <= stalks.row_length - PENETRATION_MIN):
        return None
    if abs(wrap_angle(th - math.pi)) > HEADING_TOL:
        return None
    pitch = stalks.spec.row_pitch
    lane = int(np.clip(round(y / pitch - 0.5), 0, stalks.num_lanes - 1))
    if abs(y - stalks.lane_center_y(lane)) > LATERAL_TOL_FRAC * pitch:
        return None
    return lane


def judge_success(
    states: list[RobotState],
    statuses: list[SimStatus],
    stalks: StalkMap,
    target_lane: int,
) -> Outcome:
    """First-event classification over the trajectory.

    statuses align with states[1:]; the initial state is assumed OK.
    """
    if not states:
        raise ValueError("empty trajectory")
    padded = [None] + list(statuses)
    for state, status in zip(states, padded):
        if status is not None:
            if status.kind == StatusKind.COLLIDED:
                return Outcome.COLLISION
            if status.kind == StatusKind.OUT_OF_BOUNDS:
                return Outcome.OUT_OF_BOUNDS
        lane = judge_entry(state, stalks)
        if lane is not None:
            return Outcome.SUCCESS if lane == target_lane else Outcome.WRONG_LANE
    return Outcome.TIMEOUT


# ---------------------------------------------------------------------------
# Rollout


@dataclass
class RolloutResult:
    states: list[RobotState]  # length n+1, includes the initial state
    actions: np.ndarray  # (n, 2)
    statuses: list[SimStatus]  # length n, aligned with states[1:]
    observations: list[np.ndarray]  # length n, obs seen before each step
    outcome: Outcome
    chunks: list[np.ndarray] = field(default_factory=list)

    @property
    def path_length(self) -> float:
        pts = np.array([(s.pose.x, s.pose.y) for s in self.states])
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())

    @property
    def final_state(self) -> RobotState:
        return self.states[-1]


def rollout(
    world: World,
    policy: Policy,
    target_lane: int,
    exec_horizon: int = 8,
    max_steps: int = 600,
    keep_chunks: bool = False,
) -> RolloutResult:
    """Receding-horizon execution: draw a chunk, run the first exec_horizon
    commands, replan; stop on collision, out-of-bounds, success, or budget."""
    if exec_horizon < 1 or exec_horizon > policy.horizon:
        raise ValueError(f"exec_horizon {exec_horizon} not in [1, {policy.horizon}]")
    states = [world.state]
    actions: list[tuple[float, float]] = []
    statuses: list[SimStatus] = []
    observations: list[np.ndarray] = []
    chunks: list[np.ndarray] = []
    outcome: Outcome | None = None

    lane0 = judge_entry(world.state, world.stalks)
    if lane0 is not None:
        outcome = Outcome.SUCCESS if lane0 == target_lane else Outcome.WRONG_LANE

    while outcome is None:
        chunk = policy.propose(world.observe(), world.state)
        if keep_chunks:
            chunks.append(chunk)
        for a in chunk[:exec_horizon]:
            observations.append(world.observe())
            state, status = world.step(float(a[0]), float(a[1]))
            states.append(state)
            actions.append((float(a[0]), float(a[1])))
            statuses.append(status)
            if status.kind == StatusKind.COLLIDED:
                outcome = Outcome.COLLISION
            elif status.kind == StatusKind.OUT_OF_BOUNDS:
                outcome = Outcome.OUT_OF_BOUNDS
            else:
                lane = judge_entry(state, world.stalks)
                if lane is not None:
                    outcome = Outcome.SUCCESS if lane == target_lane else Outcome.WRONG_LANE
            if outcome is None and len(actions) >= max_steps:
                outcome = Outcome.TIMEOUT
            if outcome is not None:
                break

    result = RolloutResult(
        states,
        np.array(actions).reshape(-1, 2),
        statuses,
        observations,
        outcome,
        chunks,
    )
    assert result.outcome == judge_success(states, statuses, world.stalks, target_lane)
    return result


def run_grid(
    grid: ScenarioGrid,
    make_policy: Callable[[World, Scenario], Policy],
    rays: RayScanConfig,
    n_obs: int,
    exec_horizon: int = 8,
    max_steps: int = 600,
) -> list[RolloutResult]:
    results = []
    for sc in grid.scenarios:
        stalks = generate_field(replace(grid.field_spec, seed=sc.seed))
        world = World(stalks, grid.robot_spec, rays, n_obs, sc.start_pose)
        policy = make_policy(world, sc)
        results.append(rollout(world, policy, sc.target_lane, exec_horizon, max_steps))
    return results


def result_to_demo(
    result: RolloutResult, scenario: Scenario, field_spec: FieldSpec, dt: float = 0.1
) -> Demonstration:
    """Repackage a rollout in the demonstration format for replay/plotting."""
    steps = [
        DemoStep(obs=obs, action=act, state=state, status=status)
        for obs, act, state, status in zip(
            result.observations,
            (tuple(a) for a in result.actions),
            result.states[1:],
            result.statuses,
        )
    ]
    meta = DemoMeta(
        seed=scenario.seed,
        field_spec=field_spec,
        start_pose=scenario.start_pose,
        source="policy",
        recovery=False,
        start_lane=scenario.start_lane,
        target_lane=scenario.target_lane,
        dt=dt,
    )
    return Demonstration(steps=steps, meta=meta)


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class MetricsReport:
    per_class: dict  # kind -> {"n", "success_rate", "collision_rate"}
    success_rate: float
    collision_rate: float
    cross_track_mean: float
    cross_track_max: float
    final_heading_error: float
    mean_path_length: float
    episode_count: int
    outcome_counts: dict

    def to_record(self) -> dict:
        return {
            "episode_count": self.episode_count,
            "success_rate": self.success_rate,
            "collision_rate": self.collision_rate,
            "cross_track_mean": self.cross_track_mean,
            "cross_track_max": self.cross_track_max,
            "final_heading_error": self.final_heading_error,
            "mean_path_length": self.mean_path_length,
            "outcome_counts": self.outcome_counts,
            "per_class": self.per_class,
        }

    def format_text(self) -> str:
        lines = [
            f"episodes: {self.episode_count}",
            f"success rate: {self.success_rate:.3f}",
            f"collision rate: {self.collision_rate:.3f}",
            f"cross-track error (m): mean {self.cross_track_mean:.4f}"
            f" max {self.cross_track_max:.4f}",
            f"final heading error (rad): {self.final_heading_error:.4f}",
            f"mean path length (m): {self.mean_path_length:.3f}",
            "outcomes: "
            + " ".join(f"{k}={v}" for k, v in sorted(self.outcome_counts.items())),
            "per class:",
        ]
        for kind in sorted(self.per_class):
            row = self.per_class[kind]
            lines.append(
                f"  {kind}: n={row['n']} success={row['success_rate']:.3f}"
                f" collision={row['collision_rate']:.3f}"
            )
        return "\n".join(lines) + "\n"


def compute_metrics(results: list[RolloutResult], grid: ScenarioGrid) -> MetricsReport:
    if not results:
        raise ValueError("no rollout results")
    if len(results) != len(grid.scenarios):
        raise ValueError(f"{len(results)} results for {len(grid.scenarios)} scenarios")

    per_class: dict[str, dict] = {}
    outcome_counts: dict[str, int] = {}
    ct_samples: list[float] = []
    heading_errs: list[float] = []
    path_lengths: list[float] = []

    for res, sc in zip(results, grid.scenarios):
        outcome_counts[res.outcome.value] = outcome_counts.get(res.outcome.value, 0) + 1
        row = per_class.setdefault(sc.kind, {"n": 0, "success": 0, "collision": 0})
        row["n"] += 1
        row["success"] += res.outcome == Outcome.SUCCESS
        row["collision"] += res.outcome == Outcome.COLLISION
        heading_errs.append(abs(wrap_angle(res.final_state.pose.theta - math.pi)))
        path_lengths.append(res.path_length)

        if res.outcome == Outcome.SUCCESS:
            stalks = generate_field(replace(grid.field_spec, seed=sc.seed))
            target_y = stalks.lane_center_y(sc.target_lane)
            entered = False
            for state in res.states:
                if not entered and judge_entry(state, stalks) == sc.target_lane:
                    entered = True
                if entered:
                    ct_samples.append(abs(state.pose.y - target_y))

    n = len(results)
    for kind, row in per_class.items():
        per_class[kind] = {
            "n": row["n"],
            "success_rate": row["success"] / row["n"],
            "collision_rate": row["collision"] / row["n"],
        }
    return MetricsReport(
        per_class=per_class,
        success_rate=outcome_counts.get(Outcome.SUCCESS.value, 0) / n,
        collision_rate=outcome_counts.get(Outcome.COLLISION.value, 0) / n,
        cross_track_mean=float(np.mean(ct_samples)) if ct_samples else 0.0,
        cross_track_max=float(np.max(ct_samples)) if ct_samples else 0.0,
        final_heading_error=float(np.mean(heading_errs)),
        mean_path_length=float(np.mean(path_lengths)),
        episode_count=n,
        outcome_counts=dict(sorted(outcome_counts.items())),
    )


def write_metrics(
    report: MetricsReport, json_path: str | Path, txt_path: str | Path, config_digest: str = ""
) -> None:
    from .dataio import write_metrics_record

    write_metrics_record(json_path, report.to_record(), config_digest)
    with open(txt_path, "w", encoding="utf-8") as f:
        f.write(report.format_text())
