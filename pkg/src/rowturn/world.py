"""Deterministic 2D cornfield world.

Procedural stalk placement, rate-limited unicycle kinematics, disc collision
checks, and ray-fan range sensing. Everything here is seeded and bit-stable:
the same spec, seed, and command sequence always reproduce the same
trajectory, which the demonstration recorder and the teleop server both rely
on.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % TWO_PI


# ---------------------------------------------------------------------------
# Specs


@dataclass(frozen=True)
class FieldSpec:
    """Procedural field parameters; rows run along +x at constant y pitch."""

    num_rows: int = 6
    row_pitch: float = 0.76
    row_length: float = 10.0
    stalk_spacing: float = 0.25
    stalk_radius: float = 0.02
    jitter_sigma: float = 0.02
    missing_prob: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        if self.num_rows < 3:
            raise ValueError(f"num_rows must be >= 3, got {self.num_rows}")
        if not self.row_pitch > 2 * self.stalk_radius:
            raise ValueError(
                f"row_pitch must exceed 2*stalk_radius, got row_pitch={self.row_pitch}"
            )
        if not 0.0 <= self.missing_prob < 1.0:
            raise ValueError(f"missing_prob must be in [0, 1), got {self.missing_prob}")
        for name in ("row_pitch", "row_length", "stalk_spacing", "stalk_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")


@dataclass(frozen=True)
class RobotSpec:
    """Rate-limited unicycle model of the skid-steer platform."""

    collision_radius: float = 0.15
    v_max: float = 1.0
    omega_max: float = 2.0
    accel_max: float = 2.0
    alpha_max: float = 8.0
    dt: float = 0.1

    def validate(self) -> None:
        for name in ("collision_radius", "v_max", "omega_max", "accel_max", "alpha_max", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.dt > 0.5:
            raise ValueError(f"dt must be in (0, 0.5], got {self.dt}")


@dataclass(frozen=True)
class RayHead:
    """One sensing head: a fan of rays about a body-frame mount angle."""

    mount_angle: float
    fan_halfwidth: float
    n_rays: int = 17


@dataclass(frozen=True)
class RayScanConfig:
    heads: tuple[RayHead, ...] = (
        RayHead(0.0, math.radians(30.0)),
        RayHead(math.pi / 2.0, math.radians(45.0)),
        RayHead(-math.pi / 2.0, math.radians(45.0)),
    )
    max_range: float = 3.0

    def validate(self) -> None:
        if len(self.heads) != 3:
            raise ValueError(f"heads must have 3 entries, got {len(self.heads)}")
        for h in self.heads:
            if h.n_rays < 3:
                raise ValueError(f"n_rays must be >= 3 per head, got {h.n_rays}")
        if not self.max_range > 0:
            raise ValueError(f"max_range must be > 0, got {self.max_range}")

    @property
    def total_rays(self) -> int:
        return sum(h.n_rays for h in self.heads)

    def body_angles(self) -> np.ndarray:
        """Ray directions in the robot frame, head-major, offset ascending."""
        out = []
        for h in self.heads:
            out.append(h.mount_angle + np.linspace(-h.fan_halfwidth, h.fan_halfwidth, h.n_rays))
        return np.concatenate(out)


# ---------------------------------------------------------------------------
# State


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class RobotState:
    pose: Pose
    v: float = 0.0
    omega: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.pose.x, self.pose.y, self.pose.theta, self.v, self.omega)


class StatusKind(Enum):
    OK = "ok"
    COLLIDED = "collided"
    OUT_OF_BOUNDS = "out_of_bounds"


@dataclass(frozen=True)
class SimStatus:
    kind: StatusKind
    stalk: int | None = None

    @property
    def ok(self) -> bool:
        return self.kind is StatusKind.OK

    def encode(self) -> str:
        if self.kind is StatusKind.COLLIDED:
            return f"collided:{self.stalk}"
        return self.kind.value

    @staticmethod
    def decode(text: str) -> "SimStatus":
        if text.startswith("collided"):
            _, _, idx = text.partition(":")
            return SimStatus(StatusKind.COLLIDED, int(idx) if idx else None)
        if text == "out_of_bounds":
            return SimStatus(StatusKind.OUT_OF_BOUNDS)
        if text == "ok":
            return SimStatus(StatusKind.OK)
        raise ValueError(f"unknown status encoding: {text!r}")


OK_STATUS = SimStatus(StatusKind.OK)


# ---------------------------------------------------------------------------
# Stalk map

GRID_CELL = 0.5  # spatial-hash cell size, meters


@dataclass
class StalkMap:
    """Immutable-after-generation world geometry with a grid spatial index."""

    centers: np.ndarray  # (N, 2)
    radii: np.ndarray  # (N,)
    row_index: np.ndarray  # (N,) int
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    spec: FieldSpec
    _grid: dict[tuple[int, int], list[int]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self._grid:
            for i in range(len(self.centers)):
                cx, cy = self.centers[i]
                r = self.radii[i]
                for key in _cells_overlapping_disc(cx, cy, r):
                    self._grid.setdefault(key, []).append(i)

    def __len__(self) -> int:
        return len(self.centers)

    def query_disc(self, cx: float, cy: float, radius: float) -> np.ndarray:
        """Indices of stalks whose discs intersect the queried disc."""
        cand: set[int] = set()
        for key in _cells_overlapping_disc(cx, cy, radius):
            cand.update(self._grid.get(key, ()))
        if not cand:
            return np.empty(0, dtype=np.intp)
        idx = np.fromiter(sorted(cand), dtype=np.intp)
        d = np.hypot(self.centers[idx, 0] - cx, self.centers[idx, 1] - cy)
        return idx[d < radius + self.radii[idx]]

    @property
    def row_pitch(self) -> float:
        return self.spec.row_pitch

    @property
    def row_length(self) -> float:
        return self.spec.row_length

    @property
    def num_lanes(self) -> int:
        return self.spec.num_rows - 1

    def lane_center_y(self, lane: int) -> float:
        if not 0 <= lane < self.num_lanes:
            raise ValueError(f"lane {lane} out of range [0, {self.num_lanes})")
        return (lane + 0.5) * self.spec.row_pitch


def _cells_overlapping_disc(cx: float, cy: float, r: float):
    ix0 = math.floor((cx - r) / GRID_CELL)
    ix1 = math.floor((cx + r) / GRID_CELL)
    iy0 = math.floor((cy - r) / GRID_CELL)
    iy1 = math.floor((cy + r) / GRID_CELL)
    for ix in range(ix0, ix1 + 1):
        for iy in range(iy0, iy1 + 1):
            yield (ix, iy)


def generate_field(spec: FieldSpec) -> StalkMap:
    """Place jittered stalk rows, fully determined by spec.seed.

    Draw order is row-major over nominal positions: one uniform for the
    drop decision, then (only if kept) two normals for the jitter, clamped
    to +/- 2 sigma so stalks never leave their nominal lane.
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n_per_row = int(math.floor(spec.row_length / spec.stalk_spacing + 1e-9)) + 1
    lim = 2.0 * spec.jitter_sigma

    centers: list[tuple[float, float]] = []
    rows: list[int] = []
    for i in range(spec.num_rows):
        y0 = i * spec.row_pitch
        for j in range(n_per_row):
            if rng.random() < spec.missing_prob:
                continue
            x0 = j * spec.stalk_spacing
            dx = min(max(rng.normal(0.0, spec.jitter_sigma), -lim), lim) if spec.jitter_sigma > 0 else 0.0
            dy = min(max(rng.normal(0.0, spec.jitter_sigma), -lim), lim) if spec.jitter_sigma > 0 else 0.0
            centers.append((x0 + dx, y0 + dy))
            rows.append(i)

    margin = lim + spec.stalk_radius
    bounds = (
        -margin,
        -margin,
        spec.row_length + margin,
        (spec.num_rows - 1) * spec.row_pitch + margin,
    )
    c = np.array(centers, dtype=np.float64).reshape(-1, 2)
    return StalkMap(
        centers=c,
        radii=np.full(len(c), spec.stalk_radius, dtype=np.float64),
        row_index=np.array(rows, dtype=np.intp),
        bounds=bounds,
        spec=spec,
    )


# ---------------------------------------------------------------------------
# Dynamics


def step_dynamics(state: RobotState, cmd: tuple[float, float], spec: RobotSpec) -> RobotState:
    """One Euler step of the rate-limited unicycle.

    Commands are clamped to velocity limits, realized velocities chase them
    under acceleration limits, and the pose integrates with the updated
    velocities.
    """
    v_cmd, w_cmd = float(cmd[0]), float(cmd[1])
    if not (math.isfinite(v_cmd) and math.isfinite(w_cmd)):
        raise ValueError(f"non-finite command ({v_cmd}, {w_cmd})")

    dt = spec.dt
    v_tgt = min(max(v_cmd, -spec.v_max), spec.v_max)
    w_tgt = min(max(w_cmd, -spec.omega_max), spec.omega_max)
    dv = min(max(v_tgt - state.v, -spec.accel_max * dt), spec.accel_max * dt)
    dw = min(max(w_tgt - state.omega, -spec.alpha_max * dt), spec.alpha_max * dt)
    v = state.v + dv
    w = state.omega + dw

    p = state.pose
    x = p.x + v * math.cos(p.theta) * dt
    y = p.y + v * math.sin(p.theta) * dt
    theta = wrap_angle(p.theta + w * dt)
    return RobotState(Pose(x, y, theta), v, w)


# ---------------------------------------------------------------------------
# Perception


def cast_rays(stalks: StalkMap, pose: Pose, cfg: RayScanConfig) -> np.ndarray:
    """Normalized hit distances for every ray, head-major; 1.0 means no hit.

    Each ray originates at the robot center; the nearest non-negative
    ray/disc intersection within max_range sets the entry, divided by
    max_range.
    """
    angles = pose.theta + cfg.body_angles()
    n = len(angles)
    cand = stalks.query_disc(pose.x, pose.y, cfg.max_range + float(stalks.radii.max(initial=0.0)))
    if len(cand) == 0:
        return np.ones(n, dtype=np.float64)

    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (R, 2)
    rel = stalks.centers[cand] - np.array([pose.x, pose.y])  # (M, 2)
    b = dirs @ rel.T  # (R, M)
    c = np.einsum("md,md->m", rel, rel) - stalks.radii[cand] ** 2  # (M,)
    disc = b * b - c[None, :]
    valid = disc >= 0.0
    sq = np.sqrt(np.where(valid, disc, 0.0))
    t_near = b - sq
    t_far = b + sq
    t = np.where(t_near >= 0.0, t_near, np.where(t_far >= 0.0, t_far, np.inf))
    t[~valid] = np.inf
    tmin = t.min(axis=1)
    return np.minimum(tmin, cfg.max_range) / cfg.max_range


def check_collision(stalks: StalkMap, pose: Pose, spec: RobotSpec) -> SimStatus:
    """Disc-overlap collision test; collision wins over out-of-bounds.

    The violating stalk reported is the one with the nearest center. The
    out-of-bounds margin is 2 m beyond the field bounds, so the headland
    turn area stays legal.
    """
    # query_disc already applies the strict overlap test d < cr + stalk_radius
    cand = stalks.query_disc(pose.x, pose.y, spec.collision_radius)
    if len(cand) > 0:
        d = np.hypot(stalks.centers[cand, 0] - pose.x, stalks.centers[cand, 1] - pose.y)
        return SimStatus(StatusKind.COLLIDED, int(cand[int(np.argmin(d))]))
    xmin, ymin, xmax, ymax = stalks.bounds
    if not (xmin - 2.0 <= pose.x <= xmax + 2.0 and ymin - 2.0 <= pose.y <= ymax + 2.0):
        return SimStatus(StatusKind.OUT_OF_BOUNDS)
    return OK_STATUS


# ---------------------------------------------------------------------------
# Observations


def assemble_observation(
    frames: list[tuple[np.ndarray, float, float]],
    n_obs: int,
    v_max: float,
    omega_max: float,
) -> np.ndarray:
    """Stack n_obs frames of (scan, v, omega) into one flat vector.

    Frame-major, oldest first; each frame is the scan followed by the
    velocities scaled into [-1, 1].
    """
    if len(frames) != n_obs:
        raise ValueError(f"expected {n_obs} frames, got {len(frames)}")
    scan_dim = len(frames[0][0])
    out = np.empty(n_obs * (scan_dim + 2), dtype=np.float64)
    k = 0
    for scan, v, omega in frames:
        if len(scan) != scan_dim:
            raise ValueError("inconsistent scan dimensions across frames")
        out[k : k + scan_dim] = scan
        out[k + scan_dim] = v / v_max
        out[k + scan_dim + 1] = omega / omega_max
        k += scan_dim + 2
    return out


def observation_dim(cfg: RayScanConfig, n_obs: int) -> int:
    return n_obs * (cfg.total_rays + 2)


class World:
    """Single-stepper bundle of map, robot, sensing, and observation history.

    One World instance has exactly one mutator; independent instances may
    run in parallel. The history bootstraps by repeating the first frame.
    """

    def __init__(
        self,
        stalks: StalkMap,
        robot: RobotSpec,
        rays: RayScanConfig,
        n_obs: int,
        init: Pose,
    ) -> None:
        self.stalks = stalks
        self.robot = robot
        self.rays = rays
        self.n_obs = n_obs
        self.state = RobotState(init, 0.0, 0.0)
        self._frames: deque[tuple[np.ndarray, float, float]] = deque(maxlen=n_obs)
        self._push_frame()

    def _push_frame(self) -> None:
        scan = cast_rays(self.stalks, self.state.pose, self.rays)
        self._frames.append((scan, self.state.v, self.state.omega))

    def observe(self) -> np.ndarray:
        frames = list(self._frames)
        while len(frames) < self.n_obs:
            frames.insert(0, frames[0])
        return assemble_observation(frames, self.n_obs, self.robot.v_max, self.robot.omega_max)

    def step(self, v_cmd: float, w_cmd: float) -> tuple[RobotState, SimStatus]:
        self.state = step_dynamics(self.state, (v_cmd, w_cmd), self.robot)
        self._push_frame()
        return self.state, check_collision(self.stalks, self.state.pose, self.robot)

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.rays, self.n_obs)

    @property
    def last_scan(self) -> np.ndarray:
        return self._frames[-1][0]
