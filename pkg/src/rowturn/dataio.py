"""Line-delimited record files: demonstrations, stalk maps, metrics.

One schema serves every producer (privileged demonstrator, teleop recorder,
policy rollout export), so anything recorded anywhere can be replayed,
trained on, and plotted. All numbers are written as 64-bit decimal text via
Python's repr, which round-trips float64 exactly; files with fixed content
are byte-identical across runs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .demos import Demonstration, DemoMeta, DemoStep
from .world import FieldSpec, Pose, RobotState, SimStatus, StalkMap

SCHEMA_VERSION = 1

DEMO_KIND = "rowturn-demos"
STALKS_KIND = "rowturn-stalks"
METRICS_KIND = "rowturn-metrics"


def dumps(obj: Any) -> str:
    """Compact single-line JSON with deterministic key order."""
    return json.dumps(obj, separators=(",", ":"), sort_keys=False, allow_nan=False)


class SchemaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Demonstration datasets


def _field_spec_dict(spec: FieldSpec) -> dict:
    return {
        "num_rows": spec.num_rows,
        "row_pitch": spec.row_pitch,
        "row_length": spec.row_length,
        "stalk_spacing": spec.stalk_spacing,
        "stalk_radius": spec.stalk_radius,
        "jitter_sigma": spec.jitter_sigma,
        "missing_prob": spec.missing_prob,
        "seed": spec.seed,
    }


def _field_spec_from_dict(d: dict) -> FieldSpec:
    return FieldSpec(**d)


def demo_to_record(demo: Demonstration) -> dict:
    m = demo.meta
    return {
        "meta": {
            "seed": m.seed,
            "field": _field_spec_dict(m.field_spec),
            "start_pose": [m.start_pose.x, m.start_pose.y, m.start_pose.theta],
            "source": m.source,
            "recovery": m.recovery,
            "start_lane": m.start_lane,
            "target_lane": m.target_lane,
            "start_vel": [float(m.start_vel[0]), float(m.start_vel[1])],
            "dt": m.dt,
        },
        "steps": [
            {
                "obs": step.obs.tolist(),
                "act": [float(step.action[0]), float(step.action[1])],
                "state": list(step.state.as_tuple()),
                "status": step.status.encode(),
            }
            for step in demo.steps
        ],
    }


def demo_from_record(rec: dict) -> Demonstration:
    m = rec["meta"]
    meta = DemoMeta(
        seed=int(m["seed"]),
        field_spec=_field_spec_from_dict(m["field"]),
        start_pose=Pose(*(float(v) for v in m["start_pose"])),
        source=str(m["source"]),
        recovery=bool(m["recovery"]),
        start_lane=int(m["start_lane"]),
        target_lane=int(m["target_lane"]),
        start_vel=(float(m["start_vel"][0]), float(m["start_vel"][1])),
        dt=float(m["dt"]),
    )
    steps = []
    for s in rec["steps"]:
        x, y, th, v, w = (float(u) for u in s["state"])
        steps.append(
            DemoStep(
                obs=np.asarray(s["obs"], dtype=np.float64),
                action=(float(s["act"][0]), float(s["act"][1])),
                state=RobotState(Pose(x, y, th), v, w),
                status=SimStatus.decode(s["status"]),
            )
        )
    return Demonstration(steps, meta)


def write_demos(
    path: str | Path,
    demos: list[Demonstration],
    scan_dim: int,
    n_obs: int,
    config_digest: str,
) -> None:
    """Write the dataset file: one header line, then one demo per line."""
    obs_dim = n_obs * (scan_dim + 2)
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": DEMO_KIND,
        "config_digest": config_digest,
        "scan_dim": scan_dim,
        "n_obs": n_obs,
        "obs_dim": obs_dim,
        "action_dim": 2,
        "count": len(demos),
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(header) + "\n")
        for demo in demos:
            f.write(dumps(demo_to_record(demo)) + "\n")


def read_demos(path: str | Path) -> tuple[dict, list[Demonstration]]:
    """Read and validate a dataset file; returns (header, demonstrations)."""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
        if not first:
            raise SchemaError(f"{path}: empty file")
        header = json.loads(first)
        _validate_demo_header(header, path)
        demos = []
        for line_no, line in enumerate(f, start=2):
            if not line.strip():
                continue
            demo = demo_from_record(json.loads(line))
            for step in demo.steps:
                if len(step.obs) != header["obs_dim"]:
                    raise SchemaError(
                        f"{path}:{line_no}: obs dim {len(step.obs)} != header {header['obs_dim']}"
                    )
            demos.append(demo)
    if header["count"] != len(demos):
        raise SchemaError(f"{path}: header count {header['count']} != {len(demos)} records")
    return header, demos


def _validate_demo_header(header: dict, path: str | Path) -> None:
    for key in ("schema_version", "kind", "scan_dim", "n_obs", "obs_dim", "action_dim", "count"):
        if key not in header:
            raise SchemaError(f"{path}: header missing {key!r}")
    if header["kind"] != DEMO_KIND:
        raise SchemaError(f"{path}: kind {header['kind']!r}, expected {DEMO_KIND!r}")
    if header["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema_version {header['schema_version']}")
    if header["obs_dim"] != header["n_obs"] * (header["scan_dim"] + 2):
        raise SchemaError(f"{path}: inconsistent obs_dim in header")
    if header["action_dim"] != 2:
        raise SchemaError(f"{path}: action_dim must be 2")


# ---------------------------------------------------------------------------
# Stalk map export


def write_stalks(path: str | Path, stalks: StalkMap, config_digest: str) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": STALKS_KIND,
        "config_digest": config_digest,
        "field": _field_spec_dict(stalks.spec),
        "bounds": list(stalks.bounds),
        "count": len(stalks),
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(header) + "\n")
        for i in range(len(stalks)):
            f.write(
                dumps(
                    {
                        "x": float(stalks.centers[i, 0]),
                        "y": float(stalks.centers[i, 1]),
                        "r": float(stalks.radii[i]),
                        "row": int(stalks.row_index[i]),
                    }
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# Metrics records


def write_metrics_record(path: str | Path, report: dict, config_digest: str) -> None:
    rec = {
        "schema_version": SCHEMA_VERSION,
        "kind": METRICS_KIND,
        "config_digest": config_digest,
        **report,
    }
    Path(path).write_text(dumps(rec) + "\n", encoding="utf-8")
