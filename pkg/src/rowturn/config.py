"""Run configuration: one dataclass tree, YAML overlay, dotted overrides,
and a content digest stamped into every artifact.

Unknown keys are rejected at any depth so a typo cannot silently fall back
to a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .training import DiffusionConfig, TrainConfig
from .world import FieldSpec, RayHead, RayScanConfig, RobotSpec


@dataclass(frozen=True)
class RayParams:
    """Config-surface view of the scanner: head geometry is fixed, the ray
    count per head and range are tunable."""

    n_rays: int = 17
    max_range: float = 3.0

    def build(self) -> RayScanConfig:
        cfg = RayScanConfig(
            heads=(
                RayHead(0.0, math.radians(30.0), self.n_rays),
                RayHead(math.pi / 2.0, math.radians(45.0), self.n_rays),
                RayHead(-math.pi / 2.0, math.radians(45.0), self.n_rays),
            ),
            max_range=self.max_range,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        self.build()


@dataclass(frozen=True)
class ObsConfig:
    n_obs: int = 2

    def validate(self) -> None:
        if self.n_obs < 1:
            raise ValueError(f"n_obs must be >= 1, got {self.n_obs}")


@dataclass(frozen=True)
class DemoParams:
    n: int = 350
    base_seed: int = 1
    recovery_mix: float = 0.2
    start_lane: int = -1  # -1: cycle feasible lanes by seed
    dither_sigma: float = 0.0  # rad/s; > 0 replaces the kick with per-tick dither

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError(f"demos.n must be >= 1, got {self.n}")
        if not 0.0 <= self.recovery_mix <= 1.0:
            raise ValueError(f"recovery_mix must be in [0, 1], got {self.recovery_mix}")
        if self.dither_sigma < 0.0:
            raise ValueError(f"dither_sigma must be >= 0, got {self.dither_sigma}")

    @property
    def lane_or_none(self) -> int | None:
        return None if self.start_lane < 0 else self.start_lane


@dataclass(frozen=True)
class EvalParams:
    seeds: tuple[int, ...] = tuple(range(1000, 1020))
    kinds: tuple[str, ...] = ("end_of_row", "before_end", "lateral_offset", "heading_offset")
    exec_horizon: int = 8
    max_steps: int = 600
    sample_seed: int = 7

    def validate(self) -> None:
        if not self.seeds:
            raise ValueError("eval.seeds must be non-empty")
        if self.exec_horizon < 1:
            raise ValueError(f"exec_horizon must be >= 1, got {self.exec_horizon}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass(frozen=True)
class TeleopParams:
    host: str = "127.0.0.1"
    port: int = 8765
    tick_hz: int = 20
    scenario_seed: int = 0
    start_lane: int = 1
    static_dir: str = ""

    def validate(self) -> None:
        if self.tick_hz < 1:
            raise ValueError(f"tick_hz must be >= 1, got {self.tick_hz}")
        if not 0 < self.port < 65536:
            raise ValueError(f"port must be in (0, 65536), got {self.port}")


@dataclass(frozen=True)
class RunConfig:
    # "field" the config section shadows dataclasses.field in this body,
    # hence the module-qualified factory calls
    field: FieldSpec = dataclasses.field(default_factory=FieldSpec)
    robot: RobotSpec = dataclasses.field(default_factory=RobotSpec)
    rays: RayParams = dataclasses.field(default_factory=RayParams)
    obs: ObsConfig = dataclasses.field(default_factory=ObsConfig)
    demos: DemoParams = dataclasses.field(default_factory=DemoParams)
    diffusion: DiffusionConfig = dataclasses.field(default_factory=DiffusionConfig)
    training: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    eval: EvalParams = dataclasses.field(default_factory=EvalParams)
    teleop: TeleopParams = dataclasses.field(default_factory=TeleopParams)

    def validate(self) -> None:
        for f in fields(self):
            getattr(self, f.name).validate()

    def to_dict(self) -> dict:
        def conv(obj):
            if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
                return {f.name: conv(getattr(obj, f.name)) for f in fields(obj)}
            if isinstance(obj, tuple):
                return [conv(v) for v in obj]
            return obj

        return conv(self)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


_TUPLE_FIELDS = {"hidden", "seeds", "kinds"}


def _build_section(cls, data: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown config key(s) under {where}: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        if f.name in _TUPLE_FIELDS and isinstance(v, list):
            v = tuple(v)
        elif isinstance(v, int) and not isinstance(v, bool) and "float" in str(f.type):
            v = float(v)
        kwargs[f.name] = v
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ValueError(f"config root must be a mapping, got {type(data).__name__}")
    sections = {f.name: f.default_factory for f in fields(RunConfig)}
    unknown = set(data) - set(sections)
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")
    kwargs = {}
    for f in fields(RunConfig):
        sub = data.get(f.name)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ValueError(f"config section {f.name!r} must be a mapping")
        kwargs[f.name] = _build_section(f.default_factory, sub, f.name)
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Dotted key=value pairs, e.g. training.epochs=500; values parse as YAML."""
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        if len(keys) < 2:
            raise ValueError(f"override path must be dotted (section.key), got {dotted!r}")
        node = data
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ValueError(f"override path {dotted!r} crosses a non-mapping")
        node[keys[-1]] = yaml.safe_load(raw)
    return data


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config root must be a mapping")
        data = loaded
    if overrides:
        apply_overrides(data, overrides)
    return config_from_dict(data)
