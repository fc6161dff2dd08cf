"""Server-authoritative teleoperation: fixed-tick simulation, one driver,
any number of observers, and a recorder writing the shared dataset format.

TeleopSession is pure state-machine logic (tick in, state message out) so
it unit-tests without sockets; the websocket server wraps it with a wall-
clock tick loop and also serves the static UI over plain HTTP on the same
port. Simulated time advances exactly dt = 1/tick_hz per tick regardless
of wall-clock jitter; missing driver commands repeat the last command for
at most 0.5 s, then zero. Contact is not terminal here -- crashing and
recovering is how recovery demonstrations get recorded.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import mimetypes
from dataclasses import replace
from pathlib import Path

from .config import RunConfig
from .dataio import dumps, write_demos
from .demos import DemoMeta, DemoStep, Demonstration, nominal_start_pose
from .world import World, generate_field

log = logging.getLogger(__name__)

HOLD_S = 0.5  # how long a stale command keeps repeating


def parse_scenario(text: str, default_lane: int) -> tuple[int, int]:
    """'<seed>' or '<seed>:<lane>' -> (seed, start lane)."""
    part = text.strip().split(":")
    if len(part) > 2 or not part[0]:
        raise ValueError(f"scenario must be 'seed' or 'seed:lane', got {text!r}")
    seed = int(part[0])
    lane = int(part[1]) if len(part) == 2 else default_lane
    return seed, lane


class TeleopSession:
    """Authoritative sim loop state: commands in, state snapshots out."""

    def __init__(self, cfg: RunConfig, out_dir: str | Path):
        tp = cfg.teleop
        self.tick_hz = tp.tick_hz
        self.dt = 1.0 / tp.tick_hz
        self.robot = replace(cfg.robot, dt=self.dt)
        self.rays = cfg.rays.build()
        self.n_obs = cfg.obs.n_obs
        self.base_field = cfg.field
        self.default_lane = tp.start_lane
        self.out_dir = Path(out_dir)
        self.config_digest = cfg.digest()
        self.hold_ticks = int(round(HOLD_S * tp.tick_hz))
        self._saved = 0
        self.reset(f"{tp.scenario_seed}:{tp.start_lane}")

    def reset(self, scenario: str) -> None:
        self.seed, self.lane = parse_scenario(scenario, self.default_lane)
        stalks = generate_field(replace(self.base_field, seed=self.seed))
        init = nominal_start_pose(stalks, self.lane)
        self.world = World(stalks, self.robot, self.rays, self.n_obs, init)
        self.tick_count = 0
        self.cmd = (0.0, 0.0)
        self.cmd_tick: int | None = None
        self.recording = False
        self.rec_steps: list[DemoStep] = []
        self.rec_start: tuple | None = None

    # -- messages ----------------------------------------------------------

    def apply_message(self, msg: dict) -> dict | None:
        """Handle one client message; returns a reply message or None."""
        kind = msg.get("type")
        if kind == "cmd":
            v, w = float(msg["v"]), float(msg["w"])
            if not (math.isfinite(v) and math.isfinite(w)):
                raise ValueError("non-finite command")
            int(msg["seq"])  # required by the protocol; ordering is TCP's job
            self.cmd = (v, w)
            self.cmd_tick = self.tick_count
            return None
        if kind == "record":
            return self._record(msg.get("action"))
        if kind == "reset":
            self.reset(str(msg["scenario"]))
            return None
        raise ValueError(f"unknown message type {kind!r}")

    def _record(self, action: str | None) -> dict | None:
        if action == "start":
            s = self.world.state
            self.rec_start = (s.pose, (s.v, s.omega))
            self.rec_steps = []
            self.recording = True
            return None
        if action == "stop":
            self.recording = False
            return None
        if action == "discard":
            self.recording = False
            self.rec_steps = []
            self.rec_start = None
            return None
        if action == "save":
            if not self.rec_steps:
                raise ValueError("nothing recorded; refusing to save an empty demo")
            start_pose, start_vel = self.rec_start
            demo = Demonstration(
                steps=list(self.rec_steps),
                meta=DemoMeta(
                    seed=self.seed,
                    field_spec=self.world.stalks.spec,
                    start_pose=start_pose,
                    source="teleop",
                    recovery=False,
                    start_lane=self.lane,
                    target_lane=self.lane + 2,
                    start_vel=start_vel,
                    dt=self.dt,
                ),
            )
            self.out_dir.mkdir(parents=True, exist_ok=True)
            path = self.out_dir / f"teleop_{self.seed}_{self._saved:03d}.jsonl"
            write_demos(path, [demo], self.rays.total_rays, self.n_obs, self.config_digest)
            self._saved += 1
            n = len(self.rec_steps)
            self.recording = False
            self.rec_steps = []
            self.rec_start = None
            return {"type": "saved", "path": str(path), "steps": n}
        raise ValueError(f"unknown record action {action!r}")

    # -- simulation --------------------------------------------------------

    def effective_cmd(self) -> tuple[float, float]:
        if self.cmd_tick is None or self.tick_count - self.cmd_tick > self.hold_ticks:
            return (0.0, 0.0)
        return self.cmd

    def tick(self) -> dict:
        """Advance one step of simulated time and emit the state message."""
        cmd = self.effective_cmd()
        obs = self.world.observe()
        state, status = self.world.step(*cmd)
        if self.recording:
            self.rec_steps.append(DemoStep(obs=obs, action=cmd, state=state, status=status))
        self.tick_count += 1
        return {
            "type": "state",
            "tick": self.tick_count,
            "pose": [state.pose.x, state.pose.y, state.pose.theta],
            "vel": [state.v, state.omega],
            "scan": self.world.last_scan.tolist(),
            "status": status.encode(),
            "recording": self.recording,
        }


# ---------------------------------------------------------------------------
# Transport


class TeleopServer:
    """One websocket endpoint: first connection drives, the rest watch."""

    def __init__(self, session: TeleopSession, host: str, port: int, static_dir: Path | None):
        self.session = session
        self.host = host
        self.port = port
        self.static_dir = static_dir
        self.driver = None
        self.clients: set = set()
        self.ticks_served = 0

    async def run(self, max_ticks: int | None = None) -> None:
        from websockets.asyncio.server import serve

        async with serve(
            self._handler, self.host, self.port, process_request=self._process_request
        ):
            log.info("teleop serving on ws://%s:%d", self.host, self.port)
            await self._tick_loop(max_ticks)

    async def _tick_loop(self, max_ticks: int | None) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / self.session.tick_hz
        next_t = loop.time()
        while max_ticks is None or self.ticks_served < max_ticks:
            msg = dumps(self.session.tick())
            self.ticks_served += 1
            for client in list(self.clients):
                try:
                    await client.send(msg)
                except Exception:
                    self.clients.discard(client)
            next_t += period
            await asyncio.sleep(max(0.0, next_t - loop.time()))

    async def _handler(self, connection) -> None:
        self.clients.add(connection)
        is_driver = self.driver is None
        if is_driver:
            self.driver = connection
        try:
            async for raw in connection:
                if connection is not self.driver:
                    continue  # observers watch; they never steer
                try:
                    reply = self.session.apply_message(json.loads(raw))
                except (ValueError, KeyError, TypeError) as exc:
                    log.warning("rejected message: %s", exc)
                    continue
                if reply is not None:
                    await connection.send(dumps(reply))
        finally:
            self.clients.discard(connection)
            if connection is self.driver:
                self.driver = None

    def _process_request(self, connection, request):
        """Serve the UI over plain HTTP on the websocket port."""
        if "upgrade" in request.headers.get("Connection", "").lower():
            return None
        path = request.path.split("?", 1)[0]
        if path in ("", "/"):
            path = "/index.html"
        if self.static_dir is None:
            return connection.respond(200, "teleop endpoint; no UI bundled\n")
        target = (self.static_dir / path.lstrip("/")).resolve()
        root = self.static_dir.resolve()
        if root not in target.parents and target != root or not target.is_file():
            return connection.respond(404, "not found\n")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        response = connection.respond(200, "")
        response.headers["Content-Type"] = ctype
        response.body = target.read_bytes()
        response.headers["Content-Length"] = str(len(response.body))
        return response


def serve_teleop(
    cfg: RunConfig,
    out_dir: str | Path,
    static_dir: str | Path | None = None,
    max_ticks: int | None = None,
) -> None:
    session = TeleopSession(cfg, out_dir)
    static = Path(static_dir) if static_dir else None
    server = TeleopServer(session, cfg.teleop.host, cfg.teleop.port, static)
    asyncio.run(server.run(max_ticks))
