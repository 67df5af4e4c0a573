"""Realtime session endpoint: one robot, one driver, many viewers.

A single WebSocket endpoint (``/ws``) speaks JSON text messages, each
carrying ``version: 1`` and a ``type``.  The first connected client is the
controller; later clients receive telemetry but their commands are
rejected with a ``read_only`` event.  When the controller disconnects the
next new connection takes the role.

Client messages (all carry an integer ``seq``, echoed in an ``ack``):

    {"type": "load_config",     "name": "solar"}
    {"type": "start_script",    "script": "twist", "params": {...}}
    {"type": "jog",             "node": 7, "velocity": [0, 0, 0.02]}
    {"type": "set_fixed_nodes", "nodes": [0, 1, 2]}
    {"type": "pause"} | {"type": "resume"} | {"type": "abort"}

Server messages:

    {"type": "hello", ...}          role, config, topology, script list
    {"type": "ack", "seq": n}
    {"type": "state_frame", ...}    positions, d, drifts, margins, tick
    {"type": "event", "event": code, "message": str}

The simulation loop is the only writer of the robot state.  Commands are
queued and consumed once per tick; telemetry is a snapshot taken between
ticks.  Scripts are computed on a state copy in a worker thread (the loop
keeps streaming the pre-script state), then played back one frame per
tick, so every streamed frame passed the engine's own checks.  A script
abort is delivered after the last valid frame of its partial trajectory.
"""
from __future__ import annotations

import asyncio
import math
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Any

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import EngineTolerances, FeasibilityLimits
from .configurations import (
    CONFIG_NAMES,
    RobotSpec,
    build_robot,
    node_groups,
    node_masses,
)
from .kinematics import (
    MotionConstraintSet,
    Move,
    check_feasibility,
    integrate_step,
    roller_rates,
    solve_velocities,
)
from .motions import run_script, stability_margin
from .rollers import SPEED_CAP
from .scriptlib import available_scripts, build_named_script
from .trajectory import perimeter_drift

PROTOCOL_VERSION = 1


def _finite(v: float) -> float | None:
    return float(v) if math.isfinite(v) else None


@dataclass
class _Client:
    ws: WebSocket
    controller: bool


@dataclass
class Session:
    """Robot state plus the telemetry/command loop around it."""

    config_name: str = "solar"
    spec: RobotSpec = field(default_factory=RobotSpec)
    limits: FeasibilityLimits = field(default_factory=FeasibilityLimits)
    tolerances: EngineTolerances = field(default_factory=EngineTolerances)
    rate_hz: float = 20.0
    dt: float = 0.05

    def __post_init__(self):
        self.tick = 0
        self.sim_time = 0.0
        self.clients: list[_Client] = []
        self.queue: asyncio.Queue = asyncio.Queue()
        self.script_name: str | None = None
        self.playback: list = []
        self.pending: asyncio.Future | None = None
        self.paused = False
        self.generation = 0
        self._note: dict | None = None
        self._result = None
        self._load(self.config_name)

    # ----------------------------------------------------------- robot

    def _load(self, name: str) -> None:
        self.topology, self.state = build_robot(name, self.spec)
        self.config_name = name
        groups = node_groups(name)
        self.fixed = tuple(groups.get("bottom", groups.get("contacts", ())))
        self.masses = node_masses(self.topology, self.spec)

    def snapshot(self) -> dict:
        report = check_feasibility(self.state, self.topology, self.limits)
        tri = [math.inf] * self.topology.triangle_count
        for m in report.margins:
            tri[m.triangle] = min(tri[m.triangle],
                                  m.lower_margin, m.upper_margin)
        margin = stability_margin(self.state, self.masses)
        busy = self.pending is not None
        return {
            "type": "state_frame",
            "version": PROTOCOL_VERSION,
            "tick": self.tick,
            "time": round(self.sim_time, 9),
            "positions": [[round(v, 9) for v in row]
                          for row in self.state.positions().tolist()],
            "d": [round(v, 9) for v in self.state.d.tolist()],
            "drift": [round(v, 12) for v in
                      perimeter_drift(self.state, self.topology).tolist()],
            "margins": [_finite(v) for v in tri],
            "worst_edge": report.worst_edge,
            "worst_margin": _finite(report.worst_margin),
            "stability": _finite(margin),
            "fixed": list(self.fixed),
            "script": {
                "active": bool(self.playback) or busy,
                "name": self.script_name,
                "computing": busy,
                "remaining": len(self.playback),
                "paused": self.paused,
            },
        }

    def hello(self, controller: bool) -> dict:
        return {
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "role": "controller" if controller else "spectator",
            "config": self.config_name,
            "configs": list(CONFIG_NAMES),
            "scripts": available_scripts(self.config_name),
            "groups": {k: list(v)
                       for k, v in node_groups(self.config_name).items()},
            "edges": [list(e) for e in self.topology.edges],
            "virtual_edges": [[i, j, le] for i, j, le in
                              self.topology.virtual_edges],
            "node_count": self.topology.node_count,
            "perimeter": self.state.perimeter.tolist(),
            "limits": {
                "L_min": self.limits.L_min,
                "L_max": [self.limits.upper_bound(c)
                          for c in self.state.perimeter],
                "sweep_limit_deg": self.limits.sweep_limit_deg,
                "speed_cap": SPEED_CAP,
            },
            "telemetry_hz": self.rate_hz,
        }

    # -------------------------------------------------------- commands

    async def handle(self, client: _Client, msg: Any) -> None:
        if not isinstance(msg, dict) or "type" not in msg:
            await self._send(client, _event("error", "malformed message"))
            return
        seq = msg.get("seq")
        kind = msg["type"]
        if not client.controller:
            await self._ack(client, seq)
            await self._send(client, _event(
                "read_only", f"'{kind}' rejected: this session is read-only"))
            return
        await self._ack(client, seq)
        handler = getattr(self, f"_cmd_{kind}", None)
        if handler is None:
            await self._send(client, _event("error",
                                            f"unknown message type '{kind}'"))
            return
        await handler(client, msg)

    async def _cmd_jog(self, client: _Client, msg: dict) -> None:
        if self.pending is not None or self.playback:
            await self._send(client, _event("busy", "a script is running"))
            return
        try:
            node = int(msg["node"])
            vx, vy, vz = (float(v) for v in msg["velocity"])
        except (KeyError, TypeError, ValueError):
            await self._send(client, _event("error", "bad jog message"))
            return
        if not 0 <= node < self.topology.node_count:
            await self._send(client, _event("error", f"no node {node}"))
            return
        if node in self.fixed:
            await self._send(client, _event(
                "infeasible", f"node {node} is fixed; release it first"))
            return
        cs = MotionConstraintSet(moves=(Move(node, (vx, vy, vz)),),
                                 fixed_nodes=self.fixed)
        try:
            xdot, _ = solve_velocities(self.state, self.topology, cs,
                                       self.tolerances)
            ddot = roller_rates(xdot, self.state, self.topology,
                                self.tolerances)
            new, _ = integrate_step(self.state, xdot, ddot, self.dt,
                                    self.topology, self.limits,
                                    self.tolerances,
                                    fixed_nodes=self.fixed)
        except ValueError as e:
            await self._send(client, _event("infeasible", str(e)))
            return
        self.state = new
        self.sim_time += self.dt

    async def _cmd_start_script(self, client: _Client, msg: dict) -> None:
        if self.pending is not None or self.playback:
            await self._send(client, _event("busy", "a script is running"))
            return
        kind = msg.get("script")
        params = msg.get("params") or {}
        try:
            script = build_named_script(
                kind, params, config_name=self.config_name,
                topology=self.topology, state=self.state, spec=self.spec,
                limits=self.limits)
        except ValueError as e:
            await self._send(client, _event("limit", str(e)))
            return
        self.script_name = script.name
        gen = self.generation
        loop = asyncio.get_running_loop()
        state0 = self.state.copy()

        def compute():
            return run_script(script, state0, self.topology, dt=self.dt,
                              limits=self.limits, tolerances=self.tolerances,
                              masses=self.masses)

        fut = loop.run_in_executor(None, compute)
        self.pending = fut
        fut.add_done_callback(lambda f: self._adopt(f, gen))

    def _adopt(self, fut, gen: int) -> None:
        if gen != self.generation or fut is not self.pending:
            return      # aborted or superseded while computing
        self.pending = None
        try:
            result = fut.result()
        except Exception as e:  # engine bug surfaced; report, keep serving
            self._note = _event("script_aborted", f"internal error: {e}")
            self.script_name = None
            return
        self.playback = list(result.frames[1:])
        self._result = result
        if not self.playback:
            self._finish_script()

    def _finish_script(self) -> None:
        result = getattr(self, "_result", None)
        name, self.script_name = self.script_name, None
        self._result = None
        if result is None:
            return
        if result.completed:
            self._note = _event("script_done", f"'{name}' completed")
        else:
            a = result.abort
            self._note = _event(
                "script_aborted",
                f"'{name}' aborted in phase '{a.phase}' tick {a.tick}: "
                f"{a.reason}: {a.message}")

    async def _cmd_set_fixed_nodes(self, client: _Client, msg: dict) -> None:
        try:
            nodes = tuple(sorted({int(v) for v in msg["nodes"]}))
        except (KeyError, TypeError, ValueError):
            await self._send(client, _event("error", "bad node list"))
            return
        if any(not 0 <= v < self.topology.node_count for v in nodes):
            await self._send(client, _event("error", "node out of range"))
            return
        self.fixed = nodes

    async def _cmd_load_config(self, client: _Client, msg: dict) -> None:
        if self.pending is not None or self.playback:
            await self._send(client, _event("busy", "a script is running"))
            return
        name = msg.get("name")
        if name not in CONFIG_NAMES:
            await self._send(client, _event("error",
                                            f"unknown configuration '{name}'"))
            return
        self.generation += 1
        self._load(name)
        self.sim_time = 0.0
        await self._send(client, self.hello(client.controller))

    async def _cmd_pause(self, client: _Client, msg: dict) -> None:
        self.paused = True

    async def _cmd_resume(self, client: _Client, msg: dict) -> None:
        self.paused = False

    async def _cmd_abort(self, client: _Client, msg: dict) -> None:
        self.generation += 1            # orphan any pending compute
        self.pending = None
        dropped = len(self.playback)
        self.playback = []
        name, self.script_name = self.script_name, None
        self._result = None
        self.paused = False
        if name:
            self._note = _event(
                "script_aborted",
                f"'{name}' stopped by operator ({dropped} frames dropped)")

    # ------------------------------------------------------------ loop

    async def run(self) -> None:
        period = 1.0 / self.rate_hz
        loop = asyncio.get_running_loop()
        deadline = loop.time()
        while True:
            await self._drain_queue()
            if self.playback and not self.paused:
                frame = self.playback.pop(0)
                self.state = frame.state
                self.sim_time += self.dt
                if not self.playback:
                    self._finish_script()
            self.tick += 1
            await self._broadcast(self.snapshot())
            note = getattr(self, "_note", None)
            if note is not None:
                self._note = None
                await self._broadcast(note)
            deadline += period
            delay = deadline - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:           # fell behind; re-anchor instead of bursting
                deadline = loop.time()
                await asyncio.sleep(0)

    async def _drain_queue(self) -> None:
        while not self.queue.empty():
            client, msg = self.queue.get_nowait()
            await self.handle(client, msg)

    # ------------------------------------------------------- transport

    async def _ack(self, client: _Client, seq) -> None:
        if seq is not None:
            await self._send(client, {"type": "ack",
                                      "version": PROTOCOL_VERSION,
                                      "seq": seq})

    async def _send(self, client: _Client, payload: dict) -> None:
        try:
            await client.ws.send_json(payload)
        except Exception:
            self._drop(client)

    async def _broadcast(self, payload: dict) -> None:
        for client in list(self.clients):
            await self._send(client, payload)

    def _drop(self, client: _Client) -> None:
        if client in self.clients:
            self.clients.remove(client)

    def attach(self, ws: WebSocket) -> _Client:
        controller = not any(c.controller for c in self.clients)
        client = _Client(ws=ws, controller=controller)
        self.clients.append(client)
        return client


def _event(code: str, message: str) -> dict:
    return {"type": "event", "version": PROTOCOL_VERSION,
            "event": code, "message": message}


def create_app(config_name: str = "solar", spec: RobotSpec | None = None,
               limits: FeasibilityLimits | None = None,
               tolerances: EngineTolerances | None = None,
               rate_hz: float = 20.0, dt: float = 0.05) -> FastAPI:
    session = Session(config_name=config_name,
                      spec=spec or RobotSpec(),
                      limits=limits or FeasibilityLimits(),
                      tolerances=tolerances or EngineTolerances(),
                      rate_hz=rate_hz, dt=dt)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(session.run())
        yield
        task.cancel()

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        client = session.attach(ws)
        await session._send(client, session.hello(client.controller))
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except ValueError:
                    await session._send(client,
                                        _event("error", "malformed message"))
                    continue
                await session.queue.put((client, msg))
        except WebSocketDisconnect:
            pass
        finally:
            session._drop(client)

    return app
