"""Real-time WebSocket wrapper around the simulator.

One connection = one session = one sequential simulation loop.  The
network reader and the loop communicate through a latest-value mailbox
(a newer input replaces an unprocessed older one; a joystick stream is
not a command queue).  Arbitration time is measured every tick; if it
exceeds the tick budget the search budget halves and the state message
carries a downgrade flag.
"""

from __future__ import annotations

import asyncio
import http
import json
import time
from dataclasses import replace

import numpy as np
import websockets
from websockets.asyncio.server import serve as ws_serve

from . import __version__
from .interaction import InteractionParams
from .protocol import make_message, parse_message
from .simulator import EpisodeRunner, RunParams, load_scenario

INPUT_DECAY = 0.9
MIN_SEARCH_BUDGET = 64
# Wire values must be valid JSON numbers; open-world clearances are
# infinite in-process and capped on the wire.
CLEARANCE_CAP = 999.0


def _finite(value, cap=CLEARANCE_CAP):
    value = float(value)
    if value != value:
        return 0.0
    return float(min(max(value, -cap), cap))


def _dumps(message):
    return json.dumps(message, allow_nan=False)


class Session:
    """Per-connection simulation state."""

    def __init__(self, scenario, method, params, tick_ms):
        self.scenario = scenario
        self.method = method
        self.params = params
        self.tick_ms = tick_ms
        self.tick = 0
        self.last_input = np.zeros(2)
        self.fresh_input = False
        self.pending_config = {}
        self.downgraded = False
        self.runner = EpisodeRunner(scenario, method, params)

    def next_tick(self):
        self.tick += 1
        return self.tick

    def apply_pending_config(self):
        cfg = self.pending_config
        self.pending_config = {}
        if not cfg:
            return
        if "method" in cfg:
            self.method = cfg["method"]
            self.runner.method = cfg["method"]
        params = self.runner.params
        interaction = params.interaction
        if "gamma" in cfg:
            interaction = replace(interaction, gamma=float(cfg["gamma"]))
        updates = {"interaction": interaction}
        if "n_samples" in cfg:
            updates["n_samples"] = int(cfg["n_samples"])
        if "search_budget" in cfg:
            updates["search_budget"] = int(cfg["search_budget"])
        if "k_h" in cfg:
            updates["k_h"] = float(cfg["k_h"])
        self.runner.params = replace(params, **updates)
        self.params = self.runner.params

    def step_input(self):
        """Latest input, decayed when no fresh frame arrived this tick."""
        if not self.fresh_input:
            self.last_input = self.last_input * INPUT_DECAY
        self.fresh_input = False
        return self.last_input

    def hello_payload(self):
        s = self.scenario
        return {
            "version": __version__,
            "scenario": s.name,
            "method": self.method,
            "tick_ms": float(self.tick_ms),
            "dt": s.dt,
            "horizon": s.horizon,
            "v_max": s.v_max,
            "goal": list(s.robot_goal),
            "obstacles": [ob.to_dict() for ob in s.obstacles],
            "crowd_size": len(s.crowd),
        }

    def state_payload(self, step, input_echo):
        from .simulator import obstacle_clearance

        world = self.runner.world  # post-step world
        clearance = obstacle_clearance(world.robot, self.scenario.obstacles)
        for ped in world.crowd:
            clearance = min(clearance, float(np.linalg.norm(world.robot - ped)))
        operator, autonomy = self.runner.last_models[0], self.runner.last_models[1]
        return {
            "time": world.t,
            "method": self.runner.method,
            "robot": world.robot.tolist(),
            "goal": list(self.scenario.robot_goal),
            "crowd": [p.tolist() for p in world.crowd],
            "input_echo": [float(input_echo[0]), float(input_echo[1])],
            "chosen": step.report.control.trajectory.to_dict(),
            "operator_mean": step.operator_mean.to_dict(),
            "operator_modes": _mode_payload(operator),
            "autonomy_modes": _mode_payload(autonomy),
            "diagnostics": {
                k: float(v)
                for k, v in step.report.diagnostics.items()
                if v == v and np.isfinite(v)
            },
            "downgraded": self.downgraded,
            "reached_goal": self.runner.reached_goal,
            "min_clearance": _finite(clearance),
        }


def _mode_payload(belief, limit=4):
    weights = np.exp(belief.mixture.log_weights)
    order = np.argsort(-weights)[:limit]
    modes = []
    for idx in order:
        comp = belief.mixture.components[int(idx)]
        modes.append(
            {
                "weight": float(min(max(weights[int(idx)], 0.0), 1.0)),
                "points": comp.mean.reshape(-1, 2).tolist(),
            }
        )
    return modes


async def _read_frames(connection, session, send_lock):
    """Reader task: feeds the mailbox, answers malformed frames with errors."""
    async for raw in connection:
        try:
            message = parse_message(raw)
        except Exception as exc:  # malformed frame: reply, keep the session
            async with send_lock:
                await connection.send(
                    _dumps(
                        make_message(
                            "error",
                            session.next_tick(),
                            {"message": str(exc).splitlines()[0][:200], "code": "bad-message"},
                        )
                    )
                )
            continue
        if message["type"] == "input":
            vector = np.asarray(message["payload"]["vector"], dtype=float)
            norm = float(np.linalg.norm(vector))
            if norm > 1.0 + 1e-9:
                async with send_lock:
                    await connection.send(
                        _dumps(
                            make_message(
                                "error",
                                session.next_tick(),
                                {"message": "input magnitude exceeds 1", "code": "bad-input"},
                            )
                        )
                    )
                continue
            session.last_input = vector
            session.fresh_input = True
        elif message["type"] == "config":
            session.pending_config.update(message["payload"])
        else:
            async with send_lock:
                await connection.send(
                    _dumps(
                        make_message(
                            "error",
                            session.next_tick(),
                            {
                                "message": f"unexpected message type {message['type']!r}",
                                "code": "bad-type",
                            },
                        )
                    )
                )


async def _session_loop(connection, session, send_lock):
    budget_s = session.tick_ms / 1000.0
    while True:
        started = time.perf_counter()
        session.apply_pending_config()
        unit = session.step_input()
        velocity = unit * session.scenario.v_max

        arb_started = time.perf_counter()
        step = session.runner.tick(velocity)
        arb_elapsed = time.perf_counter() - arb_started
        if arb_elapsed > 0.8 * budget_s and session.runner.params.search_budget > MIN_SEARCH_BUDGET:
            shrunk = max(MIN_SEARCH_BUDGET, session.runner.params.search_budget // 2)
            session.runner.params = replace(session.runner.params, search_budget=shrunk)
            session.downgraded = True

        state = make_message("state", session.next_tick(), session.state_payload(step, unit))
        async with send_lock:
            await connection.send(_dumps(state))

        if session.runner.done:
            log, metrics = session.runner.finish()
            payload = metrics.to_dict()
            payload["min_clearance"] = _finite(payload["min_clearance"])
            async with send_lock:
                await connection.send(
                    _dumps(make_message("metrics", session.next_tick(), payload))
                )
            # Fresh episode, same session; ticks keep increasing.
            session.runner = EpisodeRunner(session.scenario, session.method, session.params)
            session.downgraded = False

        elapsed = time.perf_counter() - started
        await asyncio.sleep(max(budget_s - elapsed, 0.0))


def _make_handler(scenario_name, method, tick_ms, params):
    async def handler(connection):
        scenario = load_scenario(scenario_name)
        scenario = replace(scenario, operator_policy="interactive")
        session = Session(scenario, method, params, tick_ms)
        send_lock = asyncio.Lock()
        await connection.send(
            _dumps(make_message("hello", session.tick, session.hello_payload()))
        )
        reader = asyncio.create_task(_read_frames(connection, session, send_lock))
        loop = asyncio.create_task(_session_loop(connection, session, send_lock))
        try:
            done, pending = await asyncio.wait(
                {reader, loop}, return_when=asyncio.FIRST_COMPLETED
            )
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(
                    exc, websockets.exceptions.ConnectionClosed
                ):
                    raise exc
        finally:
            reader.cancel()
            loop.cancel()

    return handler


def _process_request(connection, request):
    if request.path != "/session":
        return connection.respond(http.HTTPStatus.NOT_FOUND, "unknown endpoint; use /session\n")
    return None


async def serve_async(port, scenario="crossing", method="psc", tick_ms=50.0, params=None, ready=None):
    """Run the service until cancelled; announces the bound port on stdout."""
    params = params if params is not None else RunParams(interaction=InteractionParams())
    handler = _make_handler(scenario, method, tick_ms, params)
    async with ws_serve(handler, "127.0.0.1", port, process_request=_process_request) as server:
        bound = server.sockets[0].getsockname()[1]
        print(f"listening on ws://127.0.0.1:{bound}/session", flush=True)
        if ready is not None:
            ready.set_result(bound)
        await asyncio.get_running_loop().create_future()


def serve(port, scenario="crossing", method="psc", tick_ms=50.0, params=None):
    """Blocking entry point; returns only on interrupt."""
    asyncio.run(serve_async(port, scenario, method, tick_ms, params))
