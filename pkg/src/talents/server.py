"""Realtime human-vs-agent game service.

One sequential tick loop per session; client I/O is decoupled from the
loop via latest-wins action buffering. The wire protocol is JSON over a
websocket (see docs/protocol.md for the bit-exact schema):

* client -> server: ``{"type": "join"|"action"|"ping", ...}``
* server -> client: ``{"type": "state"|"score"|"end", ...}``

Humans send primitives (arrows + interact); the adapter consumes partner
actions in the 27-action vocabulary, so every human tick is labeled with
the best-consistent macro: the macro whose next pathing step matches the
observed primitive, falling back to the primitive's own id on ambiguity.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket
from fastapi.websockets import WebSocketDisconnect

from . import bp
from .adapter import FixedShareAdapter, FixedShareConfig
from .env import (ACTIONS, GameState, featurize, legal_actions, load_layout,
                  reset, step)
from .env.actions import A_INTERACT, A_STAY
from .env.layout import Layout, load_builtin
from .env.state import resolve_macro
from .evalharness import artifact_hash

PROTOCOL_VERSION = 1
TICK_RATE_HZ = 10
#: Token bucket throttling the agent to roughly human speed: capacity one
#: action, one token refilled every three ticks (~3.3 non-stay actions/s).
BUCKET_CAPACITY = 1.0
REFILL_TICKS = 3
AGENT_SPECS = ("talents", "br-degenerate", "scripted")


class SessionError(Exception):
    """Invalid session request or protocol violation."""


# ---------------------------------------------------------------------------
# Human-action labeling


def best_consistent_macro(state: GameState, player_idx: int,
                          primitive: int) -> int:
    """27-vocabulary label for an observed human primitive.

    The label is the unique legal macro whose next step under current
    pathing is the observed primitive; zero or several candidates fall
    back to the primitive's own id.
    """
    if primitive in (A_STAY,):
        return primitive
    mask = legal_actions(state, player_idx)
    want = ("interact",) if primitive == A_INTERACT else ("move", primitive)
    candidates = []
    for action in ACTIONS[6:]:
        if not mask[action.id]:
            continue
        intent = resolve_macro(state, player_idx, action)
        if intent is None:
            continue
        if intent[:len(want)] == want or (primitive == A_INTERACT
                                          and intent[0] == "interact"):
            candidates.append(action.id)
    if len(candidates) == 1:
        return candidates[0]
    return primitive


# ---------------------------------------------------------------------------
# Agent drivers


class TokenBucket:
    """Capacity-1 bucket refilled by 1/REFILL_TICKS per tick."""

    def __init__(self, capacity: float = BUCKET_CAPACITY,
                 refill_ticks: int = REFILL_TICKS):
        self.capacity = capacity
        self.refill = 1.0 / refill_ticks
        self.tokens = capacity

    def advance(self) -> None:
        self.tokens = min(self.capacity, self.tokens + self.refill)

    def try_spend(self) -> bool:
        if self.tokens >= 1.0 - 1e-9:
            self.tokens -= 1.0
            return True
        return False


class ScriptedDriver:
    """Wraps a scripted behavior-preference policy as the agent."""

    weights = None

    def __init__(self, policy=None, seed: int = 0):
        self.policy = policy or bp.neutral_planner(seed=seed)

    def observe(self, state: GameState, human_seat: int,
                labeled_action: int) -> None:
        pass

    def act(self, state: GameState, seat: int, rng) -> int:
        return int(self.policy.act(state, seat))

    def config_hash(self, layout_name: str) -> str:
        return artifact_hash(layout_name,
                             extra=f"scripted:{self.policy.name}")


class TalentsDriver:
    """Conditioned cooperator, optionally running the full belief loop."""

    def __init__(self, policy, vae, clusters, adapt: bool = True):
        self.policy = policy
        self.vae = vae
        self.clusters = clusters
        self.adapt = adapt
        self.adapter = FixedShareAdapter(vae, clusters, FixedShareConfig())
        self.adapter_state = self.adapter.reset()
        self._pending_obs = None

    @property
    def weights(self):
        return (self.adapter_state.weights.tolist() if self.adapt
                else None)

    def observe(self, state: GameState, human_seat: int,
                labeled_action: int) -> None:
        """Belief update on the human's last action; runs every tick,
        decoupled from the acting throttle."""
        if not self.adapt:
            return
        if self._pending_obs is not None:
            self.adapter_state = self.adapter.update(
                self.adapter_state, self._pending_obs, labeled_action)
        self._pending_obs = featurize(state, human_seat, "encoder26")

    def prime(self, state: GameState, human_seat: int) -> None:
        if self.adapt:
            self._pending_obs = featurize(state, human_seat, "encoder26")

    def act(self, state: GameState, seat: int, rng) -> int:
        c_star = (int(self.adapter_state.weights.argmax())
                  if self.adapt else 0)
        obs = featurize(state, seat, "policy12")
        mask = legal_actions(state, seat)
        action, _, _ = self.policy.act(obs, c_star, mask, rng)
        return int(action)

    def config_hash(self, layout_name: str) -> str:
        return artifact_hash(
            layout_name, self.policy, self.clusters,
            self.adapter.config if self.adapt else None,
            extra="talents" if self.adapt else "br-degenerate")


def make_driver(agent: str, artifacts: dict | None, seed: int):
    if agent == "scripted":
        return ScriptedDriver(seed=seed)
    if agent in ("talents", "br-degenerate"):
        if not artifacts:
            raise SessionError(
                f"agent {agent!r} requires loaded artifacts")
        return TalentsDriver(artifacts["policy"], artifacts["vae"],
                             artifacts["clusters"],
                             adapt=agent == "talents")
    raise SessionError(f"unknown agent spec {agent!r}")


# ---------------------------------------------------------------------------
# State serialization


def snapshot(state: GameState) -> dict:
    """Full JSON-ready view of the mutable game state."""
    return {
        "players": [{"pos": list(p.pos), "facing": p.facing,
                     "held": p.held.name if p.held else None}
                    for p in state.players],
        "stations": {f"{r},{c}": {"item": s.item.name if s.item else None,
                                  "timer": s.timer}
                     for (r, c), s in sorted(state.stations.items())},
        "counters": {f"{r},{c}": item.name
                     for (r, c), item in sorted(state.counters.items())},
        "sink_dirty": {f"{r},{c}": n
                       for (r, c), n in sorted(state.sink_dirty.items())},
        "orders": [{"recipe": o.recipe, "remaining": o.remaining,
                    "deadline": o.deadline} for o in state.active_orders],
        "plate_stock": state.plate_stock,
        "score": state.score,
    }


def state_delta(previous: dict | None, current: dict) -> dict:
    """Top-level-key delta; ``previous=None`` yields the full snapshot."""
    if previous is None:
        return dict(current)
    return {key: value for key, value in current.items()
            if previous.get(key) != value}


def layout_message(layout: Layout) -> dict:
    from .env.layout import TILE_TO_CHAR

    return {
        "name": layout.name,
        "grid": ["".join(TILE_TO_CHAR[t] for t in row)
                 for row in layout.grid],
        "episode_ticks": layout.episode_ticks,
    }


# ---------------------------------------------------------------------------
# Session


@dataclass
class SessionConfig:
    layout_name: str = "open"
    agent: str = "talents"
    human_seat: int = 1
    ticks: int = 2400
    seed: int = 0


@dataclass
class TickRecord:
    tick: int
    human_primitive: int
    human_executed: int
    human_labeled: int
    agent_action: int
    reward: float


class GameSession:
    """One human, one agent, one sequential tick loop."""

    def __init__(self, config: SessionConfig, driver, log_path=None,
                 layout: Layout | None = None):
        if config.human_seat not in (0, 1):
            raise SessionError("human seat must be 0 or 1")
        self.config = config
        self.driver = driver
        self.layout = layout or load_builtin(config.layout_name)
        self.state = reset(self.layout, config.seed,
                           episode_ticks=config.ticks)
        self.rng = np.random.default_rng(config.seed)
        self.bucket = TokenBucket()
        self.pending_human: int | None = None
        self.records: list[TickRecord] = []
        self.status = "lobby"
        self.log_path = Path(log_path) if log_path else None
        self._last_snapshot: dict | None = None
        self.session_id = secrets.token_hex(8)
        self.token = secrets.token_hex(16)
        self.config_hash = driver.config_hash(config.layout_name)
        if hasattr(driver, "prime"):
            driver.prime(self.state, config.human_seat)

    @property
    def done(self) -> bool:
        return self.state.done

    def submit_human(self, action: int) -> None:
        """Latest-wins buffer of depth one; primitives only."""
        action = int(action)
        if not 0 <= action <= A_STAY:
            raise SessionError(f"human action {action} is not a primitive")
        self.pending_human = action

    def tick(self) -> tuple[dict, float]:
        """Advance one tick; returns (state message, reward)."""
        if self.done:
            raise SessionError("session already complete")
        self.status = "running"
        human_seat = self.config.human_seat
        agent_seat = 1 - human_seat
        mask = legal_actions(self.state, human_seat)
        primitive = self.pending_human
        self.pending_human = None
        if primitive is None or not mask[primitive]:
            executed = A_STAY
        else:
            executed = primitive
        labeled = best_consistent_macro(self.state, human_seat, executed)
        # Belief inference runs every tick, decoupled from the throttle.
        self.driver.observe(self.state, human_seat, labeled)
        self.bucket.advance()
        agent_action = self.driver.act(self.state, agent_seat, self.rng)
        if agent_action != A_STAY and not self.bucket.try_spend():
            agent_action = A_STAY
        actions = [0, 0]
        actions[human_seat] = executed
        actions[agent_seat] = agent_action
        self.state, _, reward = step(self.state, actions[0], actions[1])
        self.records.append(TickRecord(
            self.state.tick - 1, -1 if primitive is None else primitive,
            executed, labeled, agent_action, reward))
        current = snapshot(self.state)
        message = {
            "type": "state",
            "tick": self.state.tick,
            "delta": state_delta(self._last_snapshot, current),
        }
        if self.driver.weights is not None:
            message["weights"] = self.driver.weights
        self._last_snapshot = current
        return message, reward

    def full_state_message(self) -> dict:
        """Snapshot for (re)joining clients; resets the delta baseline."""
        current = snapshot(self.state)
        self._last_snapshot = current
        message = {"type": "state", "tick": self.state.tick, "full": True,
                   "delta": current, "layout": layout_message(self.layout)}
        if self.driver.weights is not None:
            message["weights"] = self.driver.weights
        return message

    def end(self, expired: bool = False) -> dict:
        summary = {
            "session_id": self.session_id,
            "layout": self.config.layout_name,
            "agent": self.config.agent,
            "human_seat": self.config.human_seat,
            "seed": self.config.seed,
            "ticks_played": self.state.tick,
            "ticks_planned": self.config.ticks,
            "score": self.state.score,
            "config_hash": self.config_hash,
            "complete": self.done and not expired,
        }
        self.status = "expired" if expired else "ended"
        if self.log_path is not None:
            self.write_log(summary)
        return summary

    def write_log(self, summary: dict) -> None:
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "w") as fh:
            fh.write(json.dumps({"kind": "header",
                                 "protocol": PROTOCOL_VERSION,
                                 **{k: summary[k] for k in
                                    ("session_id", "layout", "agent",
                                     "human_seat", "seed", "ticks_planned",
                                     "config_hash")}}) + "\n")
            for rec in self.records:
                fh.write(json.dumps({
                    "kind": "tick", "tick": rec.tick,
                    "human_primitive": rec.human_primitive,
                    "human_executed": rec.human_executed,
                    "human_labeled": rec.human_labeled,
                    "agent_action": rec.agent_action,
                    "reward": rec.reward}) + "\n")
            fh.write(json.dumps({"kind": "summary", **summary}) + "\n")


def replay_session(log_path) -> dict:
    """Re-run a session log through the environment.

    Returns the recorded summary plus the replayed score; the two scores
    match for any log this module wrote.
    """
    header = summary = None
    ticks = []
    with open(log_path) as fh:
        for line in fh:
            row = json.loads(line)
            if row["kind"] == "header":
                header = row
            elif row["kind"] == "tick":
                ticks.append(row)
            elif row["kind"] == "summary":
                summary = row
    if header is None or summary is None:
        raise SessionError(f"malformed session log {log_path}")
    layout = load_builtin(header["layout"])
    state = reset(layout, header["seed"],
                  episode_ticks=header["ticks_planned"])
    human_seat = header["human_seat"]
    for row in ticks:
        actions = [0, 0]
        actions[human_seat] = row["human_executed"]
        actions[1 - human_seat] = row["agent_action"]
        state, _, _ = step(state, actions[0], actions[1])
    return {"summary": summary, "replayed_score": state.score,
            "replayed_ticks": state.tick}


# ---------------------------------------------------------------------------
# FastAPI application


def build_app(artifacts: dict | None = None, log_dir="sessions",
              tick_interval: float = 1.0 / TICK_RATE_HZ,
              static_dir=None):
    """HTTP + websocket app around a session registry.

    ``artifacts`` carries {"policy", "vae", "clusters"} for the learned
    agents; without it only the scripted agent is available.
    ``tick_interval`` is wall-clock seconds per tick (10 Hz default).
    """
    import asyncio

    app = FastAPI(title="talents live server")
    app.state.sessions: dict[str, GameSession] = {}
    log_dir = Path(log_dir)

    @app.post("/sessions")
    async def create_session(request: dict):
        layout_name = request.get("layout", "open")
        agent = request.get("agent", "scripted")
        if agent not in AGENT_SPECS:
            raise HTTPException(400, f"unknown agent spec {agent!r}")
        try:
            layout = (load_layout(layout_name)
                      if layout_name.endswith(".layout")
                      else load_builtin(layout_name))
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(400, f"unknown layout: {exc}")
        config = SessionConfig(
            layout_name=layout_name, agent=agent,
            human_seat=int(request.get("human_seat", 1)),
            ticks=int(request.get("ticks", layout.episode_ticks)),
            seed=int(request.get("seed", 0)))
        try:
            driver = make_driver(agent, artifacts, config.seed)
            session = GameSession(config, driver, layout=layout)
        except SessionError as exc:
            raise HTTPException(400, str(exc))
        session.log_path = log_dir / f"{session.session_id}.jsonl"
        app.state.sessions[session.session_id] = session
        return {"session_id": session.session_id, "token": session.token,
                "protocol": PROTOCOL_VERSION,
                "config_hash": session.config_hash}

    @app.post("/sessions/{session_id}/end")
    async def end_session(session_id: str):
        session = app.state.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, "no such session")
        summary = session.end(expired=not session.done)
        del app.state.sessions[session_id]
        return summary

    @app.websocket("/ws/{session_id}")
    async def game_socket(ws: WebSocket, session_id: str):
        await ws.accept()
        session = app.state.sessions.get(session_id)
        if session is None:
            await ws.send_json({"type": "end", "error": "no such session"})
            await ws.close()
            return
        try:
            join = await ws.receive_json()
        except WebSocketDisconnect:
            return
        if (join.get("type") != "join"
                or join.get("token") != session.token
                or join.get("protocol") != PROTOCOL_VERSION):
            await ws.send_json({"type": "end",
                                "error": "bad join (token or protocol)"})
            await ws.close()
            return
        await ws.send_json(session.full_state_message())

        loop = asyncio.get_event_loop()
        recv_task = asyncio.ensure_future(ws.receive_json())
        next_tick = loop.time() + tick_interval
        try:
            while not session.done:
                timeout = max(0.0, next_tick - loop.time())
                done, _ = await asyncio.wait({recv_task}, timeout=timeout)
                if recv_task in done:
                    try:
                        message = recv_task.result()
                    except WebSocketDisconnect:
                        return          # paused; resumable via rejoin
                    if message.get("type") == "action":
                        try:
                            session.submit_human(message.get("action"))
                        except SessionError:
                            pass        # ignore malformed input
                    recv_task = asyncio.ensure_future(ws.receive_json())
                if loop.time() >= next_tick:
                    state_msg, reward = session.tick()
                    await ws.send_json(state_msg)
                    if reward != 0.0:
                        await ws.send_json({"type": "score",
                                            "tick": session.state.tick,
                                            "score":
                                            session.state.score})
                    next_tick += tick_interval
            summary = session.end()
            app.state.sessions.pop(session_id, None)
            await ws.send_json({"type": "end", "summary": summary})
            await ws.close()
        except (WebSocketDisconnect, RuntimeError):
            pass                        # client went away mid-send
        finally:
            if not recv_task.done():
                recv_task.cancel()

    assets = Path(static_dir) if static_dir else (
        Path(__file__).resolve().parents[2] / "frontend" / "dist")
    if assets.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=assets, html=True),
                  name="frontend")
    return app
