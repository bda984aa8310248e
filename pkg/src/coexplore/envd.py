"""Environment-as-a-service over a TCP stream.

One JSON object per newline-terminated line, in both directions. Every
message carries a protocol version `v`, a client-chosen `id` (echoed back),
a `type`, and a `payload`. Request types: `reset`, `step`, `close`. Reply
types: `reset_ok`, `step_ok`, `error`. A malformed line gets an `error`
reply and leaves the session usable; an errored `step` leaves the episode
untouched. See docs/protocol.md for byte-level examples.
"""

from __future__ import annotations

import json
import logging
import os
import socketserver
import threading

from .config import ConfigError, EnvConfig
from .episode import Episode
from .grid import N_ACTIONS
from .serialize import dumps_canonical

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


class Session:
    """Per-connection episode holder; requests are handled in arrival order."""

    def __init__(self, default_config: EnvConfig, trace_dir: str | None = None):
        self.default_config = default_config
        self.trace_dir = trace_dir
        self.episode: Episode | None = None

    # -- replies ------------------------------------------------------------

    def handle_line(self, line: str) -> dict | None:
        """Returns the reply dict, or None when the session should close."""
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error(None, "bad_message", f"not valid JSON: {exc}")
        if not isinstance(msg, dict):
            return _error(None, "bad_message", "message must be a JSON object")
        msg_id = msg.get("id")
        if msg.get("v") != PROTOCOL_VERSION:
            return _error(
                msg_id,
                "bad_version",
                f"server speaks version {PROTOCOL_VERSION}, client sent {msg.get('v')!r}",
            )
        if not isinstance(msg_id, int):
            return _error(None, "bad_message", "field 'id' must be an integer")
        msg_type = msg.get("type")
        payload = msg.get("payload", {})
        if not isinstance(payload, dict):
            return _error(msg_id, "bad_message", "field 'payload' must be an object")
        if msg_type == "reset":
            return self._reset(msg_id, payload)
        if msg_type == "step":
            return self._step(msg_id, payload)
        if msg_type == "close":
            return None
        return _error(msg_id, "bad_message", f"unknown message type {msg_type!r}")

    def _reset(self, msg_id: int, payload: dict) -> dict:
        seed = payload.get("seed", 0)
        if not isinstance(seed, int):
            return _error(msg_id, "bad_config", "seed must be an integer")
        overrides = payload.get("config", {})
        if not isinstance(overrides, dict):
            return _error(msg_id, "bad_config", "config overrides must be an object")
        try:
            config = EnvConfig.from_dict({**self.default_config.to_dict(), **overrides})
        except (ConfigError, TypeError) as exc:
            return _error(msg_id, "bad_config", str(exc))
        self.episode = Episode(config, seed)
        obs, masks = self._observation_payload()
        return _reply(
            msg_id,
            "reset_ok",
            {
                "rows": config.rows,
                "cols": config.cols,
                "area": config.area,
                "n_agents": config.n_agents,
                "horizon": config.horizon,
                "reward_case": config.reward_case,
                "layout": _layout(config.n_agents),
                "obs": obs,
                "masks": masks,
                "known": self._known(),
                "step": 0,
            },
        )

    def _step(self, msg_id: int, payload: dict) -> dict:
        ep = self.episode
        if ep is None:
            return _error(msg_id, "no_episode", "send reset before step")
        if ep.done:
            return _error(msg_id, "episode_done", "episode finished; reset to start a new one")
        actions = payload.get("actions")
        n = ep.config.n_agents
        if (
            not isinstance(actions, list)
            or len(actions) != n
            or not all(isinstance(a, int) and 0 <= a < N_ACTIONS for a in actions)
        ):
            return _error(
                msg_id,
                "bad_action",
                f"actions must be a list of {n} integers in [0, {N_ACTIONS - 1}]",
            )
        out = ep.step(actions)
        obs, masks = self._observation_payload()
        if out.done and self.trace_dir:
            self._dump_trace()
        return _reply(
            msg_id,
            "step_ok",
            {
                "obs": obs,
                "masks": masks,
                "rewards": [float(r) for r in out.rewards],
                "joint_reward": float(out.joint_reward),
                "done": out.done,
                "step": ep.t,
                "known": self._known(),
                "events": {
                    "dangerous": [bool(v) for v in out.events.dangerous],
                    "blocked": [bool(v) for v in out.events.blocked],
                    "sense_gain": list(out.events.sense_gain),
                    "merge_gain": list(out.events.merge_gain),
                    "networks": [list(net) for net in out.events.networks],
                },
            },
        )

    def _known(self) -> list[int]:
        state = self.episode.state
        return [state.known_count(i) for i in range(state.n_agents)]

    def _observation_payload(self) -> tuple[list, list]:
        obs_rows = []
        mask_rows = []
        for o in self.episode.observations():
            obs_rows.append([float(v) for v in o.features()])
            mask_rows.append([int(v) for v in o.mask])
        return obs_rows, mask_rows

    def _dump_trace(self) -> None:
        os.makedirs(self.trace_dir, exist_ok=True)
        path = os.path.join(self.trace_dir, f"trace_seed{self.episode.seed}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(self.episode.trace()))
        log.info("episode trace written to %s", path)


def _layout(n_agents: int) -> list[list]:
    return [["fov", 9], ["fpr", 24], ["net", n_agents], ["mask", 10]]


def _reply(msg_id, msg_type: str, payload: dict) -> dict:
    return {"v": PROTOCOL_VERSION, "id": msg_id, "type": msg_type, "payload": payload}


def _error(msg_id, code: str, detail: str) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "id": msg_id,
        "type": "error",
        "payload": {"code": code, "detail": detail},
    }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session(self.server.default_config, self.server.trace_dir)
        while True:
            line = self.rfile.readline()
            if not line:
                break
            line = line.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            reply = session.handle_line(line)
            if reply is None:
                break
            self.wfile.write((json.dumps(reply) + "\n").encode())


class EnvServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, default_config: EnvConfig, trace_dir: str | None = None):
        super().__init__(address, _Handler)
        self.default_config = default_config
        self.trace_dir = trace_dir


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def serve(bind_address: str, default_config: EnvConfig | None = None,
          trace_dir: str | None = None) -> None:
    """Run the service until interrupted."""
    config = default_config or EnvConfig()
    server = EnvServer(parse_address(bind_address), config, trace_dir)
    host, port = server.server_address
    print(f"environment service listening on {host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def serve_background(bind_address: str, default_config: EnvConfig | None = None,
                     trace_dir: str | None = None) -> EnvServer:
    """Start the service on a daemon thread; caller owns shutdown()."""
    server = EnvServer(parse_address(bind_address), default_config or EnvConfig(), trace_dir)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
