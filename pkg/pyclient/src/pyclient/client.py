"""Session layer for the environment wire protocol.

The client holds no environment knowledge at all: it frames messages,
checks protocol versions, matches reply ids to request ids, and hands the
payloads back. Everything it knows about observations comes from the
layout descriptor the server sends.
"""

from __future__ import annotations

import json
import socket

PROTOCOL_VERSION = 1


class ProtocolError(RuntimeError):
    pass


class VersionMismatch(ProtocolError):
    def __init__(self, server_version, client_version):
        super().__init__(
            f"protocol version mismatch: server speaks {server_version}, "
            f"client speaks {client_version}"
        )
        self.server_version = server_version
        self.client_version = client_version


class ClientSession:
    """One connection, one episode at a time, synchronous request/reply."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._fh = sock.makefile("rwb")
        self._next_id = 0
        self.layout: list[tuple[str, int]] | None = None
        self.n_agents: int | None = None
        self.area: int | None = None
        self.last_reply: dict | None = None

    def close(self) -> None:
        try:
            self._send({"v": PROTOCOL_VERSION, "id": self._next_id, "type": "close",
                        "payload": {}})
        except OSError:
            pass
        self._sock.close()

    # -- plumbing -----------------------------------------------------------

    def _send(self, msg: dict) -> None:
        self._fh.write((json.dumps(msg) + "\n").encode())
        self._fh.flush()

    def request(self, msg_type: str, payload: dict) -> dict:
        msg_id = self._next_id
        self._next_id += 1  # ids strictly increase across the session
        self._send({"v": PROTOCOL_VERSION, "id": msg_id, "type": msg_type,
                    "payload": payload})
        line = self._fh.readline()
        if not line:
            raise ProtocolError("server closed the connection mid-request")
        reply = json.loads(line)
        self.last_reply = reply
        if reply.get("type") == "error" and reply.get("payload", {}).get("code") == "bad_version":
            raise VersionMismatch(_served_version(reply), PROTOCOL_VERSION)
        if reply.get("v") != PROTOCOL_VERSION:
            raise VersionMismatch(reply.get("v"), PROTOCOL_VERSION)
        if reply.get("id") != msg_id:
            raise ProtocolError(f"reply id {reply.get('id')!r} does not match request id {msg_id}")
        if reply.get("type") == "error":
            p = reply.get("payload", {})
            raise ProtocolError(f"server error {p.get('code')!r}: {p.get('detail')}")
        return reply["payload"]

    # -- protocol calls -------------------------------------------------------

    def reset(self, seed: int, config: dict | None = None) -> dict:
        payload = {"seed": seed}
        if config:
            payload["config"] = config
        reply = self.request("reset", payload)
        self.layout = [(str(name), int(size)) for name, size in reply["layout"]]
        self.n_agents = int(reply["n_agents"])
        self.area = int(reply["area"])
        return reply

    def step(self, actions: list[int]) -> dict:
        return self.request("step", {"actions": [int(a) for a in actions]})

    def segment(self, obs_row: list[float], name: str) -> list[float]:
        """Slice one named segment out of a flat observation row."""
        if self.layout is None:
            raise ProtocolError("no layout known; reset first")
        offset = 0
        for seg_name, size in self.layout:
            if seg_name == name:
                return obs_row[offset : offset + size]
            offset += size
        raise KeyError(f"segment {name!r} not in layout {self.layout}")


def _served_version(reply: dict):
    detail = reply.get("payload", {}).get("detail", "")
    for token in detail.replace(",", " ").split():
        if token.isdigit():
            return int(token)
    return None


def connect(address: str, timeout: float = 10.0) -> ClientSession:
    """Open a session to `address` ("host:port"); fails loudly when unreachable."""
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {address!r}")
    try:
        sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
    except OSError as exc:
        raise ConnectionError(f"cannot reach environment service at {address}: {exc}") from exc
    return ClientSession(sock)
