"""Versioned JSON containers for arenas, reconstructed maps, and traces.

Output is canonical (sorted keys, fixed separators) so identical runs
serialize to identical bytes; grids are flat row-major lists using the
-1/0/1 cell encoding.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .config import EnvConfig
from .world import Arena

FORMAT_VERSION = 1


def dumps_canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def arena_to_dict(arena: Arena) -> dict[str, Any]:
    return {
        "format": "arena",
        "version": FORMAT_VERSION,
        "rows": arena.rows,
        "cols": arena.cols,
        "cell_side": arena.cell_side,
        "obstacle_ratio": arena.obstacle_ratio,
        "grid": [int(v) for v in arena.grid.ravel()],
    }


def arena_from_dict(d: dict[str, Any]) -> Arena:
    _check(d, "arena")
    grid = np.asarray(d["grid"], dtype=np.int8).reshape(d["rows"], d["cols"])
    return Arena(
        rows=d["rows"],
        cols=d["cols"],
        cell_side=d["cell_side"],
        obstacle_ratio=d["obstacle_ratio"],
        grid=grid,
    )


def map_to_dict(recon: np.ndarray) -> dict[str, Any]:
    rows, cols = recon.shape
    return {
        "format": "reconmap",
        "version": FORMAT_VERSION,
        "rows": rows,
        "cols": cols,
        "grid": [int(v) for v in recon.ravel()],
    }


def map_from_dict(d: dict[str, Any]) -> np.ndarray:
    _check(d, "reconmap")
    return np.asarray(d["grid"], dtype=np.int8).reshape(d["rows"], d["cols"])


def save_json(path, d: dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(d))


def load_json(path) -> dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _check(d: dict[str, Any], expected: str) -> None:
    kind = d.get("format")
    if kind != expected:
        raise ValueError(f"expected a {expected!r} container, got {kind!r}")
    version = d.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported {expected} version {version!r}")


def trace_header(
    config: EnvConfig, seed: int, arena: Arena, positions, known, union_known: int
) -> dict[str, Any]:
    return {
        "format": "trace",
        "version": FORMAT_VERSION,
        "seed": seed,
        "config": config.to_dict(),
        "arena": arena_to_dict(arena),
        "spawn": [[int(r), int(c)] for r, c in positions],
        "initial_known": [int(v) for v in known],
        "initial_union_known": int(union_known),
        "steps": [],
    }


def step_record(events, positions, rewards, joint, known, union_known: int) -> dict[str, Any]:
    return {
        "actions": list(events.actions),
        "dangerous": [bool(v) for v in events.dangerous],
        "blocked": [bool(v) for v in events.blocked],
        "moved": [bool(v) for v in events.moved],
        "positions": [[int(r), int(c)] for r, c in positions],
        "sense_gain": list(events.sense_gain),
        "merge_gain": list(events.merge_gain),
        "networks": [list(net) for net in events.networks],
        "rewards": [float(v) for v in rewards],
        "joint_reward": float(joint),
        "known": [int(v) for v in known],
        "union_known": int(union_known),
    }


def trace_from_dict(d: dict[str, Any]) -> dict[str, Any]:
    _check(d, "trace")
    return d
