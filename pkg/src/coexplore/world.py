"""Arena generation, initial-state sampling, and the joint transition.

All randomness is confined to `generate_arena` and `spawn_agents`; `step`
is a deterministic function of the state and the joint action, so a
recorded (seed, config, actions) triple replays bitwise identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import comms, obsmap
from .config import EnvConfig
from .grid import (
    ACTION_COMM,
    ACTION_STAY,
    DIRS8,
    FREE,
    N_ACTIONS,
    OCCUPIED,
    UNKNOWN,
    connected_free,
)

MAX_ARENA_ATTEMPTS = 10_000


class ArenaGenerationError(RuntimeError):
    pass


@dataclass
class Arena:
    rows: int
    cols: int
    cell_side: float
    obstacle_ratio: float
    grid: np.ndarray  # int8, values FREE / OCCUPIED

    @property
    def n_obstacles(self) -> int:
        return int(np.count_nonzero(self.grid == OCCUPIED))

    @property
    def area(self) -> int:
        return self.rows * self.cols

    def free_cells(self) -> list[tuple[int, int]]:
        rs, cs = np.nonzero(self.grid == FREE)
        return [(int(r), int(c)) for r, c in zip(rs, cs)]


@dataclass
class WorldState:
    arena: Arena
    positions: list[tuple[int, int]]
    maps: list[np.ndarray]          # per-agent int8 grids, UNKNOWN/FREE/OCCUPIED
    q: np.ndarray                   # (n, n) int64; q[i][j] = growth of map i since last share with j
    t: int = 0

    @property
    def n_agents(self) -> int:
        return len(self.positions)

    def known_count(self, agent: int) -> int:
        return int(np.count_nonzero(self.maps[agent] != UNKNOWN))


@dataclass
class StepEvents:
    """Per-step bookkeeping needed by the reward functions and the trace."""

    actions: tuple[int, ...]
    dangerous: tuple[bool, ...]
    blocked: tuple[bool, ...]       # lost a same-target conflict; stayed put, not penalized
    moved: tuple[bool, ...]
    sense_gain: tuple[int, ...]
    merge_gain: tuple[int, ...]
    networks: tuple[tuple[int, ...], ...]   # each network sorted, incl. singletons
    network_of: tuple[int, ...]     # index into networks, -1 if the agent did not communicate
    known_prev: tuple[int, ...]     # before this step's sensing
    known_after_sense: tuple[int, ...]
    known_final: tuple[int, ...]    # after merges
    share_q: tuple[dict[int, int], ...]  # for sharers: pre-reset q[i][j] per co-member j


def generate_arena(seed: int, config: EnvConfig) -> Arena:
    """Sample an arena whose free cells form one 8-connected component.

    Obstacle layouts are rejection-sampled; the obstacle count is exactly
    floor(obstacle_ratio * rows * cols).
    """
    config.validate()
    rows, cols = config.rows, config.cols
    n_obs = config.n_obstacles
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ARENA_ATTEMPTS):
        grid = np.full((rows, cols), FREE, dtype=np.int8)
        if n_obs:
            chosen = rng.choice(rows * cols, size=n_obs, replace=False)
            grid.ravel()[chosen] = OCCUPIED
        if connected_free(grid):
            return Arena(rows, cols, config.cell_side, config.obstacle_ratio, grid)
    raise ArenaGenerationError(
        f"no connected layout with {n_obs} obstacles on {rows}x{cols} "
        f"after {MAX_ARENA_ATTEMPTS} attempts"
    )


def spawn_agents(seed: int, arena: Arena, n_agents: int) -> WorldState:
    """Place agents on distinct free cells and give each its initial sense."""
    free = arena.free_cells()
    if len(free) < n_agents:
        raise ValueError(f"{len(free)} free cells cannot host {n_agents} agents")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(free), size=n_agents, replace=False)
    positions = [free[int(k)] for k in picks]
    maps = [np.full((arena.rows, arena.cols), UNKNOWN, dtype=np.int8) for _ in range(n_agents)]
    state = WorldState(
        arena=arena,
        positions=positions,
        maps=maps,
        q=np.zeros((n_agents, n_agents), dtype=np.int64),
        t=0,
    )
    for i in range(n_agents):
        patch = obsmap.sense_fov(arena, positions, i)
        obsmap.update_map(maps[i], patch, positions[i])
    return state


def _move_target(pos: tuple[int, int], action: int) -> tuple[int, int]:
    dr, dc = DIRS8[action]
    return pos[0] + dr, pos[1] + dc


def _resolve_moves(
    state: WorldState, actions: list[int]
) -> tuple[list[tuple[int, int]], list[bool], list[bool]]:
    """Simultaneous move resolution.

    Returns (new_positions, dangerous, blocked). Dangerous movers hit the
    boundary, a static obstacle, a robot that is not vacating its cell, or
    a mutual swap; they stay put. A mover that merely loses a same-target
    race to a lower-index agent also stays put but is only marked blocked:
    the per-agent action masks cannot foresee that collision, so it never
    counts as unsafe behaviour.
    """
    n = state.n_agents
    arena = state.arena
    cur = state.positions
    dangerous = [False] * n
    blocked = [False] * n
    target: list[tuple[int, int] | None] = [None] * n
    for i, a in enumerate(actions):
        if a < ACTION_STAY:
            target[i] = _move_target(cur[i], a)

    def alive(i: int) -> bool:
        return target[i] is not None and not dangerous[i] and not blocked[i]

    # Boundary and static obstacles.
    for i in range(n):
        if target[i] is None:
            continue
        r, c = target[i]
        if not (0 <= r < arena.rows and 0 <= c < arena.cols) or arena.grid[r, c] == OCCUPIED:
            dangerous[i] = True

    # Walking into an agent that chose to stand still.
    still = {cur[j] for j in range(n) if target[j] is None}
    for i in range(n):
        if alive(i) and target[i] in still:
            dangerous[i] = True

    # Mutual swaps.
    for i in range(n):
        for j in range(i + 1, n):
            if alive(i) and alive(j) and target[i] == cur[j] and target[j] == cur[i]:
                dangerous[i] = True
                dangerous[j] = True

    # Same-target races: the lowest index keeps the move.
    by_target: dict[tuple[int, int], list[int]] = {}
    for i in range(n):
        if alive(i):
            by_target.setdefault(target[i], []).append(i)
    for contenders in by_target.values():
        for i in contenders[1:]:
            blocked[i] = True

    # Cascade: blocked or unsafe movers now occupy their old cells, which
    # can invalidate moves that were aimed at those cells.
    changed = True
    while changed:
        changed = False
        halted = {cur[j] for j in range(n) if target[j] is not None and (dangerous[j] or blocked[j])}
        for i in range(n):
            if alive(i) and target[i] in halted:
                dangerous[i] = True
                changed = True

    new_positions = list(cur)
    for i in range(n):
        if alive(i):
            new_positions[i] = target[i]
    assert len(set(new_positions)) == n, "move resolution produced an overlap"
    return new_positions, dangerous, blocked


def step(
    state: WorldState, actions: list[int], config: EnvConfig
) -> tuple[WorldState, StepEvents]:
    """Advance one time step: resolve moves, sense, then merge maps.

    Mutates `state` in place and returns it with the step's events.
    """
    n = state.n_agents
    if len(actions) != n:
        raise ValueError(f"expected {n} actions, got {len(actions)}")
    for a in actions:
        if not 0 <= int(a) < N_ACTIONS:
            raise ValueError(f"action id {a} out of range")
    actions = [int(a) for a in actions]

    known_prev = tuple(state.known_count(i) for i in range(n))
    old_positions = list(state.positions)
    new_positions, dangerous, blocked = _resolve_moves(state, actions)
    state.positions = new_positions
    moved = tuple(new_positions[i] != old_positions[i] for i in range(n))

    sense_gain = []
    for i in range(n):
        patch = obsmap.sense_fov(state.arena, state.positions, i)
        _, gained = obsmap.update_map(state.maps[i], patch, state.positions[i])
        sense_gain.append(gained)
        if gained:
            for j in range(n):
                if j != i:
                    state.q[i, j] += gained
    known_after_sense = tuple(state.known_count(i) for i in range(n))

    communicators = [i for i in range(n) if actions[i] == ACTION_COMM]
    networks = comms.form_networks(
        state.positions, communicators, config.comm_range, state.arena.cell_side
    )
    merge_gain = [0] * n
    network_of = [-1] * n
    share_q: list[dict[int, int]] = [{} for _ in range(n)]
    for k, net in enumerate(networks):
        for i in net:
            network_of[i] = k
            share_q[i] = {j: int(state.q[i, j]) for j in net if j != i}
        gains = comms.apply_merge(state, net)
        for i, g in gains.items():
            merge_gain[i] = g
    known_final = tuple(state.known_count(i) for i in range(n))

    state.t += 1
    events = StepEvents(
        actions=tuple(actions),
        dangerous=tuple(dangerous),
        blocked=tuple(blocked),
        moved=moved,
        sense_gain=tuple(sense_gain),
        merge_gain=tuple(merge_gain),
        networks=networks,
        network_of=tuple(network_of),
        known_prev=known_prev,
        known_after_sense=known_after_sense,
        known_final=known_final,
        share_q=tuple(share_q),
    )
    return state, events


def available_actions(
    state: WorldState, agent: int, diagonal_through_free: bool = False
) -> np.ndarray:
    """10-entry availability mask for `agent` in the current state.

    A move is available when its target is on the grid, statically free,
    and not currently under another robot. With `diagonal_through_free`, a
    diagonal additionally needs one of its two bracketing cardinal cells
    to be free, mirroring a robot that corners through adjacent cells.
    Stay and communicate are always available.
    """
    arena = state.arena
    r, c = state.positions[agent]
    others = {state.positions[j] for j in range(state.n_agents) if j != agent}

    def passable(rr: int, cc: int) -> bool:
        return (
            0 <= rr < arena.rows
            and 0 <= cc < arena.cols
            and arena.grid[rr, cc] == FREE
            and (rr, cc) not in others
        )

    mask = np.zeros(N_ACTIONS, dtype=np.uint8)
    for d, (dr, dc) in enumerate(DIRS8):
        if not passable(r + dr, c + dc):
            continue
        if diagonal_through_free and dr != 0 and dc != 0:
            if not (passable(r + dr, c) or passable(r, c + dc)):
                continue
        mask[d] = 1
    mask[ACTION_STAY] = 1
    mask[ACTION_COMM] = 1
    return mask
