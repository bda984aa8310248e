"""Per-agent observations and reconstructed-map maintenance.

Each agent carries a ternary map (unknown / free / occupied) that grows by
sensing and by merges. The 3x3 field of view reports robots as occupied,
but the map records the static truth underneath them, so transient robots
never poison the reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FREE, OCCUPIED, UNKNOWN, metric_distance

# Field-of-view cell codes: what the sensor saw, before map fusion.
FOV_FREE = 0
FOV_STATIC = 1
FOV_AGENT = 2
FOV_OFFGRID = 3


@dataclass
class FovPatch:
    """3x3 sensor snapshot centered on the agent, row-major."""

    codes: np.ndarray  # int8, FOV_* codes

    def occupancy(self) -> np.ndarray:
        """Binary patch: 1 for anything non-traversable right now."""
        return (self.codes != FOV_FREE).astype(np.uint8)


@dataclass
class Observation:
    fov: np.ndarray    # (9,) uint8
    fpr: np.ndarray    # (24,) float64
    net: np.ndarray    # (n_agents,) uint8
    mask: np.ndarray   # (10,) uint8

    def features(self) -> np.ndarray:
        """Policy input vector: fov, fpr, net concatenated (9 + 24 + n)."""
        return np.concatenate(
            [self.fov.astype(np.float64), self.fpr, self.net.astype(np.float64)]
        )


def new_map(rows: int, cols: int) -> np.ndarray:
    return np.full((rows, cols), UNKNOWN, dtype=np.int8)


def sense_fov(arena, positions, agent: int) -> FovPatch:
    """Sense the 3x3 neighborhood of `agent`.

    Off-grid cells and cells under other robots read as occupied; the
    static/dynamic distinction is kept for map fusion.
    """
    r0, c0 = positions[agent]
    others = {tuple(positions[j]) for j in range(len(positions)) if j != agent}
    codes = np.empty((3, 3), dtype=np.int8)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            r, c = r0 + dr, c0 + dc
            if not (0 <= r < arena.rows and 0 <= c < arena.cols):
                code = FOV_OFFGRID
            elif arena.grid[r, c] == OCCUPIED:
                code = FOV_STATIC
            elif (r, c) in others:
                code = FOV_AGENT
            else:
                code = FOV_FREE
            codes[dr + 1, dc + 1] = code
    return FovPatch(codes)


def update_map(
    recon: np.ndarray, patch: FovPatch, position: tuple[int, int]
) -> tuple[np.ndarray, int]:
    """Fuse a sensed patch into a reconstructed map.

    Static obstacles are written as occupied; cells that were free or only
    carried a robot are written as free. Knowledge never regresses, so
    re-sensing known cells is a no-op. Returns the map and the number of
    cells that left the unknown state.
    """
    r0, c0 = position
    rows, cols = recon.shape
    gained = 0
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            code = patch.codes[dr + 1, dc + 1]
            if code == FOV_OFFGRID:
                continue
            r, c = r0 + dr, c0 + dc
            if not (0 <= r < rows and 0 <= c < cols):
                continue
            value = OCCUPIED if code == FOV_STATIC else FREE
            if recon[r, c] == UNKNOWN:
                recon[r, c] = value
                gained += 1
    return recon, gained


def net_vector(positions, agent: int, r_c: float, cell_side: float) -> np.ndarray:
    """Bit j set when agent j is within communication range of `agent`.

    Distances are Euclidean between cell centers; the self bit is 1.
    """
    n = len(positions)
    out = np.zeros(n, dtype=np.uint8)
    for j in range(n):
        if j == agent or metric_distance(positions[agent], positions[j], cell_side) <= r_c:
            out[j] = 1
    return out


def build_observation(state, agent: int, config) -> Observation:
    """Assemble the policy input for one agent from the current state."""
    from . import frontier, world

    patch = sense_fov(state.arena, state.positions, agent)
    fov = patch.occupancy().reshape(-1)
    _, fpr = frontier.fpr_features(state.maps[agent], state.positions[agent])
    net = net_vector(state.positions, agent, config.comm_range, state.arena.cell_side)
    mask = world.available_actions(state, agent, config.diagonal_through_free)
    return Observation(fov=fov, fpr=fpr, net=net, mask=mask)
