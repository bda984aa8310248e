"""Frontier detection, grid search, and the 24-value reachability features.

A frontier is a known-free cell with an unknown 4-neighbor. For every
reachable frontier the shortest 8-connected path over known-free cells is
planned, paths are grouped by their first move, and each direction gets
(count, mean length, length spread), normalized to [0, 1]. The result is a
fixed-length summary of where explorable space lies, independent of the
arena size.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .grid import DIRS8, FREE, UNKNOWN, neighbor_table

N_DIRS = 8


@dataclass(frozen=True)
class Path:
    cells: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return len(self.cells) - 1

    def first_move(self) -> int:
        """Direction index of the first step; undefined for zero-length paths."""
        (r0, c0), (r1, c1) = self.cells[0], self.cells[1]
        return DIRS8.index((r1 - r0, c1 - c0))


@dataclass
class FprTable:
    """Per-direction trajectory statistics, direction order N..NW."""

    count: np.ndarray  # (8,) int64
    mean: np.ndarray   # (8,) float64, steps
    std: np.ndarray    # (8,) float64, steps


def detect_frontiers(recon: np.ndarray) -> list[tuple[int, int]]:
    """All known-free cells adjacent (4-connected) to unknown space, row-major."""
    rows, cols = recon.shape
    free = recon == FREE
    unknown = recon == UNKNOWN
    near_unknown = np.zeros_like(free)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    rs, cs = np.nonzero(free & near_unknown)
    return [(int(r), int(c)) for r, c in zip(rs, cs)]


def astar(
    recon: np.ndarray, start: tuple[int, int], goal: tuple[int, int]
) -> Path | None:
    """Shortest 8-connected unit-cost path over known-free cells.

    Chebyshev heuristic; ties broken on (f, h, push order) with neighbors
    pushed in direction order N..NW, so results are deterministic. Returns
    None when the goal is not reachable through free cells.
    """
    rows, cols = recon.shape
    if recon[start] != FREE:
        raise ValueError(f"start cell {start} is not known free")
    if recon[goal] != FREE:
        return None
    if start == goal:
        return Path((start,))

    free = (recon.reshape(-1) == FREE).tolist()
    nbrs = neighbor_table(rows, cols)
    sidx = start[0] * cols + start[1]
    gidx = goal[0] * cols + goal[1]
    gr, gc = goal

    g = [-1] * (rows * cols)
    came = [-1] * (rows * cols)
    g[sidx] = 0
    h0 = max(abs(start[0] - gr), abs(start[1] - gc))
    heap = [(h0, h0, 0, sidx)]
    seq = 1
    while heap:
        f, h, _, u = heapq.heappop(heap)
        gu = g[u]
        if f - h != gu:
            continue  # superseded entry
        if u == gidx:
            cells = []
            v = u
            while v != -1:
                cells.append((v // cols, v % cols))
                v = came[v]
            cells.reverse()
            return Path(tuple(cells))
        ng = gu + 1
        for v in nbrs[u]:
            if free[v] and (g[v] == -1 or ng < g[v]):
                g[v] = ng
                came[v] = u
                hv = max(abs(v // cols - gr), abs(v % cols - gc))
                heapq.heappush(heap, (ng + hv, hv, seq, v))
                seq += 1
    return None


def fpr_features(
    recon: np.ndarray, position: tuple[int, int]
) -> tuple[FprTable, np.ndarray]:
    """Frontier reachability statistics from `position` on `recon`.

    Plans a path to every frontier, drops unreachable ones and the cell
    the agent stands on, and groups the rest by first move. The flat
    24-vector interleaves (count, mean, std) per direction, N..NW, with
    counts as shares of the total and mean/std scaled by their maxima
    (0/0 reads as 0).
    """
    if recon[position] != FREE:
        raise ValueError(f"agent cell {position} is not known free")
    lengths: list[list[int]] = [[] for _ in range(N_DIRS)]
    for cell in detect_frontiers(recon):
        if cell == position:
            continue
        path = astar(recon, position, cell)
        if path is None:
            continue
        lengths[path.first_move()].append(path.length)

    count = np.zeros(N_DIRS, dtype=np.int64)
    mean = np.zeros(N_DIRS, dtype=np.float64)
    std = np.zeros(N_DIRS, dtype=np.float64)
    for d in range(N_DIRS):
        if lengths[d]:
            arr = np.asarray(lengths[d], dtype=np.float64)
            count[d] = arr.size
            mean[d] = arr.mean()
            std[d] = arr.std()
    table = FprTable(count=count, mean=mean, std=std)

    total = int(count.sum())
    n_norm = count / total if total else np.zeros(N_DIRS)
    mu_max = mean.max()
    mu_norm = mean / mu_max if mu_max > 0 else np.zeros(N_DIRS)
    sd_max = std.max()
    sd_norm = std / sd_max if sd_max > 0 else np.zeros(N_DIRS)
    flat = np.empty(3 * N_DIRS, dtype=np.float64)
    flat[0::3] = n_norm
    flat[1::3] = mu_norm
    flat[2::3] = sd_norm
    return table, flat
