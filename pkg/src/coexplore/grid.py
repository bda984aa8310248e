"""Grid geometry primitives shared by the world, mapping, and planning code.

Cell coordinates are (row, col) with row 0 at the top. Grids are numpy
int8 arrays; occupancy values follow one encoding everywhere:

    UNKNOWN = -1   (reconstructed maps only)
    FREE    =  0
    OCCUPIED = 1
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

UNKNOWN = -1
FREE = 0
OCCUPIED = 1

# Move directions in fixed order N, NE, E, SE, S, SW, W, NW. Action ids
# 0..7 map onto this table; 8 = stay, 9 = communicate.
DIRS8 = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
DIR_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")
DIR_INDEX = {d: i for i, d in enumerate(DIRS8)}

N_ACTIONS = 10
ACTION_STAY = 8
ACTION_COMM = 9


def in_bounds(r: int, c: int, rows: int, cols: int) -> bool:
    return 0 <= r < rows and 0 <= c < cols


def chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def metric_distance(a: tuple[int, int], b: tuple[int, int], cell_side: float) -> float:
    """Euclidean distance between cell centers, in meters."""
    return cell_side * float(np.hypot(a[0] - b[0], a[1] - b[1]))


@lru_cache(maxsize=32)
def neighbor_table(rows: int, cols: int) -> tuple[tuple[int, ...], ...]:
    """Flat-index 8-neighborhoods, one tuple per cell, in DIRS8 order.

    Off-grid neighbors are omitted; the surviving entries keep the
    direction order, which planning relies on for tie-breaking.
    """
    table = []
    for r in range(rows):
        for c in range(cols):
            nbrs = []
            for dr, dc in DIRS8:
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols:
                    nbrs.append(nr * cols + nc)
            table.append(tuple(nbrs))
    return tuple(table)


def connected_free(grid: np.ndarray) -> bool:
    """True when the FREE cells of `grid` form one 8-connected component.

    A grid with no free cells is treated as not connected.
    """
    rows, cols = grid.shape
    free = grid == FREE
    n_free = int(free.sum())
    if n_free == 0:
        return False
    start = int(np.argmax(free.ravel()))
    seen = np.zeros(rows * cols, dtype=bool)
    seen[start] = True
    stack = [start]
    nbrs = neighbor_table(rows, cols)
    flat_free = free.ravel()
    count = 1
    while stack:
        u = stack.pop()
        for v in nbrs[u]:
            if flat_free[v] and not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n_free


def reachable_cells(grid: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    """Boolean mask of cells reachable from `start` over FREE cells, 8-connected."""
    rows, cols = grid.shape
    flat_free = (grid == FREE).ravel()
    seen = np.zeros(rows * cols, dtype=bool)
    sidx = start[0] * cols + start[1]
    if not flat_free[sidx]:
        return seen.reshape(rows, cols)
    seen[sidx] = True
    stack = [sidx]
    nbrs = neighbor_table(rows, cols)
    while stack:
        u = stack.pop()
        for v in nbrs[u]:
            if flat_free[v] and not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen.reshape(rows, cols)
