"""Proximity-gated map sharing.

Agents that pick the communicate action in the same step form networks:
connected components of the graph whose edges join communicators within
range, directly or through a chain of intermediaries. Every network pools
its members' maps into one union map that replaces each member's map.
"""

from __future__ import annotations

import logging

import numpy as np

from .grid import UNKNOWN, metric_distance

log = logging.getLogger(__name__)


def form_networks(
    positions, communicators, r_c: float, cell_side: float
) -> tuple[tuple[int, ...], ...]:
    """Partition `communicators` into connected proximity components.

    Members are sorted within each network and networks are ordered by
    their smallest member, so the result is independent of input order.
    Singletons are legal networks that simply have nobody to talk to.
    """
    comm = sorted(set(communicators))
    adj = {i: [] for i in comm}
    for a in range(len(comm)):
        for b in range(a + 1, len(comm)):
            i, j = comm[a], comm[b]
            if metric_distance(positions[i], positions[j], cell_side) <= r_c:
                adj[i].append(j)
                adj[j].append(i)
    networks = []
    seen: set[int] = set()
    for i in comm:
        if i in seen:
            continue
        component = []
        stack = [i]
        seen.add(i)
        while stack:
            u = stack.pop()
            component.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        networks.append(tuple(sorted(component)))
    networks.sort(key=lambda net: net[0])
    return tuple(networks)


def merge_maps(maps: list[np.ndarray]) -> np.ndarray:
    """Cell-wise knowledge union of reconstructed maps.

    Known values override unknown ones. All maps describe the same static
    arena, so a free/occupied disagreement indicates corrupted input; the
    occupied reading wins and the event is logged.
    """
    if not maps:
        raise ValueError("nothing to merge")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"map shapes differ: {shape} vs {m.shape}")
    merged = maps[0].copy()
    for m in maps[1:]:
        conflicts = (merged != UNKNOWN) & (m != UNKNOWN) & (merged != m)
        if conflicts.any():
            log.warning(
                "merge saw %d conflicting cells; keeping the occupied reading",
                int(conflicts.sum()),
            )
        np.maximum(merged, m, out=merged)
    return merged


def apply_merge(state, network: tuple[int, ...]) -> dict[int, int]:
    """Replace every network member's map with the members' union.

    Returns per-member knowledge gain. Co-members' discovery counters
    reset to zero because they now hold identical maps; counters toward
    outsiders grow by the merge gain, since that gain is map growth the
    outsider has not seen.
    """
    members = sorted(network)
    merged = merge_maps([state.maps[i] for i in members])
    known_merged = int(np.count_nonzero(merged != UNKNOWN))
    gains: dict[int, int] = {}
    for i in members:
        gains[i] = known_merged - state.known_count(i)
        state.maps[i] = merged.copy()
    in_net = set(members)
    for i in members:
        for j in range(state.n_agents):
            if j == i:
                continue
            if j in in_net:
                state.q[i, j] = 0
                state.q[j, i] = 0
            elif gains[i]:
                state.q[i, j] += gains[i]
    return gains
