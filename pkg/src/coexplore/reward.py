"""The two reward schemes and the shared joint reward.

Case 1 pays raw cell counts: the number of cells an action added to the
agent's map, with sharing credited at the merged map's size and a -100
penalty for unsafe moves. Case 2 normalizes everything into roughly
[-1, 1]: exploration gain is divided by the per-step discovery ceiling,
idling costs 1, unsafe moves cost 10, and sharing pays the merge gain as
an arena fraction scaled by how much news the sharer brought.
"""

from __future__ import annotations

from dataclasses import dataclass

DANGER_PENALTY_CASE1 = -100.0
DANGER_PENALTY_CASE2 = -10.0
SHARE_BONUS_BASE = 0.8


@dataclass
class RewardInputs:
    """Everything the reward of one agent at one step depends on."""

    dangerous: bool
    acted_communicate: bool
    network_size: int               # 0 when the agent did not communicate
    known_prev: int                 # map cells known before this step
    known_after: int                # after sensing (and merging, if any)
    known_network: int              # merged map size; meaningful when shared
    share_q: dict[int, int]         # pre-reset discovery counters toward co-members
    arena_area: int
    e_max: int
    stationary: bool

    @property
    def shared(self) -> bool:
        return self.acted_communicate and self.network_size >= 2


def e_max(radius_cells: int) -> int:
    """Most cells a single move can reveal: 4 * radius + 1 (diagonal case)."""
    if radius_cells < 1:
        raise ValueError(f"radius must be >= 1, got {radius_cells}")
    return 4 * radius_cells + 1


def reward_case1(inputs: RewardInputs) -> float:
    if inputs.dangerous:
        return DANGER_PENALTY_CASE1
    if inputs.shared:
        return float(inputs.known_network - inputs.known_prev)
    return float(inputs.known_after - inputs.known_prev)


def reward_case2(inputs: RewardInputs) -> float:
    if inputs.dangerous:
        return DANGER_PENALTY_CASE2
    area = inputs.arena_area
    if inputs.shared:
        mean_q = sum(inputs.share_q.values()) / (inputs.network_size - 1)
        p = mean_q / area + SHARE_BONUS_BASE
        return p * (inputs.known_network - inputs.known_prev) / area
    repose = 1.0 if inputs.stationary else 0.0
    return (inputs.known_after - inputs.known_prev) / inputs.e_max - repose


def joint_reward(per_agent: list[float]) -> float:
    """The team reward every agent receives: the plain mean."""
    if not per_agent:
        raise ValueError("no per-agent rewards to average")
    return sum(per_agent) / len(per_agent)


def step_rewards(events, config) -> tuple[list[float], float]:
    """Per-agent and joint rewards for one step's events."""
    ceiling = e_max(config.sense_radius_cells)
    case = reward_case1 if config.reward_case == 1 else reward_case2
    values = []
    for i in range(len(events.actions)):
        net = events.networks[events.network_of[i]] if events.network_of[i] >= 0 else ()
        inputs = RewardInputs(
            dangerous=events.dangerous[i],
            acted_communicate=events.network_of[i] >= 0,
            network_size=len(net),
            known_prev=events.known_prev[i],
            known_after=events.known_final[i],
            known_network=events.known_final[i],
            share_q=events.share_q[i],
            arena_area=config.area,
            e_max=ceiling,
            stationary=not events.moved[i],
        )
        values.append(case(inputs))
    return values, joint_reward(values)
