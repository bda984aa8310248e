"""One seeded episode: arena, agents, stepping, and the replayable trace.

The episode seed feeds two independent streams (arena layout, spawn
placement), so the same (seed, config, actions) triple always reproduces
the same run, whether driven in-process or over the wire.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import obsmap, reward, serialize, world
from .config import EnvConfig
from .grid import UNKNOWN


@dataclass
class StepOutcome:
    events: world.StepEvents
    rewards: list[float]
    joint_reward: float
    done: bool


class Episode:
    def __init__(self, config: EnvConfig, seed: int, record_trace: bool = True):
        self.config = config
        self.seed = int(seed)
        arena_seed, spawn_seed = _stream_seeds(self.seed)
        self.arena = world.generate_arena(arena_seed, config)
        self.state = world.spawn_agents(spawn_seed, self.arena, config.n_agents)
        self.done = False
        self._trace = (
            serialize.trace_header(
                config,
                self.seed,
                self.arena,
                self.state.positions,
                [self.state.known_count(i) for i in range(config.n_agents)],
                self.union_known(),
            )
            if record_trace
            else None
        )

    def union_known(self) -> int:
        union = np.zeros(self.state.maps[0].shape, dtype=bool)
        for m in self.state.maps:
            union |= m != UNKNOWN
        return int(union.sum())

    @property
    def t(self) -> int:
        return self.state.t

    def observations(self) -> list[obsmap.Observation]:
        return [
            obsmap.build_observation(self.state, i, self.config)
            for i in range(self.config.n_agents)
        ]

    def step(self, actions) -> StepOutcome:
        if self.done:
            raise RuntimeError("episode is over; reset before stepping again")
        _, events = world.step(self.state, list(actions), self.config)
        rewards, joint = reward.step_rewards(events, self.config)
        self.done = self.state.t >= self.config.horizon
        if self._trace is not None:
            self._trace["steps"].append(
                serialize.step_record(
                    events,
                    self.state.positions,
                    rewards,
                    joint,
                    [self.state.known_count(i) for i in range(self.config.n_agents)],
                    self.union_known(),
                )
            )
        return StepOutcome(events=events, rewards=rewards, joint_reward=joint, done=self.done)

    def trace(self) -> dict:
        if self._trace is None:
            raise RuntimeError("episode was created without trace recording")
        return self._trace


def _stream_seeds(seed: int) -> tuple[int, int]:
    children = np.random.SeedSequence(seed).spawn(2)
    return (
        int(children[0].generate_state(1)[0]),
        int(children[1].generate_state(1)[0]),
    )


def replay(config: EnvConfig, seed: int, actions_per_step) -> Episode:
    """Re-run an episode from its seed and recorded actions."""
    ep = Episode(config, seed)
    for actions in actions_per_step:
        ep.step(actions)
    return ep


def replay_trace(trace: dict) -> Episode:
    config = EnvConfig.from_dict(trace["config"])
    return replay(config, trace["seed"], [s["actions"] for s in trace["steps"]])
