"""Dataclass configs for the environment and the trainer.

Defaults reproduce the reference setup: a 12x12 arena with 10% static
obstacles, 0.5 m cells, 3.2 m communication range, four agents, and the
published training hyperparameters.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Any


class ConfigError(ValueError):
    pass


@dataclass
class EnvConfig:
    rows: int = 12
    cols: int = 12
    obstacle_ratio: float = 0.1
    cell_side: float = 0.5
    detect_range: float = 1.1
    comm_range: float = 3.2
    n_agents: int = 4
    horizon: int = 300
    reward_case: int = 2
    diagonal_through_free: bool = False

    # Sensing is one cell in every direction (a 3x3 field of view). The
    # metric detect_range is kept for the record; the cell radius is what
    # the observation and reward budgets are built on.
    sense_radius_cells: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise ConfigError(f"arena must be at least 2x2, got {self.rows}x{self.cols}")
        if not 0.0 <= self.obstacle_ratio < 1.0:
            raise ConfigError(f"obstacle_ratio must be in [0, 1), got {self.obstacle_ratio}")
        if self.detect_range <= 0 or self.comm_range < self.detect_range:
            raise ConfigError(
                f"ranges must satisfy comm_range >= detect_range > 0, got "
                f"detect_range={self.detect_range} comm_range={self.comm_range}"
            )
        if self.n_agents < 1:
            raise ConfigError(f"n_agents must be >= 1, got {self.n_agents}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.reward_case not in (1, 2):
            raise ConfigError(f"reward_case must be 1 or 2, got {self.reward_case}")
        if self.sense_radius_cells != 1:
            raise ConfigError("only a 1-cell sensing radius is supported")
        if self.n_obstacles >= self.rows * self.cols - self.n_agents:
            raise ConfigError(
                f"{self.n_obstacles} obstacles leave no room for {self.n_agents} agents "
                f"on a {self.rows}x{self.cols} arena"
            )

    @property
    def n_obstacles(self) -> int:
        return int(self.obstacle_ratio * self.rows * self.cols)

    @property
    def area(self) -> int:
        return self.rows * self.cols

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EnvConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown environment config keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class TrainConfig:
    episodes: int = 5000            # training iterations, one batch each
    steps_per_episode: int = 200
    batch_episodes: int = 8
    clip_eps: float = 0.2
    ppo_epochs: int = 5
    learning_rate: float = 5e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    arch: str = "mlp"
    hidden_sizes: tuple[int, int] = (2400, 300)
    checkpoint_every: int = 0       # 0 = only initial and final checkpoints

    def __post_init__(self) -> None:
        self.hidden_sizes = tuple(self.hidden_sizes)
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not 0.0 < self.gamma <= 1.0 or not 0.0 < self.gae_lambda <= 1.0:
            raise ConfigError("gamma and gae_lambda must be in (0, 1]")
        if self.episodes < 1 or self.steps_per_episode < 1 or self.batch_episodes < 1:
            raise ConfigError("episodes, steps_per_episode, batch_episodes must be >= 1")
        if self.ppo_epochs < 1:
            raise ConfigError("ppo_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.arch not in ("mlp", "cnn"):
            raise ConfigError(f"arch must be 'mlp' or 'cnn', got {self.arch!r}")
        if len(self.hidden_sizes) != 2:
            raise ConfigError("hidden_sizes must name the two hidden layer widths")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown train config keys: {sorted(extra)}")
        if "hidden_sizes" in d:
            d = dict(d, hidden_sizes=tuple(d["hidden_sizes"]))
        return cls(**d)
