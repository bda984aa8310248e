"""Collaborative grid exploration: simulator, features, trainer, service."""

from .config import EnvConfig, TrainConfig
from .episode import Episode

__version__ = "0.1.0"

__all__ = ["EnvConfig", "TrainConfig", "Episode", "__version__"]
