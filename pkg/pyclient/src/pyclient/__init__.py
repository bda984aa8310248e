"""Reference client for the coexplore environment wire protocol."""

from .client import ClientSession, ProtocolError, VersionMismatch, connect
from .runner import run_episode, run_random_episode, validate_schema

__version__ = "0.1.0"

__all__ = [
    "ClientSession",
    "ProtocolError",
    "VersionMismatch",
    "connect",
    "run_episode",
    "run_random_episode",
    "validate_schema",
    "__version__",
]
