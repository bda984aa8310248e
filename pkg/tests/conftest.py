import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coexplore.config import EnvConfig
from coexplore.grid import FREE, UNKNOWN
from coexplore import world

ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::", 1)[-1]
        ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, verdict in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"  {verdict}  {name}")


@pytest.fixture
def small_config():
    return EnvConfig(rows=6, cols=6, obstacle_ratio=0.0, n_agents=2, horizon=50)


@pytest.fixture
def default_config():
    return EnvConfig()


def open_arena(rows=6, cols=6, cell_side=0.5):
    grid = np.full((rows, cols), FREE, dtype=np.int8)
    return world.Arena(rows, cols, cell_side, 0.0, grid)


def partial_map(arena, seed, n_senses=12):
    """A plausible partially-known map: fuse a few random 3x3 patches."""
    from coexplore import obsmap

    rng = np.random.default_rng(seed)
    recon = np.full((arena.rows, arena.cols), UNKNOWN, dtype=np.int8)
    free = arena.free_cells()
    order = rng.permutation(len(free))
    origin = free[int(order[0])]
    patch = obsmap.sense_fov(arena, [origin], 0)
    obsmap.update_map(recon, patch, origin)
    for k in order[1 : n_senses + 1]:
        cell = free[int(k)]
        patch = obsmap.sense_fov(arena, [cell], 0)
        obsmap.update_map(recon, patch, cell)
    return recon, origin
