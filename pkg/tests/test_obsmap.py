import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coexplore import obsmap, world
from coexplore.config import EnvConfig
from coexplore.grid import FREE, OCCUPIED, UNKNOWN

from conftest import open_arena


class TestSenseFov:
    def test_open_interior_all_free(self):
        arena = open_arena()
        patch = obsmap.sense_fov(arena, [(2, 2)], 0)
        assert (patch.codes == obsmap.FOV_FREE).all()
        assert (patch.occupancy() == 0).all()

    def test_adjacent_agent_reads_occupied_dynamic(self):
        arena = open_arena()
        patch = obsmap.sense_fov(arena, [(2, 2), (1, 3)], 0)
        assert patch.codes[0, 2] == obsmap.FOV_AGENT
        assert patch.occupancy()[0, 2] == 1

    def test_corner_off_grid_cells_occupied(self):
        arena = open_arena()
        patch = obsmap.sense_fov(arena, [(0, 0)], 0)
        assert (patch.codes[0, :] == obsmap.FOV_OFFGRID).all()
        assert (patch.codes[:, 0] == obsmap.FOV_OFFGRID).all()
        assert int(patch.occupancy().sum()) == 5

    def test_static_obstacle_reads_static(self):
        arena = open_arena()
        arena.grid[1, 2] = OCCUPIED
        patch = obsmap.sense_fov(arena, [(2, 2)], 0)
        assert patch.codes[0, 1] == obsmap.FOV_STATIC


class TestUpdateMap:
    def test_fresh_interior_patch_gains_nine(self):
        arena = open_arena()
        recon = obsmap.new_map(6, 6)
        patch = obsmap.sense_fov(arena, [(2, 2)], 0)
        _, gained = obsmap.update_map(recon, patch, (2, 2))
        assert gained == 9

    def test_resense_is_idempotent(self):
        arena = open_arena()
        recon = obsmap.new_map(6, 6)
        patch = obsmap.sense_fov(arena, [(2, 2)], 0)
        obsmap.update_map(recon, patch, (2, 2))
        snapshot = recon.copy()
        _, gained = obsmap.update_map(recon, patch, (2, 2))
        assert gained == 0
        assert (recon == snapshot).all()

    def test_other_agent_cell_recorded_free(self):
        arena = open_arena()
        recon = obsmap.new_map(6, 6)
        patch = obsmap.sense_fov(arena, [(2, 2), (2, 3)], 0)
        obsmap.update_map(recon, patch, (2, 2))
        assert recon[2, 3] == FREE

    def test_static_obstacle_recorded_occupied(self):
        arena = open_arena()
        arena.grid[3, 3] = OCCUPIED
        recon = obsmap.new_map(6, 6)
        patch = obsmap.sense_fov(arena, [(2, 2)], 0)
        obsmap.update_map(recon, patch, (2, 2))
        assert recon[3, 3] == OCCUPIED

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_monotone_under_random_senses(self, seed):
        rng = np.random.default_rng(seed)
        arena = open_arena(6, 6)
        for cell in rng.integers(0, 6, size=(4, 2)):
            arena.grid[tuple(cell)] = OCCUPIED
        free = arena.free_cells()
        recon = obsmap.new_map(6, 6)
        known = 0
        for _ in range(10):
            pos = free[int(rng.integers(len(free)))]
            patch = obsmap.sense_fov(arena, [pos], 0)
            _, gained = obsmap.update_map(recon, patch, pos)
            now = int(np.count_nonzero(recon != UNKNOWN))
            assert now == known + gained
            known = now


class TestNetVector:
    def test_six_cells_apart_connected(self):
        vec = obsmap.net_vector([(0, 0), (0, 6)], 0, r_c=3.2, cell_side=0.5)
        assert vec.tolist() == [1, 1]

    def test_seven_cells_apart_disconnected(self):
        vec = obsmap.net_vector([(0, 0), (0, 7)], 0, r_c=3.2, cell_side=0.5)
        assert vec.tolist() == [1, 0]

    def test_single_agent_self_bit(self):
        vec = obsmap.net_vector([(3, 3)], 0, r_c=3.2, cell_side=0.5)
        assert vec.tolist() == [1]

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        positions = [tuple(map(int, rng.integers(0, 12, size=2))) for _ in range(4)]
        vecs = [obsmap.net_vector(positions, i, 3.2, 0.5) for i in range(4)]
        for i in range(4):
            for j in range(4):
                assert vecs[i][j] == vecs[j][i]


class TestBuildObservation:
    def test_feature_length_four_agents(self):
        cfg = EnvConfig()
        arena = world.generate_arena(0, cfg)
        state = world.spawn_agents(1, arena, 4)
        obs = obsmap.build_observation(state, 0, cfg)
        assert obs.features().shape == (37,)
        assert obs.mask.shape == (10,)

    def test_fully_explored_map_zero_fpr(self):
        cfg = EnvConfig(rows=6, cols=6, obstacle_ratio=0.0, n_agents=1, horizon=10)
        arena = open_arena()
        state = world.spawn_agents(0, arena, 1)
        state.maps[0][:] = FREE
        obs = obsmap.build_observation(state, 0, cfg)
        assert (obs.fpr == 0).all()

    def test_observation_deterministic_across_replay(self):
        from coexplore.episode import Episode

        cfg = EnvConfig(rows=8, cols=8, obstacle_ratio=0.1, n_agents=3, horizon=15)
        rng = np.random.default_rng(5)
        actions = [[int(rng.integers(10)) for _ in range(3)] for _ in range(15)]
        runs = []
        for _ in range(2):
            ep = Episode(cfg, seed=4)
            feats = []
            for step_actions in actions:
                feats.append(np.concatenate([o.features() for o in ep.observations()]))
                ep.step(step_actions)
            runs.append(np.stack(feats))
        assert (runs[0] == runs[1]).all()
