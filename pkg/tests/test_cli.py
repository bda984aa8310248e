import json
import os

import numpy as np
import pytest

from coexplore import serialize
from coexplore.cli import main
from coexplore.grid import FREE, UNKNOWN


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGenerate:
    def test_default_arena(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "generate", "--seed", "0", "--out", str(tmp_path))
        assert code == 0
        assert "14 obstacles" in out
        data = serialize.load_json(tmp_path / "arena.json")
        assert data["rows"] == 12 and len(data["grid"]) == 144
        manifest = serialize.load_json(tmp_path / "manifest.json")
        assert manifest["command"] == "generate"
        assert manifest["env_config"]["rows"] == 12

    def test_zero_ratio(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"env": {"obstacle_ratio": 0.0}}))
        code, out, _ = run_cli(
            capsys, "generate", "--config", str(cfg), "--out", str(tmp_path / "o")
        )
        assert code == 0
        assert "0 obstacles" in out

    def test_same_seed_identical_file(self, tmp_path, capsys):
        code, _, _ = run_cli(capsys, "generate", "--seed", "5", "--out", str(tmp_path / "a"))
        assert code == 0
        run_cli(capsys, "generate", "--seed", "5", "--out", str(tmp_path / "b"))
        assert (tmp_path / "a" / "arena.json").read_bytes() == (
            tmp_path / "b" / "arena.json"
        ).read_bytes()


class TestRun:
    def test_greedy_episode(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"env": {"rows": 8, "cols": 8, "n_agents": 2}}))
        code, out, _ = run_cli(
            capsys, "run", "--config", str(cfg), "--seed", "1",
            "--steps", "40", "--out", str(tmp_path / "o"), "--policy", "greedy",
        )
        assert code == 0
        assert "final exploration" in out
        trace = serialize.load_json(tmp_path / "o" / "trace.json")
        assert len(trace["steps"]) == 40

    def test_save_maps_feeds_analyze(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "run", "--seed", "2", "--steps", "60", "--out", str(tmp_path),
            "--policy", "greedy", "--save-maps",
        )
        assert code == 0
        map_path = tmp_path / "map_agent0.json"
        assert map_path.exists()
        trace = serialize.load_json(tmp_path / "trace.json")
        row, col = trace["steps"][-1]["positions"][0]
        code, out, _ = run_cli(capsys, "analyze", str(map_path), "--position", f"{row},{col}")
        assert code == 0

    def test_single_step(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "run", "--seed", "0", "--steps", "1",
            "--out", str(tmp_path), "--policy", "stay",
        )
        assert code == 0
        trace = serialize.load_json(tmp_path / "trace.json")
        assert len(trace["steps"]) == 1

    def test_unknown_policy(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "run", "--seed", "0", "--steps", "1",
            "--out", str(tmp_path), "--policy", "sorcery",
        )
        assert code == 2
        assert "sorcery" in err

    def test_replay_matches_run_metrics(self, tmp_path, capsys):
        from coexplore import evaluation
        from coexplore.episode import replay_trace

        run_cli(
            capsys, "run", "--seed", "3", "--steps", "25",
            "--out", str(tmp_path), "--policy", "comm",
        )
        trace = serialize.load_json(tmp_path / "trace.json")
        replayed = replay_trace(trace)
        assert serialize.dumps_canonical(replayed.trace()) == serialize.dumps_canonical(trace)


class TestEval:
    def test_small_batch(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"env": {"rows": 8, "cols": 8, "n_agents": 2}}))
        code, out, _ = run_cli(
            capsys, "eval", "--config", str(cfg), "--seed", "2", "--runs", "2",
            "--steps", "15", "--out", str(tmp_path / "o"), "--policy", "random",
        )
        assert code == 0
        for name in ("exploration_curves.csv", "comm_stats.csv",
                     "expansion_hist.csv", "summary.json", "manifest.json"):
            assert (tmp_path / "o" / name).exists()
        comm = (tmp_path / "o" / "comm_stats.csv").read_text().strip().splitlines()
        assert len(comm) == 3  # header + 2 runs

    def test_rerun_byte_identical(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"env": {"rows": 8, "cols": 8, "n_agents": 2}}))
        for d in ("a", "b"):
            code, _, _ = run_cli(
                capsys, "eval", "--config", str(cfg), "--seed", "7", "--runs", "3",
                "--steps", "10", "--out", str(tmp_path / d), "--policy", "random",
            )
            assert code == 0
        for name in ("exploration_curves.csv", "comm_stats.csv",
                     "expansion_hist.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestTrain:
    def test_smoke_iteration(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "env": {"rows": 6, "cols": 6, "n_agents": 2, "horizon": 10},
            "train": {"episodes": 1, "steps_per_episode": 8, "batch_episodes": 2,
                      "hidden_sizes": [16, 8]},
        }))
        code, out, _ = run_cli(
            capsys, "train", "--config", str(cfg), "--seed", "0", "--out", str(tmp_path / "t")
        )
        assert code == 0
        assert (tmp_path / "t" / "checkpoint_init.npz").exists()
        assert (tmp_path / "t" / "checkpoint_final.npz").exists()
        assert (tmp_path / "t" / "learning_curve.csv").exists()
        assert "trained 1 iterations" in out


class TestAnalyze:
    def _write_map(self, path):
        recon = np.full((5, 5), UNKNOWN, dtype=np.int8)
        recon[1:4, 1:4] = FREE
        serialize.save_json(path, serialize.map_to_dict(recon))

    def test_fixture_map(self, tmp_path, capsys):
        path = tmp_path / "map.json"
        self._write_map(path)
        code, out, _ = run_cli(capsys, "analyze", str(path), "--position", "2,2")
        assert code == 0
        assert "8 frontier cells" in out

    def test_fully_known_map(self, tmp_path, capsys):
        path = tmp_path / "map.json"
        recon = np.full((4, 4), FREE, dtype=np.int8)
        serialize.save_json(path, serialize.map_to_dict(recon))
        code, out, _ = run_cli(capsys, "analyze", str(path), "--position", "1,1")
        assert code == 0
        assert "no frontiers" in out

    def test_position_not_free(self, tmp_path, capsys):
        path = tmp_path / "map.json"
        self._write_map(path)
        code, _, err = run_cli(capsys, "analyze", str(path), "--position", "0,0")
        assert code == 2

    def test_malformed_file_reports_line(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"format": "reconmap",\n  "version": ???\n}')
        code, _, err = run_cli(capsys, "analyze", str(path), "--position", "1,1")
        assert code == 2
        assert "line 2" in err


class TestUsage:
    def test_no_command_prints_help(self, capsys):
        code, out, _ = run_cli(capsys)
        assert code == 1

    def test_bad_flag_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "generate", "--bogus")
        assert code == 1

    def test_missing_config_file(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "generate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)
        )
        assert code == 1
