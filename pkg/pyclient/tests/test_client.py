"""End-to-end tests against a live service launched via its own CLI.

The server process is the system under test's public surface; nothing
here imports the simulator package.
"""

import copy
import json
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest

from pyclient import ProtocolError, VersionMismatch, connect, run_random_episode, validate_schema
from pyclient.runner import Finding, run_episode, validate_payload


@pytest.fixture(scope="module")
def server():
    trace_dir = Path(__file__).parent / "_server_traces"
    proc = subprocess.Popen(
        [sys.executable, "-u", "-m", "coexplore.cli",
         "--serve", "127.0.0.1:0", "--trace-dir", str(trace_dir)],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    line = proc.stdout.readline()
    assert "listening on" in line, f"server did not start: {line!r}"
    address = line.strip().rsplit(" ", 1)[-1]
    yield {"address": address, "trace_dir": trace_dir}
    proc.terminate()
    proc.wait(timeout=10)


class TestConnect:
    def test_connect_and_reset(self, server):
        session = connect(server["address"])
        payload = session.reset(seed=11)
        assert session.n_agents == payload["n_agents"]
        assert session.layout is not None
        session.close()

    def test_unreachable_port_clear_error(self):
        with pytest.raises(ConnectionError) as err:
            connect("127.0.0.1:1", timeout=2)
        assert "127.0.0.1:1" in str(err.value)

    def test_version_mismatch_reports_both_versions(self):
        # a throwaway server that rejects every version
        srv = socket.create_server(("127.0.0.1", 0))

        def answer():
            conn, _ = srv.accept()
            fh = conn.makefile("rwb")
            fh.readline()
            fh.write((json.dumps({
                "v": 1, "id": 0, "type": "error",
                "payload": {"code": "bad_version",
                            "detail": "server speaks version 7, client sent 1"},
            }) + "\n").encode())
            fh.flush()

        threading.Thread(target=answer, daemon=True).start()
        host, port = srv.getsockname()
        session = connect(f"{host}:{port}")
        with pytest.raises(VersionMismatch) as err:
            session.reset(seed=0)
        assert "7" in str(err.value) and "1" in str(err.value)
        srv.close()

    def test_mismatched_reply_id_rejected(self):
        srv = socket.create_server(("127.0.0.1", 0))

        def answer():
            conn, _ = srv.accept()
            fh = conn.makefile("rwb")
            fh.readline()
            fh.write((json.dumps({"v": 1, "id": 999, "type": "reset_ok",
                                  "payload": {}}) + "\n").encode())
            fh.flush()

        threading.Thread(target=answer, daemon=True).start()
        host, port = srv.getsockname()
        session = connect(f"{host}:{port}")
        with pytest.raises(ProtocolError, match="does not match"):
            session.reset(seed=0)
        srv.close()


class TestRandomEpisode:
    def test_300_steps_no_violations_done(self, server):
        session = connect(server["address"])
        summary = run_random_episode(session, seed=5, n_steps=300, quiet=True)
        session.close()
        assert summary.steps == 300
        assert summary.done is True
        assert summary.mask_violations == 0
        assert all(0.0 <= r <= 1.0 for r in summary.exploration)

    def test_zero_steps_reset_only(self, server):
        session = connect(server["address"])
        summary = run_random_episode(session, seed=5, n_steps=0, quiet=True)
        session.close()
        assert summary.steps == 0
        assert summary.done is False
        assert summary.reward_sum == 0.0
        assert len(summary.exploration) == session.n_agents or summary.exploration

    def test_same_seed_reproduces_actions_and_server_trace(self, server):
        runs = []
        for _ in range(2):
            session = connect(server["address"])
            summary = run_episode(
                session, seed=91, n_steps=25, mode="random", quiet=True,
                config={"rows": 8, "cols": 8, "n_agents": 3, "horizon": 25},
            )
            session.close()
            runs.append(summary)
        assert runs[0].actions == runs[1].actions
        assert runs[0].reward_sum == runs[1].reward_sum

        trace_path = server["trace_dir"] / "trace_seed91.json"
        assert trace_path.exists()
        trace = json.loads(trace_path.read_text())
        assert [list(s["actions"]) for s in trace["steps"]] == runs[0].actions

    def test_greedy_proxy_runs_clean(self, server):
        session = connect(server["address"])
        summary = run_episode(session, seed=3, n_steps=60, mode="greedy-proxy", quiet=True)
        session.close()
        assert summary.mask_violations == 0
        assert summary.steps == 60
        assert max(summary.exploration) > 0.3


class TestValidateSchema:
    def test_live_server_passes(self, server):
        session = connect(server["address"])
        report = validate_schema(session, seed=1)
        session.close()
        assert report.passed, report.render()
        assert report.checks > 50

    def test_observation_length_37_for_four_agents(self, server):
        session = connect(server["address"])
        payload = session.reset(seed=2, config={"n_agents": 4})
        session.close()
        assert len(payload["obs"][0]) == 37

    def test_tampered_payload_fails_with_field_path(self, server):
        session = connect(server["address"])
        payload = session.reset(seed=4)
        session.close()

        findings = []
        checks = 0

        def check(cond, path, problem):
            nonlocal checks
            checks += 1
            if not cond:
                findings.append(Finding(path, problem))

        bad = copy.deepcopy(payload)
        bad["obs"][0][10] = 7.5   # an fpr entry outside [0, 1]
        bad["masks"][1][8] = 0    # stay flagged unavailable
        validate_payload(bad, session, "reset_ok", check)
        paths = [f.path for f in findings]
        assert "reset_ok.obs[0].fpr" in paths
        assert "reset_ok.masks[1][8]" in paths


class TestCli:
    def test_validate_mode_exit_zero(self, server):
        proc = subprocess.run(
            [sys.executable, "-m", "pyclient.cli",
             "--address", server["address"], "--mode", "validate"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "PASS" in proc.stdout

    def test_random_mode_prints_summary(self, server):
        proc = subprocess.run(
            [sys.executable, "-m", "pyclient.cli",
             "--address", server["address"], "--mode", "random",
             "--seed", "8", "--steps", "40"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "final exploration ratios" in proc.stdout
        assert "mask violations: 0" in proc.stdout

    def test_dead_address_exit_two(self):
        proc = subprocess.run(
            [sys.executable, "-m", "pyclient.cli",
             "--address", "127.0.0.1:1", "--mode", "validate"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 2
        assert "error" in proc.stderr
