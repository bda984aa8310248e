"""Episode drivers and the live schema validator.

The random driver mirrors the server's documented sampling rule (PCG64
seeded with the episode seed; per step, per agent in index order, pick the
k-th set mask bit with k = rng.integers(n_available)), which makes a
protocol-driven episode reproduce the in-process reference run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .client import ClientSession

MOVE_ACTIONS = range(8)


@dataclass
class EpisodeSummary:
    steps: int
    done: bool
    reward_sum: float
    exploration: list[float]
    mask_violations: int
    actions: list[list[int]] = field(repr=False, default_factory=list)


def _pick_random(mask: list[int], rng) -> int:
    avail = [i for i, bit in enumerate(mask) if bit]
    return avail[int(rng.integers(len(avail)))]


def _pick_greedy_proxy(session: ClientSession, obs_row, mask: list[int], rng) -> int:
    """Client-side frontier chase using only the layout descriptor."""
    fpr = session.segment(obs_row, "fpr")
    counts = fpr[0::3]
    means = fpr[1::3]
    open_moves = [d for d in MOVE_ACTIONS if mask[d]]
    candidates = [d for d in open_moves if counts[d] > 0]
    if candidates and rng.random() >= 0.05:
        return min(candidates, key=lambda d: (means[d], -counts[d], d))
    if open_moves:
        return open_moves[int(rng.integers(len(open_moves)))]
    return 8


def run_episode(
    session: ClientSession,
    seed: int,
    n_steps: int,
    mode: str = "random",
    config: dict | None = None,
    quiet: bool = False,
) -> EpisodeSummary:
    """Reset, drive n_steps of sampled actions, audit masks, summarize."""
    reply = session.reset(seed, config)
    masks = reply["masks"]
    obs = reply["obs"]
    known = reply["known"]
    rng = np.random.default_rng(seed)
    reward_sum = 0.0
    violations = 0
    done = False
    steps = 0
    actions_log: list[list[int]] = []
    for _ in range(n_steps):
        actions = []
        for agent in range(session.n_agents):
            if mode == "greedy-proxy":
                a = _pick_greedy_proxy(session, obs[agent], masks[agent], rng)
            else:
                a = _pick_random(masks[agent], rng)
            if not masks[agent][a]:
                violations += 1
            actions.append(a)
        reply = session.step(actions)
        actions_log.append(actions)
        masks = reply["masks"]
        obs = reply["obs"]
        known = reply["known"]
        reward_sum += reply["joint_reward"]
        steps += 1
        done = reply["done"]
        if done:
            break
    exploration = [k / session.area for k in known]
    summary = EpisodeSummary(
        steps=steps,
        done=done,
        reward_sum=reward_sum,
        exploration=exploration,
        mask_violations=violations,
        actions=actions_log,
    )
    if not quiet:
        ratios = " ".join(f"{r:.4f}" for r in summary.exploration)
        print(f"{mode} episode: {summary.steps} steps, done={summary.done}")
        print(f"joint reward sum: {summary.reward_sum:.4f}")
        print(f"final exploration ratios: {ratios}")
        print(f"mask violations: {summary.mask_violations}")
    return summary


def run_random_episode(session, seed, n_steps, quiet=False) -> EpisodeSummary:
    return run_episode(session, seed, n_steps, mode="random", quiet=quiet)


@dataclass
class Finding:
    path: str
    problem: str


@dataclass
class ValidationReport:
    passed: bool
    checks: int
    findings: list[Finding]

    def render(self) -> str:
        lines = [f"schema validation: {'PASS' if self.passed else 'FAIL'} ({self.checks} checks)"]
        for f in self.findings:
            lines.append(f"  {f.path}: {f.problem}")
        return "\n".join(lines)


def validate_schema(session: ClientSession, seed: int = 0) -> ValidationReport:
    """Exercise reset and one step; verify structure, layout, and ranges.

    Failures are collected with their field paths, never raised.
    """
    findings: list[Finding] = []
    checks = 0

    def check(cond: bool, path: str, problem: str):
        nonlocal checks
        checks += 1
        if not cond:
            findings.append(Finding(path, problem))

    reset = session.reset(seed)
    payload = validate_payload(reset, session, "reset_ok", check)
    n = session.n_agents

    stay = [8] * n
    step = session.step(stay)
    validate_payload(step, session, "step_ok", check)
    check(isinstance(step.get("done"), bool), "step_ok.done", "must be a boolean")
    rewards = step.get("rewards")
    check(
        isinstance(rewards, list) and len(rewards) == n,
        "step_ok.rewards", f"need {n} entries",
    )
    if isinstance(rewards, list):
        for i, r in enumerate(rewards):
            check(isinstance(r, (int, float)), f"step_ok.rewards[{i}]", "must be numeric")
    events = step.get("events", {})
    for key in ("dangerous", "blocked", "sense_gain", "merge_gain"):
        seq = events.get(key)
        check(
            isinstance(seq, list) and len(seq) == n,
            f"step_ok.events.{key}", f"need {n} entries",
        )
    return ValidationReport(passed=not findings, checks=checks, findings=findings)


def validate_payload(payload: dict, session: ClientSession, where: str, check) -> dict:
    layout = payload.get("layout", session.layout)
    n = session.n_agents
    if where == "reset_ok":
        check(isinstance(layout, list) and len(layout) == 4, f"{where}.layout",
              "must list four segments")
        names = [seg[0] for seg in layout]
        check(names == ["fov", "fpr", "net", "mask"], f"{where}.layout",
              f"unexpected segment names {names}")
        sizes = {str(a): int(b) for a, b in layout}
        check(sizes.get("fov") == 9, f"{where}.layout.fov", "must be 9")
        check(sizes.get("fpr") == 24, f"{where}.layout.fpr", "must be 24")
        check(sizes.get("net") == n, f"{where}.layout.net", f"must equal n_agents={n}")
        check(sizes.get("mask") == 10, f"{where}.layout.mask", "must be 10")
    feature_len = 9 + 24 + n

    obs = payload.get("obs")
    check(isinstance(obs, list) and len(obs) == n, f"{where}.obs", f"need {n} rows")
    if isinstance(obs, list):
        for i, row in enumerate(obs):
            check(
                isinstance(row, list) and len(row) == feature_len,
                f"{where}.obs[{i}]", f"need {feature_len} features",
            )
            if not isinstance(row, list) or len(row) != feature_len:
                continue
            fov = session.segment(row, "fov")
            check(all(v in (0.0, 1.0) for v in fov), f"{where}.obs[{i}].fov",
                  "entries must be 0 or 1")
            fpr = session.segment(row, "fpr")
            check(all(0.0 <= v <= 1.0 for v in fpr), f"{where}.obs[{i}].fpr",
                  "entries must lie in [0, 1]")
            net = session.segment(row, "net")
            check(all(v in (0.0, 1.0) for v in net), f"{where}.obs[{i}].net",
                  "entries must be 0 or 1")
            check(net[i] == 1.0, f"{where}.obs[{i}].net[{i}]", "self bit must be 1")

    masks = payload.get("masks")
    check(isinstance(masks, list) and len(masks) == n, f"{where}.masks", f"need {n} rows")
    if isinstance(masks, list):
        for i, row in enumerate(masks):
            check(
                isinstance(row, list) and len(row) == 10,
                f"{where}.masks[{i}]", "need 10 bits",
            )
            if isinstance(row, list) and len(row) == 10:
                check(all(v in (0, 1) for v in row), f"{where}.masks[{i}]",
                      "bits must be 0 or 1")
                check(row[8] == 1, f"{where}.masks[{i}][8]", "stay must be available")
                check(row[9] == 1, f"{where}.masks[{i}][9]", "communicate must be available")

    known = payload.get("known")
    check(isinstance(known, list) and len(known) == n, f"{where}.known", f"need {n} entries")
    if isinstance(known, list) and all(isinstance(k, int) for k in known):
        check(all(0 <= k <= session.area for k in known), f"{where}.known",
              "counts must lie in [0, area]")
    return payload
