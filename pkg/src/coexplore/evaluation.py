"""Batched policy evaluation and the three headline metrics.

Runs independent seeded episodes over fresh arenas and reduces their
traces to: per-step exploration ratios (per agent, best agent, and the
union of all maps), per-run communication action/success ratios, and the
pooled histogram of per-member map expansions caused by merges. Every
metric is a pure function of the serialized trace, so a report can be
regenerated offline from saved traces and must come out identical.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import policy as policy_mod
from .config import EnvConfig
from .episode import Episode
from .grid import ACTION_COMM, UNKNOWN
from .reward import e_max


@dataclass
class EvalReport:
    n_runs: int
    n_steps: int
    n_agents: int
    area: int
    # exploration[run][step] rows: (per-agent ratios..., max, union); step 0 is the spawn state
    exploration: list[list[tuple]]
    comm_stats: list[tuple[float, float]]      # per run: (action_ratio, success_ratio)
    expansion_hist: dict[int, int]             # merge gain -> sample count
    expansion_reference: int                   # the one-step discovery ceiling

    def summary(self) -> dict[str, Any]:
        finals = [rows[-1] for rows in self.exploration]
        max_final = np.array([row[-2] for row in finals])
        union_final = np.array([row[-1] for row in finals])
        action = np.array([c[0] for c in self.comm_stats])
        success = np.array([c[1] for c in self.comm_stats])
        gains = np.array(
            [g for g, n in self.expansion_hist.items() for _ in range(n)], dtype=float
        )
        return {
            "runs": self.n_runs,
            "steps": self.n_steps,
            "agents": self.n_agents,
            "final_max_exploration": _stats(max_final),
            "final_union_exploration": _stats(union_final),
            "comm_action_ratio": _stats(action),
            "comm_success_ratio": _stats(success),
            "merge_expansions": {
                "events": int(gains.size),
                "mean_gain": float(gains.mean()) if gains.size else 0.0,
                "max_gain": int(gains.max()) if gains.size else 0,
                "share_above_reference": float((gains > self.expansion_reference).mean())
                if gains.size
                else 0.0,
                "reference_gain": self.expansion_reference,
            },
        }


def _stats(arr: np.ndarray) -> dict[str, float]:
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def exploration_ratio(state) -> tuple[list[float], float, float]:
    """Per-agent known-cell ratios, their max, and the all-maps union ratio."""
    area = state.arena.area
    ratios = [state.known_count(i) / area for i in range(state.n_agents)]
    union = np.zeros(state.maps[0].shape, dtype=bool)
    for m in state.maps:
        union |= m != UNKNOWN
    return ratios, max(ratios), float(union.sum()) / area


def run_episode(config: EnvConfig, policy_specs: list[str], seed: int, n_steps: int) -> dict:
    """One seeded evaluation episode; returns its trace."""
    cfg = EnvConfig(**{**config.to_dict(), "horizon": n_steps})
    ep = Episode(cfg, seed)
    dim = 9 + 24 + cfg.n_agents
    policies = [policy_mod.make_policy(s, dim) for s in policy_specs]
    rngs = [
        np.random.default_rng(s)
        for s in np.random.SeedSequence(seed).spawn(2)[1].spawn(cfg.n_agents)
    ]
    while not ep.done:
        obs = ep.observations()
        actions = [policies[i].act(obs[i], rngs[i]) for i in range(cfg.n_agents)]
        ep.step(actions)
    return ep.trace()


def exploration_rows(trace: dict) -> list[tuple]:
    """(per-agent ratios..., max_ratio, union_ratio) per step, spawn included."""
    area = trace["config"]["rows"] * trace["config"]["cols"]
    rows = []
    known0 = trace["initial_known"]
    union0 = trace["initial_union_known"]
    rows.append(tuple(k / area for k in known0) + (max(known0) / area, union0 / area))
    for step in trace["steps"]:
        ratios = tuple(k / area for k in step["known"])
        rows.append(ratios + (max(step["known"]) / area, step["union_known"] / area))
    return rows


def communication_stats(trace: dict) -> tuple[float, float]:
    """(communicate share of all actions, share of communicates that grew the map)."""
    total_actions = 0
    comm_actions = 0
    productive = 0
    for step in trace["steps"]:
        for agent, action in enumerate(step["actions"]):
            total_actions += 1
            if action == ACTION_COMM:
                comm_actions += 1
                if step["merge_gain"][agent] > 0:
                    productive += 1
    if total_actions == 0:
        return 0.0, 0.0
    action_ratio = comm_actions / total_actions
    success_ratio = productive / comm_actions if comm_actions else 0.0
    return action_ratio, success_ratio


def expansion_histogram(traces: list[dict]) -> dict[int, int]:
    """Pooled counts of positive per-member merge gains, one bin per cell count."""
    hist: dict[int, int] = {}
    for trace in traces:
        for step in trace["steps"]:
            for gain in step["merge_gain"]:
                if gain > 0:
                    hist[gain] = hist.get(gain, 0) + 1
    return dict(sorted(hist.items()))


def report_from_traces(traces: list[dict]) -> EvalReport:
    first = traces[0]
    cfg = first["config"]
    return EvalReport(
        n_runs=len(traces),
        n_steps=len(first["steps"]),
        n_agents=cfg["n_agents"],
        area=cfg["rows"] * cfg["cols"],
        exploration=[exploration_rows(t) for t in traces],
        comm_stats=[communication_stats(t) for t in traces],
        expansion_hist=expansion_histogram(traces),
        expansion_reference=e_max(cfg["sense_radius_cells"]),
    )


def _worker(args) -> dict:
    config_dict, specs, seed, n_steps = args
    return run_episode(EnvConfig.from_dict(config_dict), specs, seed, n_steps)


def run_batch(
    policy_specs: list[str],
    config: EnvConfig,
    n_runs: int,
    n_steps: int,
    seed: int,
    jobs: int = 1,
) -> tuple[EvalReport, list[dict]]:
    """n_runs independent episodes; deterministic for a seed, any job count."""
    if n_runs < 1 or n_steps < 1:
        raise ValueError("n_runs and n_steps must be >= 1")
    specs = normalize_policy_specs(policy_specs, config.n_agents)
    run_seeds = [
        int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(n_runs)
    ]
    tasks = [(config.to_dict(), specs, s, n_steps) for s in run_seeds]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            traces = pool.map(_worker, tasks, chunksize=max(1, n_runs // (4 * jobs)))
    else:
        traces = [_worker(t) for t in tasks]
    return report_from_traces(traces), traces


def normalize_policy_specs(policy_specs: list[str], n_agents: int) -> list[str]:
    if len(policy_specs) == 1:
        return policy_specs * n_agents
    if len(policy_specs) != n_agents:
        raise ValueError(f"need 1 or {n_agents} policies, got {len(policy_specs)}")
    return list(policy_specs)


# ---------------------------------------------------------------------------
# report files


def write_report(report: EvalReport, out_dir) -> list[str]:
    """The three CSVs plus a JSON summary; returns the written file names."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []

    path = os.path.join(out_dir, "exploration_curves.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "step", "agent", "ratio", "max_ratio", "union_ratio"])
        for run, rows in enumerate(report.exploration):
            for step, row in enumerate(rows):
                for agent in range(report.n_agents):
                    w.writerow(
                        [run, step, agent, repr(row[agent]), repr(row[-2]), repr(row[-1])]
                    )
    paths.append(path)

    path = os.path.join(out_dir, "comm_stats.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "action_ratio", "success_ratio"])
        for run, (action, success) in enumerate(report.comm_stats):
            w.writerow([run, repr(action), repr(success)])
    paths.append(path)

    path = os.path.join(out_dir, "expansion_hist.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gain", "count"])
        for gain, count in report.expansion_hist.items():
            w.writerow([gain, count])
    paths.append(path)

    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.summary(), sort_keys=True, indent=2) + "\n")
    paths.append(path)
    return paths
