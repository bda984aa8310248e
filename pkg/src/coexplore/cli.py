"""Operator entry point.

Subcommands: generate (arena file), run (single episode), eval (batched
report), train (policy optimization), analyze (frontier statistics of a
saved map). `--serve host:port` starts the wire service instead. Every
run writes a manifest echoing the fully resolved configuration, so any
output can be reproduced from its directory alone.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import envd, evaluation, frontier, happo, serialize
from .config import ConfigError, EnvConfig, TrainConfig
from .grid import DIR_NAMES
from .world import ArenaGenerationError, generate_arena


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="coexplore", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--serve", metavar="ADDR", help="run the environment service on host:port")
    parser.add_argument("--config", help="JSON config file with 'env' and 'train' sections")
    parser.add_argument("--trace-dir", help="with --serve: directory for finished episode traces")
    sub = parser.add_subparsers(dest="command")

    def common(p, steps=False, runs=False, policy=False):
        p.add_argument("--config", help="JSON config file with 'env' and 'train' sections")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--reward-case", type=int, choices=(1, 2), dest="reward_case")
        if steps:
            p.add_argument("--steps", type=int, help="episode length")
        if runs:
            p.add_argument("--runs", type=int, default=200, help="number of episodes")
            p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        if policy:
            p.add_argument(
                "--policy",
                default="greedy",
                help="baseline name or checkpoint path; comma-separate for per-agent policies",
            )

    p = sub.add_parser("generate", help="write a seeded arena file")
    common(p)

    p = sub.add_parser("run", help="run one episode and write its trace")
    common(p, steps=True, policy=True)
    p.add_argument("--save-maps", action="store_true",
                   help="also write each agent's final reconstructed map")

    p = sub.add_parser("eval", help="batch evaluation with report files")
    common(p, steps=True, runs=True, policy=True)

    p = sub.add_parser("train", help="optimize policies and write checkpoints")
    common(p)
    p.add_argument("--iterations", type=int, help="training iterations override")
    p.add_argument("--progress-every", type=int, default=0)

    p = sub.add_parser("analyze", help="frontier statistics for a saved map")
    p.add_argument("map_file", help="reconstructed-map JSON file")
    p.add_argument("--position", required=True, help="agent cell as row,col")
    p.add_argument("--out", default=None)
    return parser


def load_configs(path: str | None, reward_case: int | None = None) -> tuple[EnvConfig, TrainConfig]:
    env_dict, train_dict = {}, {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise RuntimeError(f"config file {path} is not valid JSON (line {exc.lineno}): {exc.msg}")
        env_dict = data.get("env", {})
        train_dict = data.get("train", {})
    if reward_case is not None:
        env_dict = {**env_dict, "reward_case": reward_case}
    return EnvConfig.from_dict(env_dict), TrainConfig.from_dict(train_dict)


def write_manifest(out_dir, command, args_echo: dict, env: EnvConfig,
                   train: TrainConfig | None, outputs: list[str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "format": "run-manifest",
        "version": 1,
        "command": command,
        "args": args_echo,
        "env_config": env.to_dict(),
        "train_config": train.to_dict() if train else None,
        "outputs": sorted(os.path.relpath(p, out_dir) for p in outputs),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(serialize.dumps_canonical(manifest))


def cmd_generate(args) -> int:
    env, train = load_configs(args.config, args.reward_case)
    arena = generate_arena(args.seed, env)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "arena.json")
    serialize.save_json(path, serialize.arena_to_dict(arena))
    write_manifest(args.out, "generate", {"seed": args.seed}, env, None, [path])
    print(f"arena {env.rows}x{env.cols}: {arena.n_obstacles} obstacles, free space connected")
    print(f"wrote {path}")
    return 0


def _policy_specs(arg: str, n_agents: int) -> list[str]:
    specs = [s.strip() for s in arg.split(",") if s.strip()]
    if not specs:
        raise UsageError("--policy must name at least one policy")
    return specs


def cmd_run(args) -> int:
    env, train = load_configs(args.config, args.reward_case)
    n_steps = args.steps or env.horizon
    specs = _policy_specs(args.policy, env.n_agents)
    trace = evaluation.run_episode(
        env, evaluation.normalize_policy_specs(specs, env.n_agents), args.seed, n_steps
    )
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.json")
    serialize.save_json(trace_path, trace)
    map_paths = []
    if args.save_maps:
        from .episode import replay_trace

        final_state = replay_trace(trace).state
        for i in range(env.n_agents):
            p = os.path.join(args.out, f"map_agent{i}.json")
            serialize.save_json(p, serialize.map_to_dict(final_state.maps[i]))
            map_paths.append(p)
    report = evaluation.report_from_traces([trace])
    paths = evaluation.write_report(report, args.out)
    write_manifest(
        args.out, "run",
        {"seed": args.seed, "steps": n_steps, "policy": specs},
        env, None, [trace_path] + map_paths + paths,
    )
    final = report.exploration[0][-1]
    print(f"episode of {n_steps} steps with {args.policy!r}")
    print(f"final exploration: best agent {final[-2]:.4f}, merged maps {final[-1]:.4f}")
    print(f"wrote {trace_path}")
    return 0


def cmd_eval(args) -> int:
    env, train = load_configs(args.config, args.reward_case)
    n_steps = args.steps or env.horizon
    specs = _policy_specs(args.policy, env.n_agents)
    report, _ = evaluation.run_batch(
        specs, env, n_runs=args.runs, n_steps=n_steps, seed=args.seed, jobs=args.jobs
    )
    paths = evaluation.write_report(report, args.out)
    write_manifest(
        args.out, "eval",
        {"seed": args.seed, "steps": n_steps, "runs": args.runs,
         "jobs": args.jobs, "policy": specs},
        env, None, paths,
    )
    s = report.summary()
    print(f"{args.runs} runs x {n_steps} steps with {args.policy!r}")
    print(
        "final max exploration: "
        f"{s['final_max_exploration']['mean']:.4f} +- {s['final_max_exploration']['std']:.4f}"
    )
    print(
        "communication: action ratio "
        f"{s['comm_action_ratio']['mean']:.4f}, success ratio {s['comm_success_ratio']['mean']:.4f}"
    )
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_train(args) -> int:
    env, train = load_configs(args.config, args.reward_case)
    if args.iterations:
        train = TrainConfig.from_dict({**train.to_dict(), "episodes": args.iterations})
    history = happo.train(env, train, args.seed, args.out, progress_every=args.progress_every)
    outputs = [
        os.path.join(args.out, "checkpoint_init.npz"),
        os.path.join(args.out, "checkpoint_final.npz"),
        os.path.join(args.out, "learning_curve.csv"),
    ]
    write_manifest(args.out, "train", {"seed": args.seed}, env, train, outputs)
    first, last = history[0], history[-1]
    print(f"trained {len(history)} iterations")
    print(f"mean return {first.mean_return:.3f} -> {last.mean_return:.3f}")
    print(f"exploration {first.exploration_ratio:.3f} -> {last.exploration_ratio:.3f}")
    return 0


def cmd_analyze(args) -> int:
    try:
        data = serialize.load_json(args.map_file)
    except FileNotFoundError:
        raise UsageError(f"map file not found: {args.map_file}")
    except json.JSONDecodeError as exc:
        raise RuntimeError(
            f"{args.map_file} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        )
    recon = serialize.map_from_dict(data)
    try:
        row, col = (int(v) for v in args.position.split(","))
    except ValueError:
        raise UsageError(f"--position must be row,col integers, got {args.position!r}")
    cells = frontier.detect_frontiers(recon)
    table, flat = frontier.fpr_features(recon, (row, col))
    if not cells:
        print("no frontiers")
    else:
        print(f"{len(cells)} frontier cells: {cells}")
    print(f"{'dir':>4} {'count':>6} {'mean':>8} {'std':>8}")
    for d in range(8):
        print(f"{DIR_NAMES[d]:>4} {table.count[d]:>6d} {table.mean[d]:>8.3f} {table.std[d]:>8.3f}")
    print("normalized features:", np.array2string(flat, precision=6, max_line_width=100))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.serve:
            env, _ = load_configs(args.config)
            envd.serve(args.serve, env, trace_dir=args.trace_dir)
            return 0
        handlers = {
            "generate": cmd_generate,
            "run": cmd_run,
            "eval": cmd_eval,
            "train": cmd_train,
            "analyze": cmd_analyze,
        }
        if args.command is None:
            parser.print_help()
            return 1
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ArenaGenerationError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
