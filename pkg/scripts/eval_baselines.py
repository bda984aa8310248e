#!/usr/bin/env python3
"""Evaluate the scripted baselines over a batch of random arenas.

    python scripts/eval_baselines.py --runs 200 --steps 300 --jobs 2
"""

import argparse

from coexplore import evaluation
from coexplore.config import EnvConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--jobs", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/baselines")
    args = ap.parse_args()

    cfg = EnvConfig()
    for name in ("greedy", "comm", "random"):
        report, _ = evaluation.run_batch(
            [name], cfg, n_runs=args.runs, n_steps=args.steps, seed=args.seed, jobs=args.jobs
        )
        s = report.summary()
        evaluation.write_report(report, f"{args.out}/{name}")
        print(
            f"{name:>8}: final max exploration "
            f"{s['final_max_exploration']['mean']:.4f} +- {s['final_max_exploration']['std']:.4f}  "
            f"comm action {s['comm_action_ratio']['mean']:.4f}  "
            f"comm success {s['comm_success_ratio']['mean']:.4f}"
        )


if __name__ == "__main__":
    main()
