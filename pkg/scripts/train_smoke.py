#!/usr/bin/env python3
"""Small-scale training run: 6x6 arena, two agents, reward case 2.

Finishes in a couple of minutes on a laptop and is the quickest way to
watch the trainer work. Writes checkpoints and learning_curve.csv.

    python scripts/train_smoke.py --out out/smoke --iterations 500
"""

import argparse

import numpy as np

from coexplore import happo
from coexplore.config import EnvConfig, TrainConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/smoke")
    ap.add_argument("--iterations", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    env = EnvConfig(rows=6, cols=6, obstacle_ratio=0.1, n_agents=2,
                    horizon=40, reward_case=2)
    tc = TrainConfig(episodes=args.iterations, steps_per_episode=40,
                     batch_episodes=4, clip_eps=0.2, ppo_epochs=5,
                     learning_rate=1e-3, hidden_sizes=(64, 64))
    history = happo.train(env, tc, seed=args.seed, out_dir=args.out, progress_every=25)
    returns = np.array([h.mean_return for h in history])
    k = min(25, len(returns))
    print(f"mean return, first {k}: {returns[:k].mean():.3f}  last {k}: {returns[-k:].mean():.3f}")


if __name__ == "__main__":
    main()
