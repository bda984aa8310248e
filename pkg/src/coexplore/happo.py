"""Sequential-update trainer with a shared critic.

Training is centralized (the critic reads the concatenated observations of
all agents and everyone shares the joint reward) while execution stays
decentralized. Each iteration collects a batch of episodes, estimates
advantages once, then updates the actors one at a time in a shuffled
order: after an agent trains, the advantage is reweighted by that agent's
post/pre probability ratio so later agents optimize against the already
shifted joint behaviour. All gradients are the handwritten passes from
`nets`; the optimizer is plain fixed-step gradient ascent/descent.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import nets, policy as policy_mod
from .config import EnvConfig, TrainConfig
from .episode import Episode
from .nets import categorical_logp_backward, categorical_logp_forward, sgd_ascent, sgd_descent


class TrainingError(RuntimeError):
    pass


@dataclass
class RolloutBuffer:
    obs: np.ndarray           # (n_b, n_s, N, obs_dim)
    masks: np.ndarray         # (n_b, n_s, N, 10)
    actions: np.ndarray       # (n_b, n_s, N)
    logp: np.ndarray          # (n_b, n_s, N)
    joint_reward: np.ndarray  # (n_b, n_s)
    values: np.ndarray        # (n_b, n_s)
    joint_obs: np.ndarray     # (n_b, n_s, N * obs_dim)
    episode_returns: np.ndarray       # (n_b,)
    final_max_ratio: np.ndarray       # (n_b,)

    @property
    def n_steps_total(self) -> int:
        return self.joint_reward.size


def obs_dim_for(config: EnvConfig) -> int:
    return 9 + 24 + config.n_agents


def collect_rollout(
    env_config: EnvConfig,
    actors,
    critic,
    train_config: TrainConfig,
    seed_seq: np.random.SeedSequence,
) -> RolloutBuffer:
    """Run batch_episodes fresh episodes under the current actors.

    Every episode draws its own arena, spawn, and sampling stream from
    `seed_seq`, so a collection is reproducible from the sequence alone.
    """
    n_b = train_config.batch_episodes
    n_s = train_config.steps_per_episode
    n = env_config.n_agents
    dim = obs_dim_for(env_config)

    obs = np.empty((n_b, n_s, n, dim))
    masks = np.empty((n_b, n_s, n, 10), dtype=np.uint8)
    actions = np.empty((n_b, n_s, n), dtype=np.int64)
    logp = np.empty((n_b, n_s, n))
    joint_reward = np.empty((n_b, n_s))
    values = np.empty((n_b, n_s))
    joint_obs = np.empty((n_b, n_s, n * dim))
    episode_returns = np.empty(n_b)
    final_max_ratio = np.empty(n_b)

    for b, child in enumerate(seed_seq.spawn(n_b)):
        env_seed, sample_seed = (int(s.generate_state(1)[0]) for s in child.spawn(2))
        rng = np.random.default_rng(sample_seed)
        cfg = EnvConfig(**{**env_config.to_dict(), "horizon": n_s})
        ep = Episode(cfg, env_seed, record_trace=False)
        ret = 0.0
        for t in range(n_s):
            step_obs = ep.observations()
            feats = np.stack([o.features() for o in step_obs])
            step_masks = np.stack([o.mask for o in step_obs])
            jobs = feats.reshape(-1)
            logits = [actors[i].logits(feats[i : i + 1])[0] for i in range(n)]
            acts = []
            for i in range(n):
                a = policy_mod.masked_sample(logits[i], step_masks[i], rng)
                acts.append(a)
                logp[b, t, i] = policy_mod.action_log_prob(logits[i], step_masks[i], a)
            out = ep.step(acts)
            obs[b, t] = feats
            masks[b, t] = step_masks
            actions[b, t] = acts
            joint_obs[b, t] = jobs
            joint_reward[b, t] = out.joint_reward
            ret += out.joint_reward
        values[b] = critic.values(joint_obs[b])
        episode_returns[b] = ret
        final_max_ratio[b] = max(
            ep.state.known_count(i) for i in range(n)
        ) / cfg.area

    return RolloutBuffer(
        obs=obs,
        masks=masks,
        actions=actions,
        logp=logp,
        joint_reward=joint_reward,
        values=values,
        joint_obs=joint_obs,
        episode_returns=episode_returns,
        final_max_ratio=final_max_ratio,
    )


def compute_advantages(
    buffer: RolloutBuffer, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially weighted advantage estimates plus return targets.

    Episodes are fixed-horizon: the step after the last is terminal, so no
    bootstrap value extends past it. Advantages are normalized over the
    whole batch; the raw (unnormalized) advantages feed the return targets.
    """
    n_b, n_s = buffer.joint_reward.shape
    adv = np.zeros((n_b, n_s))
    for b in range(n_b):
        running = 0.0
        for t in reversed(range(n_s)):
            next_v = buffer.values[b, t + 1] if t + 1 < n_s else 0.0
            delta = buffer.joint_reward[b, t] + gamma * next_v - buffer.values[b, t]
            running = delta + gamma * lam * running
            adv[b, t] = running
    returns = adv + buffer.values
    centered = (adv - adv.mean()) / (adv.std() + 1e-8)
    return centered, returns


def surrogate_loss_and_grads(actor, obs, masks, actions, logp_old, corrected_adv, clip_eps):
    """Clipped ratio objective (to maximize) and its parameter gradients."""
    logits, cache = actor.net.forward(obs, need_cache=True)
    logp_new, lcache = categorical_logp_forward(logits, masks, actions)
    ratio = np.exp(logp_new - logp_old)
    unclipped = ratio * corrected_adv
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * corrected_adv
    loss = np.minimum(unclipped, clipped).mean()
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite surrogate loss {loss}")
    B = obs.shape[0]
    take_unclipped = unclipped <= clipped
    dlogp = np.where(take_unclipped, ratio * corrected_adv, 0.0) / B
    dlogits = categorical_logp_backward(dlogp, lcache)
    grads = actor.net.backward(dlogits, cache)
    return float(loss), grads


def critic_loss_and_grads(critic, joint_obs, returns):
    """Mean squared error of value predictions and its gradients."""
    values, cache = critic.net.forward(joint_obs, need_cache=True)
    if values.ndim == 2:
        values = values[:, 0]
    err = values - returns
    loss = float(np.mean(err**2))
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite critic loss {loss}")
    dv = 2.0 * err / err.size
    if isinstance(critic.net, nets.BranchedCritic):
        grads = critic.net.backward(dv, cache)
    else:
        grads = critic.net.backward(dv[:, None], cache)
    return loss, grads


def update_actors_sequential(
    actors, buffer: RolloutBuffer, advantages: np.ndarray, config: TrainConfig, rng
) -> dict:
    """One sequential pass over all actors, in a fresh shuffled order."""
    n = len(actors)
    B = buffer.n_steps_total
    dim = buffer.obs.shape[-1]
    corrected = advantages.reshape(B).copy()
    order = [int(i) for i in rng.permutation(n)]
    losses = {}
    for k in order:
        obs_k = buffer.obs[:, :, k, :].reshape(B, dim)
        masks_k = buffer.masks[:, :, k, :].reshape(B, -1)
        actions_k = buffer.actions[:, :, k].reshape(B)
        logp_old = buffer.logp[:, :, k].reshape(B)
        loss = None
        for _ in range(config.ppo_epochs):
            loss, grads = surrogate_loss_and_grads(
                actors[k], obs_k, masks_k, actions_k, logp_old, corrected, config.clip_eps
            )
            sgd_ascent(actors[k].params, grads, config.learning_rate)
        losses[k] = loss
        logits = actors[k].net.forward(obs_k)
        logp_new, _ = categorical_logp_forward(logits, masks_k, actions_k)
        corrected *= np.exp(logp_new - logp_old)
    return {"order": order, "losses": losses}


def update_critic(critic, buffer: RolloutBuffer, returns: np.ndarray, config: TrainConfig):
    """Regress values onto return targets; returns (loss before, after)."""
    B = buffer.n_steps_total
    joint = buffer.joint_obs.reshape(B, -1)
    target = returns.reshape(B)
    loss_before = None
    for _ in range(config.ppo_epochs):
        loss, grads = critic_loss_and_grads(critic, joint, target)
        if loss_before is None:
            loss_before = loss
        if isinstance(critic.net, nets.BranchedCritic):
            critic.net.apply_grads(grads, -config.learning_rate)
        else:
            sgd_descent(critic.net.params, grads, config.learning_rate)
    values = critic.values(joint)
    loss_after = float(np.mean((values - target) ** 2))
    return loss_before, loss_after


def build_actors_and_critic(env_config: EnvConfig, train_config: TrainConfig, seed_seq):
    dim = obs_dim_for(env_config)
    n = env_config.n_agents
    rngs = [np.random.default_rng(s) for s in seed_seq.spawn(n + 1)]
    if train_config.arch == "mlp":
        actors = [
            policy_mod.MlpActor(dim, rngs[i], hidden=train_config.hidden_sizes)
            for i in range(n)
        ]
        critic = policy_mod.MlpCritic(dim * n, rngs[n], hidden=train_config.hidden_sizes)
    else:
        actors = [policy_mod.CnnActor(dim, rngs[i]) for i in range(n)]
        critic = policy_mod.CnnCritic(dim, n, rngs[n])
    return actors, critic


def save_snapshot(path, actors, critic, env_config, train_config) -> None:
    params = {}
    for i, actor in enumerate(actors):
        for k, v in actor.params.items():
            params[f"actor{i}__{k}"] = v
    for k, v in critic.params.items():
        params[f"critic__{k}"] = v
    meta = {
        "n_agents": env_config.n_agents,
        "obs_dim": obs_dim_for(env_config),
        "hidden": list(train_config.hidden_sizes),
    }
    policy_mod.save_checkpoint(path, train_config.arch, params, meta)


def load_actor_from_snapshot(path, agent: int, obs_dim: int):
    arch, params, meta = policy_mod.load_checkpoint(path)
    prefix = f"actor{agent}__"
    actor_params = {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}
    if not actor_params:
        raise ValueError(f"no parameters for agent {agent} in {path}")
    actor = policy_mod.build_actor(arch, obs_dim, meta)
    policy_mod.actor_params_into(actor, actor_params)
    return actor


@dataclass
class TrainRecord:
    iteration: int
    mean_return: float
    exploration_ratio: float
    actor_losses: list[float]
    critic_loss: float


def train(
    env_config: EnvConfig,
    train_config: TrainConfig,
    seed: int,
    out_dir: str,
    progress_every: int = 0,
) -> list[TrainRecord]:
    """Full training loop: collect, estimate, update, log, checkpoint."""
    os.makedirs(out_dir, exist_ok=True)
    root = np.random.SeedSequence(seed)
    init_seq, shuffle_seq, rollout_seq = root.spawn(3)
    actors, critic = build_actors_and_critic(env_config, train_config, init_seq)
    shuffle_rng = np.random.default_rng(shuffle_seq.generate_state(1)[0])
    rollout_children = rollout_seq.spawn(train_config.episodes)

    save_snapshot(
        os.path.join(out_dir, "checkpoint_init.npz"), actors, critic, env_config, train_config
    )
    curve_path = os.path.join(out_dir, "learning_curve.csv")
    n = env_config.n_agents
    history: list[TrainRecord] = []
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "mean_return", "exploration_ratio", "critic_loss"]
            + [f"actor_loss_{i}" for i in range(n)]
        )
        for it in range(train_config.episodes):
            buffer = collect_rollout(
                env_config, actors, critic, train_config, rollout_children[it]
            )
            advantages, returns = compute_advantages(
                buffer, train_config.gamma, train_config.gae_lambda
            )
            diag = update_actors_sequential(actors, buffer, advantages, train_config, shuffle_rng)
            _, critic_loss = update_critic(critic, buffer, returns, train_config)
            record = TrainRecord(
                iteration=it,
                mean_return=float(buffer.episode_returns.mean()),
                exploration_ratio=float(buffer.final_max_ratio.mean()),
                actor_losses=[diag["losses"][i] for i in range(n)],
                critic_loss=critic_loss,
            )
            history.append(record)
            writer.writerow(
                [it, repr(record.mean_return), repr(record.exploration_ratio), repr(critic_loss)]
                + [repr(v) for v in record.actor_losses]
            )
            fh.flush()
            if train_config.checkpoint_every and (it + 1) % train_config.checkpoint_every == 0:
                save_snapshot(
                    os.path.join(out_dir, f"checkpoint_{it + 1:05d}.npz"),
                    actors, critic, env_config, train_config,
                )
            if progress_every and (it + 1) % progress_every == 0:
                print(
                    f"iter {it + 1}/{train_config.episodes} "
                    f"return={record.mean_return:.3f} explore={record.exploration_ratio:.3f}"
                )
    save_snapshot(
        os.path.join(out_dir, "checkpoint_final.npz"), actors, critic, env_config, train_config
    )
    return history
