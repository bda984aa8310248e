"""Actor and critic heads, masked action selection, scripted baselines.

Two actor architectures are provided: a wide MLP over the flat observation
and a conv variant that treats the 3x3 view as an image. Both end in 10
logits; infeasible actions are driven to probability zero before sampling,
which is the safety guarantee the environment masks exist for.
"""

from __future__ import annotations

import json

import numpy as np

from .grid import ACTION_COMM, ACTION_STAY, N_ACTIONS
from .nets import BranchedCritic, CnnNet, MlpNet, categorical_logp_forward, masked_log_softmax
from .obsmap import Observation

CHECKPOINT_VERSION = 1


class MlpActor:
    arch = "mlp"

    def __init__(self, obs_dim: int, rng, hidden=(2400, 300)):
        self.obs_dim = obs_dim
        self.hidden = tuple(hidden)
        self.net = MlpNet(obs_dim, self.hidden, N_ACTIONS, rng)

    @property
    def params(self):
        return self.net.params

    def logits(self, obs_batch: np.ndarray) -> np.ndarray:
        return self.net.forward(np.atleast_2d(obs_batch))


class CnnActor:
    arch = "cnn"

    def __init__(self, obs_dim: int, rng, hidden=None):
        self.obs_dim = obs_dim
        self.hidden = None
        self.net = CnnNet(obs_dim, N_ACTIONS, rng)

    @property
    def params(self):
        return self.net.params

    def logits(self, obs_batch: np.ndarray) -> np.ndarray:
        return self.net.forward(np.atleast_2d(obs_batch))


class MlpCritic:
    arch = "mlp"

    def __init__(self, joint_dim: int, rng, hidden=(2400, 300)):
        self.joint_dim = joint_dim
        self.hidden = tuple(hidden)
        self.net = MlpNet(joint_dim, self.hidden, 1, rng)

    @property
    def params(self):
        return self.net.params

    def values(self, joint_obs: np.ndarray) -> np.ndarray:
        return self.net.forward(np.atleast_2d(joint_obs))[:, 0]


class CnnCritic:
    arch = "cnn"

    def __init__(self, obs_dim: int, n_agents: int, rng):
        self.net = BranchedCritic(obs_dim, n_agents, rng)

    @property
    def params(self):
        return self.net.all_params()

    def values(self, joint_obs: np.ndarray) -> np.ndarray:
        return self.net.forward(np.atleast_2d(joint_obs))


def masked_sample(logits: np.ndarray, mask: np.ndarray, rng) -> int:
    """Draw one action from the masked categorical over 10 logits."""
    logits = np.asarray(logits, dtype=np.float64).reshape(1, -1)
    mask = np.asarray(mask).reshape(1, -1)
    logp = masked_log_softmax(logits, mask)[0]
    probs = np.exp(logp)
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    action = int(np.searchsorted(cdf, u, side="right"))
    return min(action, len(probs) - 1)


def action_log_prob(logits: np.ndarray, mask: np.ndarray, action: int) -> float:
    logp, _ = categorical_logp_forward(
        np.asarray(logits, dtype=np.float64).reshape(1, -1),
        np.asarray(mask).reshape(1, -1),
        np.asarray([action]),
    )
    return float(logp[0])


# ---------------------------------------------------------------------------
# scripted baselines


GREEDY_ESCAPE_PROB = 0.05


def baseline_greedy_frontier(obs: Observation, rng) -> int:
    """Head for the nearest frontier cluster.

    Moves along the direction with the shortest mean frontier path, taking
    the denser direction on ties and the fixed direction order after that.
    A small random-move mixture breaks the flip-flop cycles a purely
    reactive rule can fall into. With no frontier in sight, wander over
    open moves. Never communicates.
    """
    n_share = obs.fpr[0::3]
    mu = obs.fpr[1::3]
    open_moves = [d for d in range(8) if obs.mask[d]]
    candidates = [d for d in open_moves if n_share[d] > 0]
    if candidates and rng.random() >= GREEDY_ESCAPE_PROB:
        return min(candidates, key=lambda d: (mu[d], -n_share[d], d))
    if open_moves:
        return int(open_moves[int(rng.integers(len(open_moves)))])
    return ACTION_STAY


def baseline_comm_on_contact(obs: Observation, rng) -> int:
    """Flip a coin to share whenever another robot is in range."""
    if int(obs.net.sum()) >= 2 and rng.random() < 0.5:
        return ACTION_COMM
    return baseline_greedy_frontier(obs, rng)


def random_available(obs: Observation, rng) -> int:
    """Uniform draw over the set mask bits; the documented client rule."""
    avail = np.flatnonzero(obs.mask)
    return int(avail[int(rng.integers(len(avail)))])


def always_stay(obs: Observation, rng) -> int:
    return ACTION_STAY


class ScriptedPolicy:
    def __init__(self, fn):
        self.fn = fn

    def act(self, obs: Observation, rng) -> int:
        return self.fn(obs, rng)


class NeuralPolicy:
    def __init__(self, actor):
        self.actor = actor

    def act(self, obs: Observation, rng) -> int:
        logits = self.actor.logits(obs.features()[None, :])[0]
        return masked_sample(logits, obs.mask, rng)


BASELINES = {
    "greedy": baseline_greedy_frontier,
    "comm": baseline_comm_on_contact,
    "random": random_available,
    "stay": always_stay,
}


def make_policy(spec: str, obs_dim: int):
    """Resolve a policy name or checkpoint path into a policy object."""
    if spec in BASELINES:
        return ScriptedPolicy(BASELINES[spec])
    try:
        arch, params, meta = load_checkpoint(spec)
    except FileNotFoundError:
        raise ValueError(f"unknown policy {spec!r}: not a baseline name or checkpoint path")
    actor = build_actor(arch, obs_dim, meta)
    actor_params_into(actor, params)
    return NeuralPolicy(actor)


def build_actor(arch: str, obs_dim: int, meta: dict):
    rng = np.random.default_rng(0)
    if arch == "mlp":
        hidden = tuple(meta.get("hidden", (2400, 300)))
        return MlpActor(obs_dim, rng, hidden=hidden)
    if arch == "cnn":
        return CnnActor(obs_dim, rng)
    raise ValueError(f"unknown architecture tag {arch!r}")


def actor_params_into(actor, params: dict) -> None:
    for k, v in params.items():
        if k not in actor.params:
            raise ValueError(f"checkpoint parameter {k!r} does not fit the {actor.arch} actor")
        if actor.params[k].shape != v.shape:
            raise ValueError(
                f"shape mismatch for {k!r}: checkpoint {v.shape}, model {actor.params[k].shape}"
            )
        actor.params[k][...] = v


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, arch: str, params: dict, meta: dict | None = None) -> None:
    """Exact binary container: architecture tag, metadata, named arrays."""
    header = {
        "format": "checkpoint",
        "version": CHECKPOINT_VERSION,
        "arch": arch,
        "meta": meta or {},
        "keys": sorted(params),
    }
    arrays = {f"param__{k}": np.ascontiguousarray(v) for k, v in params.items()}
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path):
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format") != "checkpoint" or header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"not a readable checkpoint: {path}")
        params = {k: data[f"param__{k}"] for k in header["keys"]}
    return header["arch"], params, header["meta"]
