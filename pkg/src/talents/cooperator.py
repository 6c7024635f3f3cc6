"""Strategy-conditioned cooperator trained with PPO against generated
partners.

The actor conditions on a strategy cluster through a learned per-cluster
action-bias row (E: K x 27) added to its logits with a fixed weight; the
critic never sees the cluster. Training pairs the cooperator with partners
whose actions are sampled each tick from the decoder's first-step
distribution under a per-episode latent draw, and clusters are chosen by a
priority sampler that favours the ones the cooperator currently scores
worst with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .clusters import sample_latent
from .data import derive_episode_seed
from .env import featurize, legal_actions, reset, step
from .env.featurize import canvas_shape
from .env.layout import load_builtin
from .nn.optim import (
    ParamStore, adam_step, clip_global_norm, load_checkpoint,
    save_checkpoint,
)

N_ACTIONS = 27
BIAS_WEIGHT = 2.0
PRIORITY_FLOOR = 0.02
PRIORITY_DECAY = 0.95
MASK_NEG = -1e9


class TrainingDivergence(Exception):
    """Raised when an update produces a non-finite loss."""


class CheckpointMismatch(Exception):
    """Raised when a checkpoint was trained against a different ClusterSet."""


@dataclass
class PPOConfig:
    total_steps: int = 40_000_000
    batch: int = 38_400
    n_envs: int = 16
    episode_ticks: int = 2400
    lr_schedule: tuple = (1e-3, 1e-4, 1e-5)
    gae_lambda: float = 0.99
    gamma: float = 0.995
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.02
    kl_coef: float = 0.5
    grad_clip: float = 1.0
    #: gradient passes over each on-policy batch (clipping and the KL
    #: penalty only bite after the first pass)
    update_epochs: int = 4
    trunk: int = 392
    conv_channels: tuple = (16, 32)
    temperature: float = 1.0
    layout_name: str = "open"
    #: population best-response degenerate: K=1, E frozen at zero, partners
    #: drawn from the scripted population instead of the decoder
    br_baseline: bool = False

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if len(self.lr_schedule) != 3:
            raise ValueError("lr_schedule must have three stages")


def paper_ppo_config() -> PPOConfig:
    return PPOConfig()


def desk_ppo_config() -> PPOConfig:
    """Hours-scale CPU preset (both pipelines train within one sitting)."""
    return PPOConfig(total_steps=160_000, batch=3_200, n_envs=8,
                     episode_ticks=400, trunk=64, conv_channels=(8,))


def tiny_ppo_config() -> PPOConfig:
    """Seconds-scale preset for scripted-run checks."""
    return PPOConfig(total_steps=20_000, batch=800, n_envs=2,
                     episode_ticks=100, trunk=32, conv_channels=(4,))


# ---------------------------------------------------------------------------
# Policy


class CooperatorPolicy:
    """Actor-critic with a per-cluster action bias on the actor only."""

    def __init__(self, config: PPOConfig, obs_shape: tuple, k: int,
                 seed: int = 0):
        self.config = config
        self.obs_shape = tuple(obs_shape)      # (C, H, W) policy12 canvas
        self.k = int(k)
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        channels, height, width = self.obs_shape
        for _ in config.conv_channels:
            if height >= 4 and width >= 4:     # mirrors nn pooling
                height, width = height // 2, width // 2
        flat = config.conv_channels[-1] * height * width
        for tag in ("actor", "critic"):
            prev = channels
            for i, ch in enumerate(config.conv_channels):
                self.store.init(f"{tag}.{i}.k", (ch, prev, 3, 3), rng)
                self.store.init(f"{tag}.{i}.b", (ch,), rng)
                prev = ch
            self.store.init(f"{tag}.proj.W", (flat, config.trunk), rng)
            self.store.init(f"{tag}.proj.b", (config.trunk,), rng)
        self.store.init("actor.head.W", (config.trunk, N_ACTIONS), rng)
        self.store.init("actor.head.b", (N_ACTIONS,), rng)
        self.store.init("critic.head.W", (config.trunk, 1), rng)
        self.store.init("critic.head.b", (1,), rng)
        # Zero start: conditioning is neutral until training shapes it.
        self.store.add("E", np.zeros((self.k, N_ACTIONS)))

    def _trunk(self, obs: nn.Tensor, tag: str) -> nn.Tensor:
        x = obs
        from .vae import _pool2
        for i in range(len(self.config.conv_channels)):
            x = nn.relu(nn.conv2d(x, self.store[f"{tag}.{i}.k"],
                                  self.store[f"{tag}.{i}.b"]))
            x = _pool2(x)
        n, c, h, w = x.shape
        flat = x.reshape(n, c * h * w)
        return nn.relu(nn.dense(flat, self.store[f"{tag}.proj.W"],
                                self.store[f"{tag}.proj.b"]))

    def logits_graph(self, obs_batch: np.ndarray, cluster_ids,
                     masks: np.ndarray) -> nn.Tensor:
        """Masked, bias-conditioned actor logits for a (B, C, H, W) batch."""
        feat = self._trunk(nn.Tensor(np.asarray(obs_batch)), "actor")
        logits = nn.dense(feat, self.store["actor.head.W"],
                          self.store["actor.head.b"])
        bias = nn.embedding(self.store["E"], np.asarray(cluster_ids))
        penalty = np.where(np.asarray(masks, dtype=bool), 0.0, MASK_NEG)
        return logits + bias * BIAS_WEIGHT + penalty

    def value_graph(self, obs_batch: np.ndarray) -> nn.Tensor:
        """(B,) state values; independent of the cluster by construction."""
        feat = self._trunk(nn.Tensor(np.asarray(obs_batch)), "critic")
        out = nn.dense(feat, self.store["critic.head.W"],
                       self.store["critic.head.b"])
        return out.reshape(out.shape[0])

    def action_distribution(self, obs: np.ndarray, c: int,
                            mask: np.ndarray) -> np.ndarray:
        """27 action probabilities for a single observation."""
        logits = self.logits_graph(obs[None], [c], mask[None])
        return nn.softmax(logits.data[0])

    def act(self, obs: np.ndarray, c: int, mask: np.ndarray, rng):
        """(action, action distribution, value) for one step of acting."""
        probs = self.action_distribution(obs, c, mask)
        action = int(rng.choice(N_ACTIONS, p=probs))
        value = float(self.value_graph(obs[None]).data[0])
        return action, probs, value


# ---------------------------------------------------------------------------
# Priority sampling


class PrioritySampler:
    """Softmax over negative normalized EMA returns, floored at p_min."""

    def __init__(self, k: int, temperature: float = 1.0):
        if k < 1:
            raise ValueError("need at least one cluster")
        self.k = k
        self.temperature = float(temperature)
        self.ema = np.zeros(k)
        self._seen = np.zeros(k, dtype=bool)

    def update(self, c: int, episode_return: float) -> None:
        if not self._seen[c]:
            self.ema[c] = episode_return
            self._seen[c] = True
        else:
            self.ema[c] = (PRIORITY_DECAY * self.ema[c] +
                           (1.0 - PRIORITY_DECAY) * episode_return)

    def probabilities(self) -> np.ndarray:
        if self.k == 1:
            return np.ones(1)
        spread = self.ema.std()
        if spread < 1e-12:
            scores = np.zeros(self.k)
        else:
            scores = (self.ema - self.ema.mean()) / spread
        p = nn.softmax(-scores / self.temperature)
        # Waterfill the floor: pin deficient entries, renormalize the rest.
        low = p < PRIORITY_FLOOR
        for _ in range(self.k):
            scale = (1.0 - low.sum() * PRIORITY_FLOOR) / p[~low].sum()
            adjusted = np.where(low, PRIORITY_FLOOR, p * scale)
            newly_low = adjusted < PRIORITY_FLOOR - 1e-15
            if not (newly_low & ~low).any():
                p = adjusted
                break
            low |= newly_low
        return p

    def sample(self, rng) -> int:
        return int(rng.choice(self.k, p=self.probabilities()))


# ---------------------------------------------------------------------------
# Rollouts


def generated_partner_action(vae, z: np.ndarray, state, player_idx: int,
                             rng) -> int:
    """Sample the decoder's first-step prediction, renormalized over the
    legal actions."""
    obs = featurize(state, player_idx, "encoder26")
    probs = vae.decode(z, obs, steps=1)[0]
    mask = legal_actions(state, player_idx)
    probs = np.where(mask, probs, 0.0)
    total = probs.sum()
    if total <= 0.0:
        probs = mask / mask.sum()
    else:
        probs = probs / total
    return int(rng.choice(N_ACTIONS, p=probs))


def rollout_episode(policy: CooperatorPolicy, clusters, c: int, vae,
                    layout, seed: int, rng, ticks: int,
                    scripted_partner=None) -> dict:
    """One episode with the cooperator in seat 0.

    The partner in seat 1 is either decoder-generated from a single
    per-episode latent draw, or a scripted policy (BR baseline).
    """
    state = reset(layout, seed, episode_ticks=ticks)
    z = None
    if scripted_partner is None:
        z = sample_latent(clusters, c, rng)
    obs_buf, act_buf, dist_buf, value_buf = [], [], [], []
    reward_buf, mask_buf = [], []
    while not state.done:
        obs = featurize(state, 0, "policy12")
        mask = legal_actions(state, 0)
        action, probs, value = policy.act(obs, c, mask, rng)
        if scripted_partner is not None:
            partner_action = scripted_partner.act(state, 1)
        else:
            partner_action = generated_partner_action(vae, z, state, 1, rng)
        state, _, reward = step(state, action, partner_action)
        obs_buf.append(obs)
        act_buf.append(action)
        dist_buf.append(probs)
        value_buf.append(value)
        reward_buf.append(reward)
        mask_buf.append(mask)
    actions = np.asarray(act_buf, dtype=np.int64)
    dists = np.asarray(dist_buf)
    return {
        "obs": np.asarray(obs_buf),
        "actions": actions,
        "old_dists": dists,
        "log_probs": np.log(dists[np.arange(len(actions)), actions]),
        "values": np.asarray(value_buf),
        "rewards": np.asarray(reward_buf, dtype=np.float64),
        "masks": np.asarray(mask_buf),
        "cluster": c,
        "episode_return": float(state.score),
    }


def compute_gae(rewards: np.ndarray, values: np.ndarray, gamma: float,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    """(advantages, value targets) for one completed episode."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    advantages = np.zeros_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        next_value = values[t + 1] if t + 1 < len(values) else 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        acc = delta + gamma * lam * acc
        advantages[t] = acc
    return advantages, advantages + values


# ---------------------------------------------------------------------------
# PPO update


def _batch_from_episodes(episodes: list, config: PPOConfig) -> dict:
    pieces = {key: [] for key in ("obs", "actions", "log_probs", "masks",
                                  "old_dists", "advantages", "returns",
                                  "clusters")}
    for ep in episodes:
        adv, ret = compute_gae(ep["rewards"], ep["values"], config.gamma,
                               config.gae_lambda)
        pieces["obs"].append(ep["obs"])
        pieces["actions"].append(ep["actions"])
        pieces["log_probs"].append(ep["log_probs"])
        pieces["old_dists"].append(ep["old_dists"])
        pieces["masks"].append(ep["masks"])
        pieces["advantages"].append(adv)
        pieces["returns"].append(ret)
        pieces["clusters"].append(np.full(len(ep["actions"]), ep["cluster"],
                                          dtype=np.int64))
    return {key: np.concatenate(vals) for key, vals in pieces.items()}


def ppo_update(policy: CooperatorPolicy, batch: dict, config: PPOConfig,
               lr: float) -> dict:
    """One clipped-surrogate update on an on-policy batch."""
    n = len(batch["actions"])
    advantages = batch["advantages"]
    spread = advantages.std()
    if spread > 1e-8:
        advantages = (advantages - advantages.mean()) / spread

    try:
        return _ppo_step(policy, batch, config, lr, advantages, n)
    except FloatingPointError as exc:
        raise TrainingDivergence(f"non-finite value in update: {exc}") \
            from exc


def _ppo_step(policy, batch, config, lr, advantages, n):
    logits = policy.logits_graph(batch["obs"], batch["clusters"],
                                 batch["masks"])
    log_probs = nn.log_softmax(logits)
    taken = log_probs[np.arange(n), batch["actions"]]
    ratio = nn.exp(taken - batch["log_probs"])
    clipped = np.clip(ratio.data, 1.0 - config.clip, 1.0 + config.clip)
    # Elementwise min of r*A and clip(r)*A; the clipped branch is constant,
    # so it contributes value but no gradient.
    unclipped_obj = ratio.data * advantages
    clipped_obj = clipped * advantages
    take_unclipped = (unclipped_obj <= clipped_obj).astype(float)
    surrogate = (ratio * (advantages * take_unclipped)).mean() + float(
        np.mean(clipped_obj * (1.0 - take_unclipped)))

    values = policy.value_graph(batch["obs"])
    value_loss = nn.square(values - batch["returns"]).mean()

    probs = nn.exp(log_probs)
    entropy = -(probs * log_probs).sum(axis=1).mean()

    # Fixed penalty on KL(old || new) from the behaviour distributions.
    old_probs = batch["old_dists"]
    cross = -(nn.Tensor(old_probs) * log_probs).sum(axis=1).mean()
    old_entropy = float(
        -(old_probs * np.log(np.maximum(old_probs, 1e-12))).sum(axis=1)
        .mean())
    kl = cross - old_entropy

    loss = (-surrogate + config.value_coef * value_loss
            - config.entropy_coef * entropy + config.kl_coef * kl)
    if not np.isfinite(loss.data).all():
        raise TrainingDivergence(f"non-finite loss: {loss.data!r}")

    policy.store.zero_grad()
    loss.backward()
    if config.br_baseline:
        policy.store["E"].grad = None     # frozen at zero
    grad_norm = clip_global_norm(policy.store, config.grad_clip)
    adam_step(policy.store, lr)

    return {
        "loss": float(loss.data),
        "surrogate": float(surrogate.data),
        "value_loss": float(value_loss.data),
        "entropy": float(entropy.data),
        "kl": float(kl.data),
        "clip_fraction": float((take_unclipped == 0.0).mean()),
        "grad_norm": grad_norm,
    }


def lr_for_step(config: PPOConfig, steps_done: int) -> float:
    """Three equal thirds of training mapped onto the schedule stages."""
    stage = min(int(3 * steps_done / config.total_steps), 2)
    return config.lr_schedule[stage]


# ---------------------------------------------------------------------------
# Training loop


def train_cooperator(vae, clusters, config: PPOConfig, seed: int,
                     scripted_partners=None, progress=None):
    """Algorithm-1 loop; returns (policy, curve).

    ``scripted_partners`` replaces decoder partners with a scripted
    population (required when ``config.br_baseline``); episodes then cycle
    through the population uniformly at random.
    """
    if config.br_baseline and not scripted_partners:
        raise ValueError("BR baseline requires scripted partners")
    layout = load_builtin(config.layout_name)
    k = 1 if config.br_baseline else clusters.k
    policy = CooperatorPolicy(config, canvas_shape(layout, "policy12"), k,
                              seed=seed)
    sampler = PrioritySampler(k, config.temperature)
    rng = np.random.default_rng(seed)
    curve, steps_done, episode_idx = [], 0, 0
    while steps_done < config.total_steps:
        episodes = []
        batch_steps = 0
        while batch_steps < config.batch:
            c = sampler.sample(rng)
            partner = None
            if scripted_partners is not None:
                partner = scripted_partners[
                    int(rng.integers(len(scripted_partners)))]
            ep_seed = derive_episode_seed(seed, 0, episode_idx)
            episode = rollout_episode(
                policy, clusters, c, vae, layout, ep_seed, rng,
                config.episode_ticks, scripted_partner=partner)
            sampler.update(c, episode["episode_return"])
            episodes.append(episode)
            batch_steps += len(episode["actions"])
            episode_idx += 1
        batch = _batch_from_episodes(episodes, config)
        lr = lr_for_step(config, steps_done)
        for _ in range(config.update_epochs):
            diag = ppo_update(policy, batch, config, lr)
        steps_done += batch_steps
        row = dict(diag, steps=steps_done,
                   mean_return=float(np.mean(
                       [ep["episode_return"] for ep in episodes])),
                   priorities=sampler.probabilities().tolist())
        curve.append(row)
        if progress is not None:
            progress(row)
    return policy, curve


# ---------------------------------------------------------------------------
# Persistence


def save_cooperator(policy: CooperatorPolicy, path, clusters) -> None:
    from dataclasses import asdict
    save_checkpoint(policy.store, path, extra={
        "config": asdict(policy.config),
        "obs_shape": list(policy.obs_shape),
        "k": policy.k,
        "cluster_hash": clusters.content_hash(),
    })


def load_cooperator(path, clusters) -> CooperatorPolicy:
    # The store layout depends on the config in the checkpoint, so read the
    # header first, then load into a freshly shaped policy.
    import json
    import struct
    with open(path, "rb") as fh:
        blob = fh.read()
    (hlen,) = struct.unpack("<I", blob[4:8])
    extra = json.loads(blob[8:8 + hlen].decode("utf-8"))["extra"]
    if extra["cluster_hash"] != clusters.content_hash():
        raise CheckpointMismatch(
            f"checkpoint was trained against ClusterSet "
            f"{extra['cluster_hash']}, not {clusters.content_hash()}")
    config = PPOConfig(**{
        key: tuple(value) if key in ("lr_schedule", "conv_channels")
        else value for key, value in extra["config"].items()})
    policy = CooperatorPolicy(config, tuple(extra["obs_shape"]),
                              extra["k"])
    load_checkpoint(policy.store, path)
    return policy
