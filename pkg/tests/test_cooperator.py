import numpy as np
import pytest

from talents.clusters import ClusterSet
from talents.cooperator import (
    BIAS_WEIGHT, CheckpointMismatch, CooperatorPolicy, PPOConfig,
    PrioritySampler, PRIORITY_FLOOR, compute_gae, desk_ppo_config,
    generated_partner_action, load_cooperator, lr_for_step, paper_ppo_config,
    ppo_update, rollout_episode, save_cooperator, tiny_ppo_config,
    train_cooperator,
)
from talents.env import reset, legal_actions
from talents.env.layout import load_builtin

OBS_SHAPE = (12, 5, 5)


class StubVae:
    """Decoder stand-in emitting one fixed first-step distribution."""

    def __init__(self, probs=None):
        self.probs = (np.full(27, 1.0 / 27.0) if probs is None
                      else np.asarray(probs, dtype=np.float64))

    def decode(self, z, obs, steps=None):
        return np.tile(self.probs, ((steps or 1), 1))


def _toy_clusters(k=2, dim=4):
    means = np.zeros((k, dim))
    means[:, 0] = np.arange(k)
    return ClusterSet(means=means, variances=np.full((k, dim), 1e-4),
                      counts=np.full(k, 10))


def _policy(k=1, seed=0, **overrides):
    config = tiny_ppo_config()
    for key, value in overrides.items():
        setattr(config, key, value)
    return CooperatorPolicy(config, OBS_SHAPE, k, seed=seed)


def _mask(legal=range(27)):
    mask = np.zeros(27, dtype=bool)
    mask[list(legal)] = True
    return mask


# ---------------------------------------------------------------------------
# Config


def test_config_presets_and_validation():
    paper = paper_ppo_config()
    assert (paper.total_steps, paper.batch, paper.n_envs) == (40_000_000,
                                                              38_400, 16)
    assert paper.lr_schedule == (1e-3, 1e-4, 1e-5)
    assert (paper.gae_lambda, paper.gamma) == (0.99, 0.995)
    assert (paper.clip, paper.value_coef, paper.entropy_coef,
            paper.kl_coef, paper.grad_clip) == (0.2, 0.5, 0.02, 0.5, 1.0)
    assert paper.trunk == 392
    desk = desk_ppo_config()
    assert (desk.total_steps, desk.n_envs, desk.episode_ticks,
            desk.trunk) == (160_000, 8, 400, 64)
    with pytest.raises(ValueError):
        PPOConfig(clip=0.0)
    with pytest.raises(ValueError):
        PPOConfig(gamma=1.0)
    with pytest.raises(ValueError):
        PPOConfig(lr_schedule=(1e-3,))


def test_lr_schedule_thirds():
    config = tiny_ppo_config()
    config.total_steps = 900
    assert lr_for_step(config, 0) == 1e-3
    assert lr_for_step(config, 299) == 1e-3
    assert lr_for_step(config, 300) == 1e-4
    assert lr_for_step(config, 600) == 1e-5
    assert lr_for_step(config, 899) == 1e-5


# ---------------------------------------------------------------------------
# Biased logits


def test_zero_embedding_bias_is_neutral():
    policy = _policy(k=3)
    obs = np.random.default_rng(0).random(OBS_SHAPE)
    mask = _mask()
    base = policy.action_distribution(obs, 0, mask)
    for c in (1, 2):
        np.testing.assert_allclose(policy.action_distribution(obs, c, mask),
                                   base)


def test_distinct_bias_rows_change_the_distribution():
    policy = _policy(k=2)
    policy.store["E"].data[0, 3] = 2.0
    policy.store["E"].data[1, 9] = 2.0
    obs = np.random.default_rng(1).random(OBS_SHAPE)
    mask = _mask()
    d0 = policy.action_distribution(obs, 0, mask)
    d1 = policy.action_distribution(obs, 1, mask)
    assert np.abs(d0 - d1).sum() > 1e-3
    assert d0[3] > d1[3] and d1[9] > d0[9]


def test_constant_bias_shift_leaves_distribution_unchanged():
    policy = _policy(k=2)
    policy.store["E"].data[0] = np.random.default_rng(2).random(27)
    obs = np.random.default_rng(3).random(OBS_SHAPE)
    mask = _mask(range(0, 27, 2))
    before = policy.action_distribution(obs, 0, mask)
    policy.store["E"].data[0] += 7.5
    np.testing.assert_allclose(policy.action_distribution(obs, 0, mask),
                               before, atol=1e-9)


def test_bias_weight_applied_to_logits():
    policy = _policy(k=1)
    obs = np.zeros(OBS_SHAPE)
    mask = _mask()
    plain = policy.logits_graph(obs[None], [0], mask[None]).data[0]
    policy.store["E"].data[0, 5] = 1.0
    biased = policy.logits_graph(obs[None], [0], mask[None]).data[0]
    assert biased[5] - plain[5] == pytest.approx(BIAS_WEIGHT)


def test_masked_actions_never_sampled_and_get_zero_probability():
    rng = np.random.default_rng(4)
    policy = _policy(k=2)
    for _ in range(20):
        legal = rng.choice(27, size=rng.integers(1, 27), replace=False)
        mask = _mask(legal)
        obs = rng.random(OBS_SHAPE)
        probs = policy.action_distribution(obs, 0, mask)
        assert probs[~mask].max() < 1e-12
        action, _, _ = policy.act(obs, 0, mask, rng)
        assert mask[action]


def test_critic_ignores_the_cluster():
    policy = _policy(k=3)
    obs = np.random.default_rng(5).random(OBS_SHAPE)
    value = policy.value_graph(obs[None])
    value.sum().backward()
    assert policy.store["E"].grad is None


# ---------------------------------------------------------------------------
# Priority sampler


def test_priority_uniform_when_returns_equal():
    sampler = PrioritySampler(4)
    for c in range(4):
        sampler.update(c, 3.0)
    np.testing.assert_allclose(sampler.probabilities(), 0.25)


def test_priority_prefers_the_worst_cluster():
    sampler = PrioritySampler(3)
    for c, ret in ((0, 5.0), (1, 1.0), (2, 5.0)):
        sampler.update(c, ret)
    p = sampler.probabilities()
    assert p[1] > p[0] and p[1] > p[2]
    assert p.sum() == pytest.approx(1.0)


def test_priority_floor_holds_under_extreme_returns():
    sampler = PrioritySampler(8, temperature=0.05)
    for c in range(8):
        sampler.update(c, 1000.0 if c else -1000.0)
    p = sampler.probabilities()
    assert p.min() >= PRIORITY_FLOOR - 1e-12
    assert p.sum() == pytest.approx(1.0)
    assert p[0] == p.max()


def test_priority_ema_decay():
    sampler = PrioritySampler(2)
    sampler.update(0, 10.0)
    assert sampler.ema[0] == pytest.approx(10.0)   # first sets the estimate
    sampler.update(0, 0.0)
    assert sampler.ema[0] == pytest.approx(9.5)    # 0.95 * 10 + 0.05 * 0


def test_priority_sampling_frequencies_match_probabilities():
    sampler = PrioritySampler(3)
    for c, ret in ((0, 2.0), (1, 0.0), (2, 1.0)):
        sampler.update(c, ret)
    p = sampler.probabilities()
    rng = np.random.default_rng(6)
    draws = np.bincount([sampler.sample(rng) for _ in range(100_000)],
                        minlength=3) / 100_000
    np.testing.assert_allclose(draws, p, atol=0.01)


# ---------------------------------------------------------------------------
# GAE


def test_gae_hand_oracle():
    rewards = np.array([1.0, 0.0, 2.0])
    values = np.array([0.5, 0.25, 0.125])
    gamma, lam = 0.9, 0.8
    deltas = np.array([1.0 + 0.9 * 0.25 - 0.5,
                       0.0 + 0.9 * 0.125 - 0.25,
                       2.0 - 0.125])
    expected = np.array([
        deltas[0] + 0.72 * (deltas[1] + 0.72 * deltas[2]),
        deltas[1] + 0.72 * deltas[2],
        deltas[2]])
    adv, ret = compute_gae(rewards, values, gamma, lam)
    np.testing.assert_allclose(adv, expected)
    np.testing.assert_allclose(ret, expected + values)


def test_gae_lambda_limits():
    rng = np.random.default_rng(7)
    rewards, values = rng.random(6), rng.random(6)
    gamma = 0.95
    adv0, _ = compute_gae(rewards, values, gamma, 0.0)
    next_values = np.r_[values[1:], 0.0]
    np.testing.assert_allclose(adv0,
                               rewards + gamma * next_values - values)
    adv1, _ = compute_gae(rewards, values, gamma, 1.0)
    discounted = np.array([sum(gamma ** (j - t) * rewards[j]
                               for j in range(t, 6)) for t in range(6)])
    np.testing.assert_allclose(adv1, discounted - values)


# ---------------------------------------------------------------------------
# PPO update


def _fake_batch(policy, rng, n=32, cluster=0, advantages=None,
                logp_shift=0.0):
    obs = rng.random((n,) + OBS_SHAPE)
    masks = np.ones((n, 27), dtype=bool)
    clusters = np.full(n, cluster, dtype=np.int64)
    logits = policy.logits_graph(obs, clusters, masks).data
    dists = np.exp(logits - logits.max(axis=1, keepdims=True))
    dists /= dists.sum(axis=1, keepdims=True)
    actions = np.array([rng.choice(27, p=row) for row in dists])
    logp = np.log(dists[np.arange(n), actions]) + logp_shift
    if advantages is None:
        advantages = rng.standard_normal(n)
    return {
        "obs": obs, "actions": actions, "log_probs": logp,
        "old_dists": dists, "masks": masks, "clusters": clusters,
        "advantages": np.asarray(advantages, dtype=np.float64),
        "returns": rng.random(n),
    }


def test_zero_advantage_means_zero_surrogate():
    policy = _policy(k=1)
    batch = _fake_batch(policy, np.random.default_rng(8),
                        advantages=np.zeros(32))
    diag = ppo_update(policy, batch, policy.config, lr=1e-4)
    assert diag["surrogate"] == pytest.approx(0.0, abs=1e-12)
    assert np.isfinite(diag["loss"])


def test_fresh_batch_has_unit_ratios_and_zero_kl():
    policy = _policy(k=1)
    batch = _fake_batch(policy, np.random.default_rng(9))
    diag = ppo_update(policy, batch, policy.config, lr=1e-4)
    assert diag["clip_fraction"] == 0.0
    assert diag["kl"] == pytest.approx(0.0, abs=1e-9)
    # With unit ratios the surrogate is the mean normalized advantage = 0.
    assert diag["surrogate"] == pytest.approx(0.0, abs=1e-9)


def test_ratio_clipping_engages_for_stale_log_probs():
    policy = _policy(k=1)
    # Pretend the behaviour policy put e^1 more mass on each action taken:
    # every ratio is exp(-1) ~ 0.37, far below the 0.8 clip edge.
    batch = _fake_batch(policy, np.random.default_rng(10), logp_shift=1.0)
    advantages = batch["advantages"]
    diag = ppo_update(policy, batch, policy.config, lr=1e-4)
    normalized = (advantages - advantages.mean()) / advantages.std()
    ratio = np.exp(-1.0)
    expected = np.where(ratio * normalized <= 0.8 * normalized,
                        ratio * normalized, 0.8 * normalized).mean()
    assert diag["surrogate"] == pytest.approx(expected, rel=1e-9)
    assert diag["clip_fraction"] == pytest.approx(
        (ratio * normalized > 0.8 * normalized).mean())


def test_divergence_aborts():
    policy = _policy(k=1)
    batch = _fake_batch(policy, np.random.default_rng(11))
    batch["returns"][0] = np.nan
    from talents.cooperator import TrainingDivergence
    with pytest.raises(TrainingDivergence):
        ppo_update(policy, batch, policy.config, lr=1e-4)


def test_br_baseline_keeps_embedding_frozen():
    policy = _policy(k=1, br_baseline=True)
    batch = _fake_batch(policy, np.random.default_rng(12))
    ppo_update(policy, batch, policy.config, lr=1e-3)
    np.testing.assert_array_equal(policy.store["E"].data, 0.0)


# ---------------------------------------------------------------------------
# Desk-scale learning checks (stub environments, no gridworld)


def _bandit_rollout(policy, rng, n, reward_fn, clusters=(0,)):
    """n one-step episodes on a single zero observation."""
    episodes = []
    mask = _mask(range(3))
    obs = np.zeros(OBS_SHAPE)
    for _ in range(n):
        c = int(rng.choice(clusters))
        action, probs, value = policy.act(obs, c, mask, rng)
        reward = reward_fn(c, action)
        episodes.append({
            "obs": obs[None], "actions": np.array([action]),
            "old_dists": probs[None],
            "log_probs": np.array([np.log(probs[action])]),
            "values": np.array([value]),
            "rewards": np.array([reward]),
            "masks": mask[None], "cluster": c,
            "episode_return": reward,
        })
    return episodes


def test_bandit_sanity_greedy_within_200_updates():
    from talents.cooperator import _batch_from_episodes

    policy = _policy(k=1)
    config = policy.config
    rng = np.random.default_rng(13)
    for update in range(200):
        episodes = _bandit_rollout(policy, rng, 32,
                                   lambda c, a: 1.0 if a == 1 else 0.0)
        batch = _batch_from_episodes(episodes, config)
        for _ in range(config.update_epochs):
            ppo_update(policy, batch, config, lr=5e-3)
        probs = policy.action_distribution(np.zeros(OBS_SHAPE), 0,
                                           _mask(range(3)))
        if probs[1] > 0.95:
            break
    assert probs[1] > 0.95


def test_conditioning_separates_conflicting_best_responses():
    from talents.cooperator import _batch_from_episodes

    policy = _policy(k=2)
    config = policy.config
    rng = np.random.default_rng(14)
    rewarded = {0: 0, 1: 2}
    for _ in range(200):
        episodes = _bandit_rollout(
            policy, rng, 32,
            lambda c, a: 1.0 if a == rewarded[c] else 0.0,
            clusters=(0, 1))
        batch = _batch_from_episodes(episodes, config)
        for _ in range(config.update_epochs):
            ppo_update(policy, batch, config, lr=5e-3)
    mask = _mask(range(3))
    d0 = policy.action_distribution(np.zeros(OBS_SHAPE), 0, mask)
    d1 = policy.action_distribution(np.zeros(OBS_SHAPE), 1, mask)
    assert 0.5 * np.abs(d0 - d1).sum() > 0.2
    assert d0[0] > d0[2] and d1[2] > d1[0]


# ---------------------------------------------------------------------------
# Rollouts against the real environment


def test_generated_partner_renormalizes_illegal_mass():
    layout = load_builtin("open")
    state = reset(layout, 3, episode_ticks=10)
    mask = legal_actions(state, 1)
    illegal = int(np.flatnonzero(~mask)[0])
    probs = np.zeros(27)
    probs[illegal] = 1.0
    vae = StubVae(probs)
    rng = np.random.default_rng(15)
    for _ in range(20):
        action = generated_partner_action(vae, np.zeros(4), state, 1, rng)
        assert mask[action]


def test_rollout_deterministic_and_accounted():
    from talents.env.featurize import canvas_shape

    layout = load_builtin("open")
    policy = CooperatorPolicy(tiny_ppo_config(),
                              canvas_shape(layout, "policy12"), 2)
    clusters = _toy_clusters()
    vae = StubVae()
    runs = []
    for _ in range(2):
        episode = rollout_episode(policy, clusters, 1, vae, layout,
                                  seed=21, rng=np.random.default_rng(22),
                                  ticks=40)
        runs.append(episode)
    np.testing.assert_array_equal(runs[0]["actions"], runs[1]["actions"])
    np.testing.assert_array_equal(runs[0]["obs"], runs[1]["obs"])
    episode = runs[0]
    assert len(episode["actions"]) == 40
    assert episode["episode_return"] == pytest.approx(
        episode["rewards"].sum())
    # Sampled log-probs match the recorded behaviour distributions.
    np.testing.assert_allclose(
        episode["log_probs"],
        np.log(episode["old_dists"][np.arange(40), episode["actions"]]))


def test_train_cooperator_smoke_and_deterministic():
    config = tiny_ppo_config()
    config.total_steps = 160
    config.batch = 80
    config.episode_ticks = 40
    clusters = _toy_clusters()
    vae = StubVae()
    curves = []
    for _ in range(2):
        policy, curve = train_cooperator(vae, clusters, config, seed=5)
        curves.append(curve)
    assert curves[0] == curves[1]
    assert len(curves[0]) == 2
    assert all(np.isfinite(row["loss"]) for row in curves[0])
    assert policy.k == clusters.k


def test_br_baseline_requires_scripted_partners():
    config = tiny_ppo_config()
    config.br_baseline = True
    with pytest.raises(ValueError):
        train_cooperator(StubVae(), _toy_clusters(), config, seed=0)


# ---------------------------------------------------------------------------
# Persistence


def test_checkpoint_roundtrip_and_cluster_mismatch(tmp_path):
    policy = _policy(k=2, seed=9)
    policy.store["E"].data[:] = np.random.default_rng(16).random((2, 27))
    clusters = _toy_clusters()
    path = tmp_path / "coop.ckpt"
    save_cooperator(policy, path, clusters)
    back = load_cooperator(path, clusters)
    assert back.k == 2 and back.config == policy.config
    for name in policy.store.names():
        np.testing.assert_allclose(back.store[name].data,
                                   policy.store[name].data, atol=1e-12)
    other = _toy_clusters(k=3)
    with pytest.raises(CheckpointMismatch):
        load_cooperator(path, other)
