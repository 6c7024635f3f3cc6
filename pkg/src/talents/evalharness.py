"""Experiment runner: cross-play tables, partner-swap traces, K sweeps.

Every report embeds a hash over the artifacts that produced it (layout,
policy parameters, cluster set, adapter configuration), so two reports are
comparable only when their hashes agree.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .adapter import FixedShareAdapter, FixedShareConfig, adapt_step
from .clusters import fit_kmeans
from .cooperator import train_cooperator
from .data import derive_episode_seed
from .env import featurize, legal_actions, reset, step
from .env.layout import load_builtin

REPORT_COLUMNS = ("layout", "cooperator", "partner", "episodes",
                  "mean_return", "se", "config_hash")


def artifact_hash(layout_name: str, policy=None, clusters=None,
                  adapter_config: FixedShareConfig | None = None,
                  extra: str = "") -> str:
    """Stable digest over everything that shapes an evaluation."""
    digest = hashlib.sha256()
    digest.update(layout_name.encode())
    if policy is not None:
        for name in policy.store.names():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(
                policy.store[name].data, dtype="<f8").tobytes())
    if clusters is not None:
        digest.update(clusters.content_hash().encode())
    if adapter_config is not None:
        digest.update(f"{adapter_config.eta}|{adapter_config.alpha}|"
                      f"{adapter_config.loss_clip}|{adapter_config.mode}"
                      .encode())
    digest.update(extra.encode())
    return digest.hexdigest()[:16]


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)   # dicts with REPORT_COLUMNS
    config_hash: str = ""
    seed: int = 0

    def mean_return(self, partner: str = "__all__") -> float:
        for row in self.rows:
            if row["partner"] == partner:
                return row["mean_return"]
        raise KeyError(partner)


# ---------------------------------------------------------------------------
# Episode runner


def run_adaptive_episode(policy, vae, clusters, partner, layout, seed: int,
                         rng, ticks: int, adapt: bool = True,
                         adapter_config: FixedShareConfig | None = None,
                         partner_b=None, swap_tick: int | None = None
                         ) -> dict:
    """Cooperator in seat 0 against a scripted partner in seat 1.

    With ``adapt`` the cooperator runs the full belief loop (update on last
    tick's partner action, act conditioned on the leading cluster);
    without it the cluster is pinned to 0 (BR degenerate). ``partner_b``
    replaces the partner atomically at ``swap_tick``.
    """
    state = reset(layout, seed, episode_ticks=ticks)
    adapter = astate = None
    if adapt:
        adapter = FixedShareAdapter(vae, clusters,
                                    adapter_config or FixedShareConfig())
        astate = adapter.reset()
    prev_partner_obs = None
    prev_partner_action = None
    rewards, weight_trace, cluster_trace = [], [], []
    while not state.done:
        active = partner_b if (swap_tick is not None
                               and state.tick >= swap_tick) else partner
        obs = featurize(state, 0, "policy12")
        mask = legal_actions(state, 0)
        if adapt:
            action, astate, c_star = adapt_step(
                adapter, astate, prev_partner_obs, prev_partner_action,
                act_fn=lambda c: policy.act(obs, c, mask, rng)[0], rng=rng)
            weight_trace.append(astate.weights.copy())
        else:
            c_star = 0
            action = policy.act(obs, c_star, mask, rng)[0]
        cluster_trace.append(c_star)
        prev_partner_obs = featurize(state, 1, "encoder26")
        partner_action = active.act(state, 1)
        prev_partner_action = partner_action
        state, _, reward = step(state, action, partner_action)
        rewards.append(reward)
    return {
        "rewards": np.asarray(rewards, dtype=np.float64),
        "score": float(state.score),
        "weights": np.asarray(weight_trace) if adapt else None,
        "clusters": np.asarray(cluster_trace),
    }


# ---------------------------------------------------------------------------
# Cross-play


def crossplay(policy, vae, clusters, partners: dict, layout_name: str,
              episodes: int, seed: int, ticks: int, adapt: bool = True,
              adapter_config: FixedShareConfig | None = None) -> EvalReport:
    """Mean return +- SE per held-out partner plus a pooled row.

    ``partners`` maps partner names to scripted policies; each pairing
    plays ``episodes`` independent episodes with split seeds.
    """
    if episodes < 2:
        raise ValueError("need at least 2 episodes per pairing for an SE")
    layout = load_builtin(layout_name)
    config_hash = artifact_hash(layout_name, policy, clusters,
                                adapter_config or FixedShareConfig(),
                                extra=f"adapt={adapt}")
    cooperator_name = "talents" if adapt else "br-degenerate"
    report = EvalReport(config_hash=config_hash, seed=seed)
    pooled = []
    for pair_idx, (name, partner) in enumerate(sorted(partners.items())):
        returns = []
        for episode in range(episodes):
            ep_seed = derive_episode_seed(seed, pair_idx, episode)
            rng = np.random.default_rng(ep_seed)
            result = run_adaptive_episode(
                policy, vae, clusters, partner, layout, ep_seed, rng,
                ticks, adapt=adapt, adapter_config=adapter_config)
            returns.append(result["score"])
        returns = np.asarray(returns)
        pooled.extend(returns.tolist())
        report.rows.append({
            "layout": layout_name, "cooperator": cooperator_name,
            "partner": name, "episodes": episodes,
            "mean_return": float(returns.mean()),
            "se": float(returns.std(ddof=1) / np.sqrt(len(returns))),
            "config_hash": config_hash,
        })
    pooled = np.asarray(pooled)
    report.rows.append({
        "layout": layout_name, "cooperator": cooperator_name,
        "partner": "__all__", "episodes": len(pooled),
        "mean_return": float(pooled.mean()),
        "se": float(pooled.std(ddof=1) / np.sqrt(len(pooled))),
        "config_hash": config_hash,
    })
    return report


# ---------------------------------------------------------------------------
# Partner swap


def partner_swap(policy, vae, clusters, partner_a, partner_b,
                 layout_name: str, swap_tick: int, episodes: int,
                 seed: int, ticks: int,
                 adapter_config: FixedShareConfig | None = None) -> dict:
    """Accumulated-reward curves and weight traces around a mid-episode
    partner replacement, for fixed-share and the static ablation."""
    if not 0 < swap_tick < ticks:
        raise ValueError("swap_tick must fall inside the episode")
    layout = load_builtin(layout_name)
    base = adapter_config or FixedShareConfig()
    out = {"swap_tick": swap_tick, "ticks": ticks, "modes": {},
           "config_hash": artifact_hash(layout_name, policy, clusters,
                                        base, extra=f"swap={swap_tick}")}
    for mode in ("fixed-share", "static"):
        config = FixedShareConfig(eta=base.eta, alpha=base.alpha,
                                  loss_clip=base.loss_clip, mode=mode)
        runs = []
        for episode in range(episodes):
            ep_seed = derive_episode_seed(seed, 0, episode)
            rng = np.random.default_rng(ep_seed)
            result = run_adaptive_episode(
                policy, vae, clusters, partner_a, layout, ep_seed, rng,
                ticks, adapter_config=config, partner_b=partner_b,
                swap_tick=swap_tick)
            runs.append({
                "cumulative_reward": np.cumsum(result["rewards"]),
                "weights": result["weights"],
                "argmax": result["weights"].argmax(axis=1),
                "score": result["score"],
            })
        out["modes"][mode] = runs
    return out


# ---------------------------------------------------------------------------
# Cluster-count sweep


def cluster_sweep(vae, latents: np.ndarray, partners: dict, k_list,
                  ppo_config, layout_name: str, episodes: int, seed: int,
                  ticks: int) -> dict:
    """Fit clusters, train a cooperator, and evaluate — once per K."""
    reports = {}
    for k in k_list:
        _, clusters, _ = fit_kmeans(latents, k, seed=seed)
        policy, _ = train_cooperator(vae, clusters, ppo_config, seed)
        reports[k] = crossplay(policy, vae, clusters, partners,
                               layout_name, episodes, seed, ticks,
                               adapt=k > 1)
    return reports


# ---------------------------------------------------------------------------
# Export


def export_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in report.rows:
            writer.writerow(row)


def export_jsonl(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        for row in report.rows:
            fh.write(json.dumps({key: row[key] for key in REPORT_COLUMNS})
                     + "\n")


def load_jsonl(path) -> EvalReport:
    report = EvalReport()
    with open(path) as fh:
        for line in fh:
            row = json.loads(line)
            report.rows.append(row)
            report.config_hash = row["config_hash"]
    return report
