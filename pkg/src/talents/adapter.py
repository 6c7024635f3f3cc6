"""Online partner-strategy inference: fixed-share over cluster experts.

Each cluster acts as an expert predicting the partner's next action through
the VAE decoder; exponential weights with an alpha-mixing step track the
best expert even when the partner's strategy switches mid-episode. A static
(Hedge) mode with the mixing step removed serves as the ablation, and a
tracking-regret ledger scores both against m-segment comparators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIMPLEX_TOL = 1e-9


@dataclass
class FixedShareConfig:
    eta: float = 0.2
    alpha: float = 0.4
    loss_clip: float = 1.0
    mode: str = "fixed-share"       # or "static"

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.mode not in ("fixed-share", "static"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "static":
            self.alpha = 0.0


def uniform_weights(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def _check_simplex(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-6:
        raise ValueError("weights must lie on the probability simplex")
    return w


def update_fixed_share(w, losses, config: FixedShareConfig) -> np.ndarray:
    """Exponential-weights step followed by alpha-mixing toward uniform."""
    w = _check_simplex(w)
    losses = np.asarray(losses, dtype=np.float64)
    tilted = w * np.exp(-config.eta * losses)
    total = tilted.sum()
    if not total > 0:
        raise ValueError("all weights vanished in the update")
    tilted /= total
    return (1.0 - config.alpha) * tilted + config.alpha / len(w)


def update_static(w, losses, config: FixedShareConfig) -> np.ndarray:
    """Plain exponential weights (the alpha-mixing step omitted)."""
    static = FixedShareConfig(eta=config.eta, alpha=0.0, mode="static",
                              loss_clip=config.loss_clip)
    return update_fixed_share(w, losses, static)


def leading_expert(w) -> int:
    """Argmax weight; ties break to the lowest index."""
    return int(np.argmax(_check_simplex(w)))


def expert_losses(vae, clusters, o_t, a_partner: int, rng=None,
                  sample: bool = False,
                  loss_clip: float = 1.0) -> np.ndarray:
    """Clipped, normalized decoder NLL of the observed partner action.

    By default each expert uses the deterministic latent z_c = mu_c;
    ``sample=True`` draws z_c ~ N(mu_c, sigma_c^2 I) instead (requires rng).
    """
    from .clusters import sample_latent

    losses = np.empty(clusters.k)
    for c in range(clusters.k):
        z = sample_latent(clusters, c, rng) if sample else clusters.means[c]
        nll = vae.partner_nll(z, o_t, a_partner)
        losses[c] = min(nll, loss_clip) / loss_clip
    return losses


# ---------------------------------------------------------------------------
# Online adaptation loop


@dataclass
class AdapterState:
    weights: np.ndarray
    trace: list = field(default_factory=list)
    tick: int = 0

    def copy(self) -> "AdapterState":
        return AdapterState(self.weights.copy(), list(self.trace),
                            self.tick)


class FixedShareAdapter:
    """Belief tracker over strategy clusters for a live episode."""

    def __init__(self, vae, clusters, config: FixedShareConfig | None = None):
        self.vae = vae
        self.clusters = clusters
        self.config = config or FixedShareConfig()

    def reset(self) -> AdapterState:
        w = uniform_weights(self.clusters.k)
        return AdapterState(w, trace=[w.copy()])

    def update(self, state: AdapterState, o_prev, a_partner_prev: int,
               rng=None) -> AdapterState:
        """Fold in the partner action observed on the previous tick."""
        losses = expert_losses(self.vae, self.clusters, o_prev,
                               a_partner_prev, rng=rng,
                               loss_clip=self.config.loss_clip)
        if self.config.mode == "static":
            w = update_static(state.weights, losses, self.config)
        else:
            w = update_fixed_share(state.weights, losses, self.config)
        new = AdapterState(w, state.trace + [w.copy()], state.tick + 1)
        return new


def adapt_step(adapter: FixedShareAdapter, state: AdapterState, o_t,
               a_partner_prev, act_fn, rng=None):
    """One Algorithm-2 step: update beliefs, act under the leading expert.

    ``a_partner_prev`` is None on the first tick (no observation yet), so
    the weights stay at the uniform prior. ``act_fn(cluster)`` produces the
    cooperator's action conditioned on the leading cluster.
    """
    if a_partner_prev is not None:
        state = adapter.update(state, o_t, a_partner_prev, rng=rng)
    else:
        state = AdapterState(state.weights.copy(),
                             state.trace + [state.weights.copy()],
                             state.tick + 1)
    c_star = leading_expert(state.weights)
    return act_fn(c_star), state, c_star


# ---------------------------------------------------------------------------
# Regret accounting


@dataclass
class RegretLedger:
    """Per-step expert losses plus the algorithm's realized losses."""

    expert_losses: list = field(default_factory=list)   # rows of length K
    realized: list = field(default_factory=list)

    def record(self, losses, weights) -> float:
        losses = np.asarray(losses, dtype=np.float64)
        if ((losses < 0) | (losses > 1)).any():
            raise ValueError("losses must be clipped into [0, 1]")
        realized = float(np.dot(_check_simplex(weights), losses))
        self.expert_losses.append(losses.copy())
        self.realized.append(realized)
        return realized

    @property
    def t(self) -> int:
        return len(self.realized)

    def matrix(self) -> np.ndarray:
        return np.asarray(self.expert_losses)


def best_segmented_loss(loss_matrix: np.ndarray, m: int) -> float:
    """Minimum total loss over comparators with at most m expert segments.

    Dynamic program over (segments used, time, active expert); O(T K m).
    """
    loss_matrix = np.asarray(loss_matrix, dtype=np.float64)
    t_total, k = loss_matrix.shape
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > t_total:
        raise ValueError("m cannot exceed the number of steps")
    # cost[j, c]: best loss of first t steps using <= j+1 segments where the
    # current segment plays expert c.
    cost = np.full((m, k), np.inf)
    cost[0] = loss_matrix[0]
    for t in range(1, t_total):
        prev_best = cost.min(axis=1)          # per segment-count
        stay = cost
        switch = np.full((m, k), np.inf)
        switch[1:] = prev_best[:-1, None]
        cost = np.minimum(stay, switch) + loss_matrix[t]
    return float(cost.min())


def tracking_regret(ledger: RegretLedger, m: int) -> float:
    """Realized cumulative loss minus the best m-segment comparator."""
    if ledger.t == 0:
        raise ValueError("empty ledger")
    return float(np.sum(ledger.realized)) - \
        best_segmented_loss(ledger.matrix(), m)
