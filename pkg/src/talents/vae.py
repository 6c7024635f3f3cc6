"""Sequential strategy VAE over teammate trajectory windows.

The encoder compresses an h-step window of (observation, action) pairs into
a diagonal Gaussian over an 8-dim latent; the decoder unrolls its own GRU
for H steps, re-consuming (z, conv(o_t)) each step, and emits 27-way action
logits. Training optimizes reconstruction NLL plus a linearly annealed
KL term against the unit Gaussian prior.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .nn import ParamStore, Tensor

N_ACTIONS = 27


class VaeDivergenceError(Exception):
    """Raised when training produces a non-finite loss."""


@dataclass
class VaeConfig:
    h: int = 50
    horizon: int = 50
    latent: int = 8
    batch: int = 512
    epochs: int = 100
    lr: float = 5e-4
    beta_start: float = 0.0
    beta_end: float = 0.05
    conv_channels: tuple = (16, 32, 32)
    hidden: int = 256
    action_embed: int = 8
    #: average the reconstruction term over H (with beta rescaled by 1/H)
    #: instead of summing, keeping beta presets comparable across horizons
    average_horizon: bool = False

    def __post_init__(self):
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must be <= beta_end")


def paper_config() -> VaeConfig:
    return VaeConfig()


def desk_config() -> VaeConfig:
    return VaeConfig(h=20, horizon=20, batch=64, epochs=20,
                     conv_channels=(8, 16, 16), hidden=64,
                     average_horizon=True)


def tiny_config() -> VaeConfig:
    """Minutes-scale preset for scripted-run checks.

    The gentle final beta matters: the unit-suite datasets are small, so an
    aggressive KL weight collapses the posterior before the decoder learns
    to read the latent at all.
    """
    return VaeConfig(h=10, horizon=10, batch=32, epochs=25, lr=2e-3,
                     conv_channels=(4, 8), hidden=32, beta_end=0.005,
                     average_horizon=True)


@dataclass
class LatentGaussian:
    mu: np.ndarray          # (..., latent)
    logvar: np.ndarray      # (..., latent)

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(0.5 * self.logvar)


# ---------------------------------------------------------------------------
# Model


def _pool2(x: Tensor) -> Tensor:
    """2x2 average pooling (cropping odd borders) to keep conv cost down."""
    n, c, h, w = x.shape
    if h < 4 or w < 4:
        return x
    x = x[:, :, :h - h % 2, :w - w % 2]
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5)) * 0.25


class StrategyVAE:
    """Encoder/decoder pair with all parameters in one ParamStore."""

    def __init__(self, config: VaeConfig, obs_shape: tuple, seed: int = 0):
        self.config = config
        self.obs_shape = tuple(obs_shape)       # (C, H, W)
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        obs_channels, height, width = self.obs_shape
        for _ in config.conv_channels:
            if height >= 4 and width >= 4:      # mirrors _pool2
                height, width = height // 2, width // 2
        flat = config.conv_channels[-1] * height * width
        feat = 2 * config.conv_channels[-1]
        self._feat_dim = feat
        for tag in ("enc_conv", "dec_conv"):
            prev = obs_channels
            for i, ch in enumerate(config.conv_channels):
                self.store.init(f"{tag}.{i}.k", (ch, prev, 3, 3), rng)
                self.store.init(f"{tag}.{i}.b", (ch,), rng)
                prev = ch
            self.store.init(f"{tag}.proj.W", (flat, feat), rng)
            self.store.init(f"{tag}.proj.b", (feat,), rng)
        self.store.init("embed", (N_ACTIONS, config.action_embed), rng,
                        scale=0.1)
        self.store.init_group(
            "enc_gru",
            nn.gru_param_shapes(feat + config.action_embed, config.hidden),
            rng)
        self.store.init("mu.W", (config.hidden, config.latent), rng)
        self.store.init("mu.b", (config.latent,), rng)
        self.store.init("logvar.W", (config.hidden, config.latent), rng)
        self.store.init("logvar.b", (config.latent,), rng)
        self.store.init_group(
            "dec_gru",
            nn.gru_param_shapes(config.latent + feat, config.hidden), rng)
        # Zero head: an untrained decoder emits exactly uniform logits.
        self.store.add("head.W", np.zeros((config.hidden, N_ACTIONS)))
        self.store.add("head.b", np.zeros(N_ACTIONS))

    # -- pieces -------------------------------------------------------------

    def _conv_features(self, obs: Tensor, tag: str) -> Tensor:
        x = obs
        for i in range(len(self.config.conv_channels)):
            x = nn.relu(nn.conv2d(x, self.store[f"{tag}.{i}.k"],
                                  self.store[f"{tag}.{i}.b"]))
            x = _pool2(x)
        n, c, h, w = x.shape
        # Flatten (not pool): the canvases are egocentric, so spatial layout
        # carries the agent's position and must survive into the features.
        flat = x.reshape(n, c * h * w)
        return nn.relu(nn.dense(flat, self.store[f"{tag}.proj.W"],
                                self.store[f"{tag}.proj.b"]))

    def encode_graph(self, history_obs: np.ndarray,
                     history_actions: np.ndarray) -> tuple[Tensor, Tensor]:
        """(mu, logvar) tensors for a (B, h, C, H, W) history batch."""
        b, h = history_obs.shape[:2]
        if h != self.config.h:
            raise ValueError(f"window length {h} != h={self.config.h}")
        flat = Tensor(history_obs.reshape((b * h,) + history_obs.shape[2:]))
        feat = self._conv_features(flat, "enc_conv")
        feat = feat.reshape(b, h, feat.shape[-1])
        emb = nn.embedding(self.store["embed"],
                           np.asarray(history_actions, dtype=np.int64))
        state = Tensor(np.zeros((b, self.config.hidden)))
        gru = self.store.group("enc_gru")
        for t in range(h):
            step = nn.concat([feat[:, t, :], emb[:, t, :]], axis=1)
            state = nn.gru_cell(step, state, gru)
        mu = nn.dense(state, self.store["mu.W"], self.store["mu.b"])
        logvar = nn.dense(state, self.store["logvar.W"],
                          self.store["logvar.b"])
        return mu, logvar

    def decode_graph(self, z: Tensor, anchor_obs: np.ndarray,
                     steps: int | None = None) -> list[Tensor]:
        """H per-step logit tensors, each (B, 27)."""
        steps = steps or self.config.horizon
        feat = self._conv_features(Tensor(anchor_obs), "dec_conv")
        inp = nn.concat([z, feat], axis=1)
        state = Tensor(np.zeros((z.shape[0], self.config.hidden)))
        gru = self.store.group("dec_gru")
        logits = []
        for _ in range(steps):
            state = nn.gru_cell(inp, state, gru)
            logits.append(nn.dense(state, self.store["head.W"],
                                   self.store["head.b"]))
        return logits

    # -- inference-mode API -------------------------------------------------

    def encode(self, history_obs, history_actions) -> LatentGaussian:
        obs = np.asarray(history_obs, dtype=float)
        acts = np.asarray(history_actions)
        squeeze = obs.ndim == 4
        if squeeze:
            obs, acts = obs[None], acts[None]
        mu, logvar = self.encode_graph(obs, acts)
        if squeeze:
            return LatentGaussian(mu.data[0].copy(), logvar.data[0].copy())
        return LatentGaussian(mu.data.copy(), logvar.data.copy())

    def decode(self, z, anchor_obs, steps: int | None = None) -> np.ndarray:
        """(H, 27) action probabilities for a single (z, o_t)."""
        z = np.asarray(z, dtype=float).reshape(1, -1)
        obs = np.asarray(anchor_obs, dtype=float)[None]
        logits = self.decode_graph(Tensor(z), obs, steps)
        return np.stack([nn.softmax(step.data[0]) for step in logits])

    def partner_nll(self, z, anchor_obs, a_observed: int) -> float:
        """-log p(first decoded action = a_observed | z, o_t)."""
        if not 0 <= a_observed < N_ACTIONS:
            raise ValueError("action out of range")
        probs = self.decode(z, anchor_obs, steps=1)[0]
        return float(-np.log(max(probs[a_observed], 1e-12)))


def reparameterize(g: LatentGaussian, eps: np.ndarray) -> np.ndarray:
    return g.mu + g.sigma * np.asarray(eps)


def kl_to_standard_normal(mu: Tensor, logvar: Tensor) -> Tensor:
    """Closed-form KL(q || N(0, I)), mean over the batch."""
    per_dim = 0.5 * (nn.exp(logvar) + nn.square(mu) - 1.0 - logvar)
    return per_dim.sum(axis=1).mean()


def elbo_loss(model: StrategyVAE, history_obs, history_actions, anchor_obs,
              future_actions, beta: float, eps: np.ndarray | None = None):
    """(loss, {"recon": nll, "kl": kl}) for one batch of windows."""
    b = len(history_obs)
    if b == 0:
        raise ValueError("empty batch")
    mu, logvar = model.encode_graph(np.asarray(history_obs, dtype=float),
                                    history_actions)
    if eps is None:
        eps = np.zeros(mu.shape)
    z = mu + nn.exp(logvar * 0.5) * Tensor(np.asarray(eps))
    logits = model.decode_graph(z, np.asarray(anchor_obs, dtype=float))
    future = np.asarray(future_actions, dtype=np.int64)
    recon = None
    for k, step_logits in enumerate(logits):
        nll = nn.softmax_logits_nll(step_logits, future[:, k])
        recon = nll if recon is None else recon + nll
    scale = 1.0 / len(logits) if model.config.average_horizon else 1.0
    recon = recon * scale
    kl = kl_to_standard_normal(mu, logvar)
    loss = recon + (beta * scale) * kl
    return loss, {"recon": recon.item(), "kl": kl.item()}


# ---------------------------------------------------------------------------
# Training


def _stack_batch(samples):
    history = np.stack([s.history_obs for s in samples]).astype(np.float64)
    actions = np.stack([s.history_actions for s in samples])
    anchors = np.stack([s.anchor_obs for s in samples]).astype(np.float64)
    futures = np.stack([s.future_actions for s in samples])
    return history, actions, anchors, futures


def _batches(stream, size):
    bucket = []
    for sample in stream:
        bucket.append(sample)
        if len(bucket) == size:
            yield bucket
            bucket = []
    if bucket:
        yield bucket


def train(dataset, config: VaeConfig, seed: int,
          checkpoint_dir=None, progress=None):
    """Train on the dataset's windows; returns (model, per-epoch curve).

    The curve rows carry epoch, beta, train loss/recon/kl and validation
    recon NLL. A non-finite loss aborts with :class:`VaeDivergenceError`.
    """
    from .data import iter_windows
    from .nn.optim import save_checkpoint

    obs_shape = dataset.trajectories[0].observations(0).shape[1:]
    model = StrategyVAE(config, obs_shape, seed=seed)
    rng = np.random.default_rng(seed + 1)
    probe = iter_windows(dataset, "train", seed, h=config.h,
                         horizon=config.horizon)
    steps_per_epoch = max(1, int(np.ceil(len(probe) / config.batch)))
    total_steps = steps_per_epoch * config.epochs
    curve, step = [], 0
    for epoch in range(config.epochs):
        stream = iter_windows(dataset, "train", seed + epoch, h=config.h,
                              horizon=config.horizon)
        sums = np.zeros(3)
        n_batches = 0
        beta = config.beta_start
        for batch in _batches(stream, config.batch):
            frac = step / max(total_steps - 1, 1)
            beta = config.beta_start + frac * (config.beta_end -
                                               config.beta_start)
            history, actions, anchors, futures = _stack_batch(batch)
            eps = rng.standard_normal((len(batch), config.latent))
            loss, parts = elbo_loss(model, history, actions, anchors,
                                    futures, beta, eps)
            if not np.isfinite(loss.item()):
                raise VaeDivergenceError(
                    f"non-finite loss at epoch {epoch} step {step}: "
                    f"recon={parts['recon']}, kl={parts['kl']}")
            loss.backward()
            nn.clip_global_norm(model.store, 1.0)
            nn.adam_step(model.store, lr=config.lr)
            sums += (loss.item(), parts["recon"], parts["kl"])
            n_batches += 1
            step += 1
        val_recon = validation_nll(model, dataset, seed)
        row = {"epoch": epoch, "beta": beta,
               "loss": sums[0] / n_batches, "recon": sums[1] / n_batches,
               "kl": sums[2] / n_batches, "val_recon": val_recon}
        curve.append(row)
        if progress:
            progress(row)
        if checkpoint_dir is not None:
            save_checkpoint(model.store,
                            f"{checkpoint_dir}/vae_epoch{epoch:03d}.ckpt",
                            extra={"config": asdict(model.config),
                                   "obs_shape": list(obs_shape),
                                   "epoch": epoch})
    return model, curve


def validation_nll(model: StrategyVAE, dataset, seed: int,
                   max_batches: int = 4) -> float:
    from .data import iter_windows

    config = model.config
    stream = iter_windows(dataset, "validation", seed, h=config.h,
                          horizon=config.horizon)
    totals, count = 0.0, 0
    for batch in _batches(stream, config.batch):
        history, actions, anchors, futures = _stack_batch(batch)
        _, parts = elbo_loss(model, history, actions, anchors, futures,
                             beta=0.0)
        totals += parts["recon"]
        count += 1
        if count >= max_batches:
            break
    return totals / count if count else float("nan")


def load_vae(path) -> StrategyVAE:
    """Rebuild a StrategyVAE from an nn-core checkpoint."""
    from .nn.optim import load_checkpoint

    # Bootstrapping problem: the store layout depends on the config stored
    # in the checkpoint, so read the header through a throwaway load.
    import json, struct
    with open(path, "rb") as fh:
        blob = fh.read()
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8:8 + hlen].decode("utf-8"))
    extra = header["extra"]
    config = VaeConfig(**{**extra["config"],
                          "conv_channels": tuple(extra["config"]
                                                 ["conv_channels"])})
    model = StrategyVAE(config, tuple(extra["obs_shape"]))
    load_checkpoint(model.store, path)
    return model


def embed_dataset(model: StrategyVAE, dataset, seed: int = 0,
                  split: str = "train", max_windows: int | None = None):
    """Window-level mean latents tagged by source policy.

    Returns (mu matrix (N, latent), labels list of policy names).
    """
    from .data import iter_windows

    config = model.config
    stream = iter_windows(dataset, split, seed, h=config.h,
                          horizon=config.horizon)
    mus, labels = [], []
    for batch in _batches(stream, config.batch):
        history = np.stack([s.history_obs for s in batch]).astype(float)
        actions = np.stack([s.history_actions for s in batch])
        latent = model.encode(history, actions)
        mus.append(latent.mu)
        labels.extend(s.trajectory.policies[s.agent] for s in batch)
        if max_windows is not None and sum(len(m) for m in mus) >= \
                max_windows:
            break
    if not mus:
        return np.zeros((0, config.latent)), []
    mu = np.concatenate(mus)[:max_windows]
    return mu, labels[:len(mu)]
