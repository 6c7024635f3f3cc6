"""Trajectory collection, persistence, and windowed iteration.

A dataset stores, per trajectory, only the layout name, the episode seed and
both agents' action sequences; observations are regenerated on demand by
deterministic replay and cached per trajectory, so windows reference one
shared observation buffer instead of copying 26-channel grids around.

The on-disk format is a length-prefixed binary container with a versioned
header and a trailing CRC-32. Version 1 files (written before the channel
spec hash entered the header) still load through a migration path that fills
the hash in and records a note on the dataset.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .env import featurize, reset, step
from .env.featurize import canvas_shape, channel_spec_hash
from .env.layout import Layout, load_builtin

MAGIC = b"TLNT"
FORMAT_VERSION = 2

#: VAE training geometry (history length, prediction horizon, anchor stride).
WINDOW_H = 50
WINDOW_HORIZON = 50
WINDOW_STRIDE = 10

TRAIN_FRACTION = 0.8


class DatasetError(Exception):
    """Raised for malformed, corrupted, or incompatible dataset files."""


class CollectError(Exception):
    """Raised when rollout collection aborts; carries a partial report."""

    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# Trajectories


@dataclass
class Trajectory:
    """One two-agent episode, reconstructible from (layout, seed, actions)."""

    layout_name: str
    seed: int
    actions: np.ndarray            # (T, 2) int16 action ids
    policies: tuple[str, str] = ("", "")
    _obs_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.int16)
        if self.actions.ndim != 2 or self.actions.shape[1] != 2:
            raise ValueError(f"actions must be (T, 2), got "
                             f"{self.actions.shape}")
        if len(self.actions) and not (
                (self.actions >= 0) & (self.actions <= 26)).all():
            raise ValueError("action ids out of range [0, 26]")

    @property
    def length(self) -> int:
        return len(self.actions)

    def replay(self, layout: Layout | None = None):
        """Step the environment through the stored actions, yielding the
        state before each action pair."""
        layout = layout or load_builtin(self.layout_name)
        state = reset(layout, self.seed, episode_ticks=self.length)
        for a0, a1 in self.actions:
            yield state
            state, _, _ = step(state, int(a0), int(a1))
        yield state

    def observations(self, agent: int, variant: str = "encoder26",
                     dtype=np.float16) -> np.ndarray:
        """(T, C, H, W) observation tensor for one agent, cached."""
        key = (agent, variant)
        if key not in self._obs_cache:
            layout = load_builtin(self.layout_name)
            out = np.empty((self.length,) + canvas_shape(layout, variant),
                           dtype=dtype)
            for t, state in enumerate(self.replay(layout)):
                if t == self.length:
                    break
                out[t] = featurize(state, agent, variant, dtype=np.float32)
            self._obs_cache[key] = out
        return self._obs_cache[key]

    def drop_cache(self):
        self._obs_cache.clear()


@dataclass
class WindowSample:
    """(history h, anchor, future H) training window for one agent.

    Observation arrays are views into the owning trajectory's cache; the
    window itself never copies grid data.
    """

    trajectory: Trajectory
    agent: int
    anchor: int                    # t: history is [t-h, t), future [t, t+H)
    h: int
    horizon: int
    variant: str = "encoder26"

    @property
    def history_obs(self) -> np.ndarray:
        obs = self.trajectory.observations(self.agent, self.variant)
        return obs[self.anchor - self.h:self.anchor]

    @property
    def history_actions(self) -> np.ndarray:
        return self.trajectory.actions[self.anchor - self.h:self.anchor,
                                       self.agent]

    @property
    def anchor_obs(self) -> np.ndarray:
        obs = self.trajectory.observations(self.agent, self.variant)
        return obs[self.anchor]

    @property
    def future_actions(self) -> np.ndarray:
        return self.trajectory.actions[self.anchor:self.anchor + self.horizon,
                                       self.agent]


# ---------------------------------------------------------------------------
# Dataset


@dataclass
class Dataset:
    layout_name: str
    trajectories: list[Trajectory] = field(default_factory=list)
    channel_hash: str = ""
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.channel_hash:
            self.channel_hash = channel_spec_hash("encoder26")

    def __len__(self) -> int:
        return len(self.trajectories)

    def split_indices(self, split: str, seed: int) -> list[int]:
        """Deterministic trajectory-level 80/20 partition."""
        if split not in ("train", "validation"):
            raise ValueError(f"unknown split {split!r}")
        order = np.random.default_rng(seed).permutation(len(self))
        n_train = int(round(TRAIN_FRACTION * len(self)))
        chosen = order[:n_train] if split == "train" else order[n_train:]
        return sorted(int(i) for i in chosen)


def derive_episode_seed(master_seed: int, pair_idx: int, episode: int) -> int:
    """Stable per-episode seed from the master seed and plan position."""
    ss = np.random.SeedSequence([master_seed, pair_idx, episode])
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2 ** 63))


def collect(pairing_plan, episodes_per_pair: int, seed: int,
            layout_name: str = "open", episode_ticks: int = 2400) -> Dataset:
    """Roll out every (policy, policy) pairing and store the trajectories.

    Any environment failure aborts with a :class:`CollectError` whose report
    states how far collection got; no partial dataset is returned.
    """
    if episodes_per_pair < 1 and pairing_plan:
        raise ValueError("episodes_per_pair must be >= 1")
    layout = load_builtin(layout_name)
    dataset = Dataset(layout_name)
    for pair_idx, (pol0, pol1) in enumerate(pairing_plan):
        for episode in range(episodes_per_pair):
            ep_seed = derive_episode_seed(seed, pair_idx, episode)
            try:
                actions = _rollout_actions(layout, ep_seed, episode_ticks,
                                           pol0, pol1)
            except Exception as exc:
                raise CollectError(
                    f"rollout failed for pair {pair_idx} episode {episode}: "
                    f"{exc}",
                    report={
                        "completed_trajectories": len(dataset.trajectories),
                        "failed_pair": pair_idx,
                        "failed_episode": episode,
                        "total_planned":
                            len(pairing_plan) * episodes_per_pair,
                    }) from exc
            dataset.trajectories.append(Trajectory(
                layout_name, ep_seed, actions,
                policies=(getattr(pol0, "name", "") or "policy0",
                          getattr(pol1, "name", "") or "policy1")))
    return dataset


def _rollout_actions(layout: Layout, seed: int, ticks: int,
                     pol0, pol1) -> np.ndarray:
    state = reset(layout, seed, episode_ticks=ticks)
    actions = np.empty((ticks, 2), dtype=np.int16)
    t = 0
    while not state.done:
        a0 = pol0.act(state, 0)
        a1 = pol1.act(state, 1)
        actions[t] = (a0, a1)
        state, _, _ = step(state, a0, a1)
        t += 1
    return actions[:t]


# ---------------------------------------------------------------------------
# Persistence


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _unpack_str(buf: memoryview, off: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<H", buf, off)
    off += 2
    return bytes(buf[off:off + n]).decode("utf-8"), off + n


def save(dataset: Dataset, path) -> None:
    """Write the versioned binary container with a trailing CRC-32."""
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION),
             _pack_str(dataset.layout_name),
             _pack_str(dataset.channel_hash),
             struct.pack("<I", len(dataset.trajectories))]
    for traj in dataset.trajectories:
        parts.append(struct.pack("<Q", traj.seed))
        parts.append(_pack_str(traj.policies[0]))
        parts.append(_pack_str(traj.policies[1]))
        parts.append(struct.pack("<I", traj.length))
        parts.append(traj.actions.astype("<i2").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load(path) -> Dataset:
    """Read a dataset file; verifies the checksum before parsing anything."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 6:
        raise DatasetError("file too short to be a dataset")
    body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != stored_crc:
        raise DatasetError("checksum mismatch: file is corrupted")
    buf = memoryview(body)
    if bytes(buf[:4]) != MAGIC:
        raise DatasetError("bad magic bytes")
    (version,) = struct.unpack_from("<H", buf, 4)
    off = 6
    if version not in (1, FORMAT_VERSION):
        raise DatasetError(f"unsupported format version {version}")
    layout_name, off = _unpack_str(buf, off)
    notes = []
    if version >= 2:
        channel_hash, off = _unpack_str(buf, off)
    else:
        channel_hash = channel_spec_hash("encoder26")
        notes.append("migrated from format version 1: "
                     "channel spec hash filled in by the reader")
    (n_traj,) = struct.unpack_from("<I", buf, off)
    off += 4
    trajectories = []
    for _ in range(n_traj):
        (seed,) = struct.unpack_from("<Q", buf, off)
        off += 8
        name0, off = _unpack_str(buf, off)
        name1, off = _unpack_str(buf, off)
        (length,) = struct.unpack_from("<I", buf, off)
        off += 4
        actions = np.frombuffer(buf, dtype="<i2", count=length * 2,
                                offset=off).reshape(length, 2).copy()
        off += length * 4
        trajectories.append(Trajectory(layout_name, int(seed), actions,
                                       policies=(name0, name1)))
    dataset = Dataset(layout_name, trajectories, channel_hash, notes)
    return dataset


def export_jsonl(dataset: Dataset, path) -> int:
    """Line-delimited JSON dump for inspection; returns the line count."""
    with open(path, "w", encoding="utf-8") as fh:
        for traj in dataset.trajectories:
            fh.write(json.dumps({
                "layout": traj.layout_name,
                "seed": traj.seed,
                "policies": list(traj.policies),
                "length": traj.length,
                "actions": traj.actions.tolist(),
            }) + "\n")
    return len(dataset.trajectories)


# ---------------------------------------------------------------------------
# Window iteration


class WindowStream:
    """Iterable over shuffled :class:`WindowSample`s of one split.

    ``skipped`` counts trajectories too short for a single window. Two
    streams built with the same arguments yield identical orders.
    """

    def __init__(self, dataset: Dataset, split: str, seed: int,
                 h: int = WINDOW_H, horizon: int = WINDOW_HORIZON,
                 stride: int = WINDOW_STRIDE, variant: str = "encoder26"):
        self.dataset = dataset
        self.h, self.horizon, self.variant = h, horizon, variant
        self.skipped = 0
        keys = []
        for idx in dataset.split_indices(split, seed):
            traj = dataset.trajectories[idx]
            if traj.length < h + horizon:
                self.skipped += 1
                continue
            for agent in (0, 1):
                for anchor in range(h, traj.length - horizon + 1, stride):
                    keys.append((idx, agent, anchor))
        order = np.random.default_rng((seed, len(keys))).permutation(
            len(keys))
        self._keys = [keys[i] for i in order]

    def __len__(self) -> int:
        return len(self._keys)

    def __iter__(self):
        for idx, agent, anchor in self._keys:
            yield WindowSample(self.dataset.trajectories[idx], agent, anchor,
                               self.h, self.horizon, self.variant)


def iter_windows(dataset: Dataset, split: str, seed: int,
                 **kwargs) -> WindowStream:
    """Shuffled window stream over one side of the 80/20 trajectory split."""
    return WindowStream(dataset, split, seed, **kwargs)
