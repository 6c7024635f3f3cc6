import numpy as np
import pytest

from talents.env import legal_actions, reset, step
from talents.env.layout import load_builtin


@pytest.fixture(scope="session")
def open_layout():
    return load_builtin("open")


@pytest.fixture(scope="session")
def all_layouts():
    return [load_builtin(n) for n in ("open", "hallway", "forced_coord",
                                      "ring")]


class PulseWalker:
    """Scripted oscillator used as a synthetic latent-identifiability oracle.

    Every style shuttles between the same two adjacent floor cells of its
    row (player 0 on row 2, player 1 on row 5 of the open layout), moving
    on each tick with a style-specific probability and staying put
    otherwise. Position and facing therefore have identical support across
    styles, so a single observation carries no identity — only the move
    rate visible in the action history does. The move draws are i.i.d., so
    there is no phase information to encode either; the ideal latent is
    exactly the one-dimensional rate.
    """

    HOME_COL, AWAY_COL = 2, 3
    ROWS = (2, 5)
    RATES = {"pulse_fast": 1.0, "pulse_mid": 0.5, "pulse_slow": 0.0,
             "anchor": 0.0}

    def __init__(self, style, seed=0):
        self.name = style
        self.rate = self.RATES[style]
        self._rng = np.random.default_rng(
            (list(self.RATES).index(style), seed))

    def _toward(self, pos, target, mask):
        from talents.env.actions import A_STAY, DELTAS
        dr = np.sign(target[0] - pos[0])
        dc = np.sign(target[1] - pos[1])
        for delta in ((dr, 0), (0, dc)):
            if delta in DELTAS:
                action = DELTAS.index(delta)
                if mask[action]:
                    return action
        return A_STAY

    def act(self, state, player_idx):
        from talents.env.actions import A_STAY
        pos = tuple(state.players[player_idx].pos)
        mask = legal_actions(state, player_idx)
        row = self.ROWS[player_idx]
        if pos[0] != row or pos[1] not in (self.HOME_COL, self.AWAY_COL):
            return self._toward(pos, (row, self.HOME_COL), mask)
        if self._rng.random() >= self.rate:
            return A_STAY
        other = self.AWAY_COL if pos[1] == self.HOME_COL else self.HOME_COL
        return self._toward(pos, (row, other), mask)


@pytest.fixture(scope="session")
def pulse_dataset():
    """Episodes of the three pulse-walker styles against a common
    stationary partner on open.

    Sharing one partner keeps the player-1 windows identically labelled
    ``anchor``, so style-filtered latent tests only ever see player-0
    windows and the egocentric partner-relative view cannot leak which
    seat a window came from.
    """
    from talents.data import collect

    plan = [(PulseWalker(style, seed=1), PulseWalker("anchor", seed=2))
            for style in ("pulse_fast", "pulse_mid", "pulse_slow")]
    return collect(plan, episodes_per_pair=3, seed=31, layout_name="open",
                   episode_ticks=400)


@pytest.fixture(scope="session")
def pulse_vae(pulse_dataset):
    """Tiny VAE trained on the pulse-walker dataset (float32 for speed)."""
    from talents.nn import set_default_dtype
    from talents.vae import tiny_config, train

    set_default_dtype(np.float32)
    try:
        model, curve = train(pulse_dataset, tiny_config(), seed=0)
    finally:
        set_default_dtype(np.float64)
    return model, curve


def random_rollout(layout, seed, ticks, collect_events=False):
    """Legal-mask-sampled random episode; returns the final state (and the
    event log when requested)."""
    state = reset(layout, seed, episode_ticks=ticks)
    rng = np.random.default_rng(seed)
    events = []
    while not state.done:
        a0 = rng.choice(np.nonzero(legal_actions(state, 0))[0])
        a1 = rng.choice(np.nonzero(legal_actions(state, 1))[0])
        state, evs, _ = step(state, int(a0), int(a1))
        events.extend(evs)
    return (state, events) if collect_events else state
