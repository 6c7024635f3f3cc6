"""Egocentric channel-grid observations.

Both variants render onto a (2H-1, 2W-1) canvas with the observing player at
the center; the grid is translated (never rotated) so the layout's wall
pattern fixes the absolute offset.

``encoder26`` is lossless: :func:`reconstruct` rebuilds the full state
(modulo generator state) from the tensor. Non-spatial quantities (orders,
tick, score) live in lane channels that carry no spatial meaning.

``policy12`` is the compressed control featurization.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .actions import DELTAS
from .items import Item, N_ITEMS, POT_COOK_TICKS, GRILL_COOK_TICKS
from .layout import Layout, Tile
from .state import ActiveOrder, GameState, Player, RewardTable, Station

ENCODER_CHANNELS = 26
POLICY_CHANNELS = 12

# Lane scaling constants (encoder26).
_TICK_SCALE = 4096.0
_SCORE_SHIFT = 1000.0
_SCORE_SCALE = 8192.0
_PLATE_SCALE = 64.0
_ORDER_IDX_SCALE = 256.0
_NACTIVE_SCALE = 64.0
_SINK_SCALE = 8.0

_static_cache: dict[tuple[str, str], np.ndarray] = {}


def canvas_shape(layout: Layout, variant: str = "encoder26") -> tuple[int, int, int]:
    channels = ENCODER_CHANNELS if variant == "encoder26" else POLICY_CHANNELS
    return (channels, 2 * layout.height - 1, 2 * layout.width - 1)


def channel_spec_hash(variant: str = "encoder26") -> str:
    spec = (
        f"{variant}|v2|egocentric-translate|"
        "static:floor,counter,rice,meat,mushroom,plate,sink,chop,pot,grill,"
        "serve,trash|players:pos,facing,held|stations:item,timer,done|"
        "counters|sink|lanes:orders,misc"
    )
    return hashlib.sha256(spec.encode()).hexdigest()[:16]


def _item_code(item: Item | None) -> float:
    return 0.0 if item is None else (int(item) + 1) / N_ITEMS


def _decode_item(code: float) -> Item | None:
    idx = int(round(code * N_ITEMS)) - 1
    return None if idx < 0 else Item(idx)


def _static_encoder(layout: Layout) -> np.ndarray:
    key = (layout.name, "enc")
    if key not in _static_cache:
        grid = np.array(layout.grid, dtype=np.int64)
        static = np.zeros((12, layout.height, layout.width))
        for ch, tile in enumerate(Tile):
            static[ch] = grid == int(tile)
        _static_cache[key] = static
    return _static_cache[key]


def _static_policy(layout: Layout) -> np.ndarray:
    key = (layout.name, "pol")
    if key not in _static_cache:
        grid = np.array(layout.grid, dtype=np.int64)
        static = np.zeros((5, layout.height, layout.width))
        static[0] = grid != int(Tile.FLOOR)
        for value, tile in ((1 / 3, Tile.RICE), (2 / 3, Tile.MEAT),
                            (1.0, Tile.MUSHROOM)):
            static[1][grid == int(tile)] = value
        for value, tile in ((0.5, Tile.PLATE_STACK), (1.0, Tile.SINK)):
            static[2][grid == int(tile)] = value
        for value, tile in ((1 / 3, Tile.CHOP), (2 / 3, Tile.POT),
                            (1.0, Tile.GRILL)):
            static[3][grid == int(tile)] = value
        for value, tile in ((1.0, Tile.SERVE), (0.5, Tile.TRASH)):
            static[4][grid == int(tile)] = value
        _static_cache[key] = static
    return _static_cache[key]


def _cook_ticks(layout: Layout, pos: tuple[int, int]) -> int:
    return POT_COOK_TICKS if layout.grid[pos[0]][pos[1]] == Tile.POT \
        else GRILL_COOK_TICKS


def featurize(state: GameState, player_idx: int,
              variant: str = "encoder26",
              dtype: type = np.float64) -> np.ndarray:
    """Egocentric observation tensor with all values in [0, 1]."""
    if variant not in ("encoder26", "policy12"):
        raise ValueError(f"unknown featurization variant {variant!r}")
    layout = state.layout
    h, w = layout.height, layout.width
    me = state.players[player_idx]
    partner = state.players[1 - player_idx]
    pr, pc = me.pos
    r0, c0 = (h - 1) - pr, (w - 1) - pc   # grid (0,0) on the canvas
    cr, cc = h - 1, w - 1                 # canvas center (self)

    def on_canvas(pos: tuple[int, int]) -> tuple[int, int]:
        return pos[0] + r0, pos[1] + c0

    if variant == "encoder26":
        out = np.zeros(canvas_shape(layout, variant))
        out[0:12, r0:r0 + h, c0:c0 + w] = _static_encoder(layout)
        out[12, cr, cc] = 1.0
        fr, fc = DELTAS[me.facing]
        out[13, cr + fr, cc + fc] = 1.0
        out[14][on_canvas(partner.pos)] = 1.0
        gr, gc = DELTAS[partner.facing]
        ppos = on_canvas(partner.pos)
        out[15, ppos[0] + gr, ppos[1] + gc] = 1.0
        out[16, cr, cc] = _item_code(me.held)
        out[17][ppos] = _item_code(partner.held)
        for pos, station in state.stations.items():
            cpos = on_canvas(pos)
            out[18][cpos] = _item_code(station.item)
            out[19][cpos] = station.timer / _cook_ticks(layout, pos)
            out[20][cpos] = float(station.done)
        for pos, item in state.counters.items():
            out[21][on_canvas(pos)] = _item_code(item)
        for pos, count in state.sink_dirty.items():
            out[22][on_canvas(pos)] = count / _SINK_SCALE
        for i, order in enumerate(state.active_orders):
            out[23, 0, i] = 0.5 if order.recipe == "A" else 1.0
            out[23, 1, i] = order.remaining / _TICK_SCALE
            out[24, 0, i] = order.deadline / _TICK_SCALE
        out[25, 0, 0] = state.tick / _TICK_SCALE
        out[25, 0, 1] = (state.score + _SCORE_SHIFT) / _SCORE_SCALE
        out[25, 0, 2] = state.plate_stock / _PLATE_SCALE
        out[25, 0, 3] = state.next_order / _ORDER_IDX_SCALE
        out[25, 0, 4] = len(state.active_orders) / _NACTIVE_SCALE
    else:
        out = np.zeros(canvas_shape(layout, variant))
        out[0:5, r0:r0 + h, c0:c0 + w] = _static_policy(layout)
        out[5, cr, cc] = 1.0
        fr, fc = DELTAS[me.facing]
        out[6, cr + fr, cc + fc] = 1.0
        ppos = on_canvas(partner.pos)
        out[7][ppos] = 1.0
        gr, gc = DELTAS[partner.facing]
        out[8, ppos[0] + gr, ppos[1] + gc] = 1.0
        out[9, cr, cc] = _item_code(me.held)
        out[10][ppos] = _item_code(partner.held)
        # Countdown channel: cook progress at occupied stations, order
        # urgency at serve windows.
        for pos, station in state.stations.items():
            if station.item is not None:
                frac = 1.0 - station.timer / _cook_ticks(layout, pos)
                out[11][on_canvas(pos)] = 0.1 + 0.9 * frac
        if state.active_orders:
            urgency = max(1.0 - o.remaining / o.deadline
                          for o in state.active_orders)
            for pos in layout.tiles_of(Tile.SERVE):
                out[11][on_canvas(pos)] = max(urgency, 1e-3)

    return np.clip(out, 0.0, 1.0).astype(dtype)


def reconstruct(features: np.ndarray, layout: Layout,
                player_idx: int = 0) -> GameState:
    """Invert an ``encoder26`` tensor back into a GameState.

    The generator state and seed are not encoded; the returned state carries
    a fresh generator seeded with 0.
    """
    if features.shape != canvas_shape(layout, "encoder26"):
        raise ValueError("feature tensor shape does not match layout")
    h, w = layout.height, layout.width
    occupancy = features[0:12].sum(axis=0)
    rows, cols = np.nonzero(occupancy)
    r0, c0 = int(rows.min()), int(cols.min())
    cr, cc = h - 1, w - 1
    my_pos = (cr - r0, cc - c0)

    def from_canvas(pos: tuple[int, int]) -> tuple[int, int]:
        return pos[0] - r0, pos[1] - c0

    def single(channel: np.ndarray) -> tuple[int, int]:
        r, c = np.unravel_index(int(np.argmax(channel)), channel.shape)
        return int(r), int(c)

    face_cell = single(features[13])
    my_facing = DELTAS.index((face_cell[0] - cr, face_cell[1] - cc))
    ppos_canvas = single(features[14])
    partner_pos = from_canvas(ppos_canvas)
    pface = single(features[15])
    partner_facing = DELTAS.index((pface[0] - ppos_canvas[0],
                                   pface[1] - ppos_canvas[1]))

    me = Player(my_pos, my_facing, _decode_item(features[16, cr, cc]))
    partner = Player(partner_pos, partner_facing,
                     _decode_item(float(features[17][ppos_canvas])))
    players = [me, partner] if player_idx == 0 else [partner, me]

    state = GameState(
        layout=layout,
        rewards=RewardTable.from_layout(layout),
        seed=0,
        episode_ticks=layout.episode_ticks,
        players=players,
        plate_stock=int(round(features[25, 0, 2] * _PLATE_SCALE)),
        rng=np.random.default_rng(0),
    )
    state.tick = int(round(features[25, 0, 0] * _TICK_SCALE))
    state.score = float(features[25, 0, 1]) * _SCORE_SCALE - _SCORE_SHIFT
    state.next_order = int(round(features[25, 0, 3] * _ORDER_IDX_SCALE))

    for pos in layout.tiles_of(Tile.POT) + layout.tiles_of(Tile.GRILL):
        canvas_pos = (pos[0] + r0, pos[1] + c0)
        item = _decode_item(float(features[18][canvas_pos]))
        timer = int(round(float(features[19][canvas_pos])
                          * _cook_ticks(layout, pos)))
        state.stations[pos] = Station(item, timer if item is not None else 0)
    for pos in layout.tiles_of(Tile.COUNTER):
        item = _decode_item(float(features[21][pos[0] + r0, pos[1] + c0]))
        if item is not None:
            state.counters[pos] = item
    for pos in layout.tiles_of(Tile.SINK):
        state.sink_dirty[pos] = int(round(
            float(features[22][pos[0] + r0, pos[1] + c0]) * _SINK_SCALE))

    n_active = int(round(features[25, 0, 4] * _NACTIVE_SCALE))
    for i in range(n_active):
        recipe = "A" if abs(features[23, 0, i] - 0.5) < 0.25 else "B"
        remaining = int(round(float(features[23, 1, i]) * _TICK_SCALE))
        deadline = int(round(float(features[24, 0, i]) * _TICK_SCALE))
        state.active_orders.append(ActiveOrder(recipe, remaining, deadline))
    return state
