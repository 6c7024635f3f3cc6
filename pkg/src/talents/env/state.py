"""Deterministic two-player kitchen engine: state, step, legality, events."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import actions as act
from .actions import (
    ACTIONS, A_INTERACT, A_STAY, DELTAS, EMPTY_COUNTER, FILLED_COUNTER,
    Action, bfs_distances, approach_cells, direction_toward, first_step,
)
from .items import (
    Item, COMPLETED_DISHES, POT_COOK_TICKS, GRILL_COOK_TICKS,
    add_rice, add_grilled, recipe_for_dish,
)
from .layout import Layout, Tile


class EventKind(enum.Enum):
    # The nine preference-shaped events.
    PLATING = "plating"
    WASHING = "washing"
    DELIVERING = "delivering"
    CHOPPING = "chopping"
    POTTING = "potting"
    GRILLING = "grilling"
    TAKE_MUSHROOM = "take_mushroom"
    TAKE_RICE = "take_rice"
    TAKE_MEAT = "take_meat"
    # Scoring events.
    DELIVERY_SUCCESS = "delivery_success"
    DELIVERY_LATE = "delivery_late"
    DELIVERY_WRONG = "delivery_wrong"


#: The nine shapeable events, in the canonical preference-vector order.
BP_EVENTS = (
    EventKind.PLATING, EventKind.WASHING, EventKind.DELIVERING,
    EventKind.CHOPPING, EventKind.POTTING, EventKind.GRILLING,
    EventKind.TAKE_MUSHROOM, EventKind.TAKE_RICE, EventKind.TAKE_MEAT,
)


@dataclass(frozen=True)
class EventRecord:
    tick: int
    agent: int          # 0/1, or -1 for system events (order expiry)
    kind: EventKind
    reward: float       # contribution to team score, bonuses included


@dataclass
class RewardTable:
    delivery_base: float = 40.0
    time_bonus_max: float = 20.0
    expired: float = -10.0
    wrong: float = 0.0

    @classmethod
    def from_layout(cls, layout: Layout) -> "RewardTable":
        table = cls()
        for key, value in layout.reward_overrides.items():
            if not hasattr(table, key):
                raise ValueError(f"unknown reward override {key!r}")
            setattr(table, key, value)
        return table

    def delivery_bonus(self, remaining: int, deadline: int) -> float:
        """Full bonus within the first half of the order window, then a
        linear decay to zero at expiry."""
        half = deadline / 2.0
        if remaining >= half:
            return self.time_bonus_max
        return self.time_bonus_max * max(remaining, 0) / half


class IllegalActionError(ValueError):
    """An action failing the legality mask was passed to step()."""


@dataclass
class Player:
    pos: tuple[int, int]
    facing: int = act.DOWN
    held: Item | None = None


@dataclass
class ActiveOrder:
    recipe: str
    remaining: int
    deadline: int


@dataclass
class Station:
    item: Item | None = None
    timer: int = 0

    @property
    def done(self) -> bool:
        return self.item is not None and self.timer == 0


@dataclass
class GameState:
    layout: Layout
    rewards: RewardTable
    seed: int
    tick: int = 0
    episode_ticks: int = 2400
    players: list[Player] = field(default_factory=list)
    stations: dict[tuple[int, int], Station] = field(default_factory=dict)
    counters: dict[tuple[int, int], Item] = field(default_factory=dict)
    sink_dirty: dict[tuple[int, int], int] = field(default_factory=dict)
    plate_stock: int = 2
    active_orders: list[ActiveOrder] = field(default_factory=list)
    next_order: int = 0    # index into layout.order_schedule
    score: float = 0.0
    rng: np.random.Generator = None  # type: ignore[assignment]

    @property
    def done(self) -> bool:
        return self.tick >= self.episode_ticks

    def signature(self) -> tuple:
        """Hashable full-state fingerprint, used for bitwise-determinism
        checks. Includes the generator state."""
        rng_state = self.rng.bit_generator.state
        return (
            self.layout.name, self.tick, self.score, self.plate_stock,
            tuple((p.pos, p.facing, p.held) for p in self.players),
            tuple(sorted((pos, s.item, s.timer)
                         for pos, s in self.stations.items())),
            tuple(sorted(self.counters.items())),
            tuple(sorted(self.sink_dirty.items())),
            tuple((o.recipe, o.remaining, o.deadline)
                  for o in self.active_orders),
            self.next_order,
            str(rng_state),
        )

    def copy(self) -> "GameState":
        clone = replace(
            self,
            players=[replace(p) for p in self.players],
            stations={k: replace(v) for k, v in self.stations.items()},
            counters=dict(self.counters),
            sink_dirty=dict(self.sink_dirty),
            active_orders=[replace(o) for o in self.active_orders],
            rng=np.random.default_rng(),
        )
        clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone


def reset(layout: Layout, seed: int,
          episode_ticks: int | None = None) -> GameState:
    state = GameState(
        layout=layout,
        rewards=RewardTable.from_layout(layout),
        seed=seed,
        episode_ticks=episode_ticks or layout.episode_ticks,
        players=[Player(pos=layout.spawn_points[0]),
                 Player(pos=layout.spawn_points[1])],
        plate_stock=layout.plate_stock,
        rng=np.random.default_rng(seed),
    )
    for pos in layout.tiles_of(Tile.POT) + layout.tiles_of(Tile.GRILL):
        state.stations[pos] = Station()
    for pos in layout.tiles_of(Tile.SINK):
        state.sink_dirty[pos] = 0
    while (state.next_order < len(layout.order_schedule)
           and layout.order_schedule[state.next_order].arrival <= 0):
        order = layout.order_schedule[state.next_order]
        state.active_orders.append(
            ActiveOrder(order.recipe, order.deadline, order.deadline))
        state.next_order += 1
    return state


# ---------------------------------------------------------------------------
# Interaction


def _first_sink(state: GameState) -> tuple[int, int] | None:
    sinks = state.layout.tiles_of(Tile.SINK)
    return sinks[0] if sinks else None


def _interact(state: GameState, player_idx: int, pos: tuple[int, int],
              apply: bool) -> list[EventRecord] | None:
    """Interaction of ``player_idx`` with the tile at ``pos``.

    With apply=False, returns [] iff the interaction would have an effect,
    None otherwise; with apply=True, mutates the state and returns the
    emitted events (None when there was no effect).
    """
    player = state.players[player_idx]
    tile = state.layout.grid[pos[0]][pos[1]]
    held = player.held
    tick = state.tick

    def event(kind: EventKind, reward: float = 0.0) -> EventRecord:
        return EventRecord(tick, player_idx, kind, reward)

    if tile in (Tile.RICE, Tile.MEAT, Tile.MUSHROOM):
        if held is not None:
            return None
        taken, kind = {
            Tile.RICE: (Item.RAW_RICE, EventKind.TAKE_RICE),
            Tile.MEAT: (Item.RAW_MEAT, EventKind.TAKE_MEAT),
            Tile.MUSHROOM: (Item.RAW_MUSHROOM, EventKind.TAKE_MUSHROOM),
        }[tile]
        if not apply:
            return []
        player.held = taken
        return [event(kind)]

    if tile == Tile.PLATE_STACK:
        if held is not None or state.plate_stock <= 0:
            return None
        if not apply:
            return []
        player.held = Item.CLEAN_PLATE
        state.plate_stock -= 1
        return []

    if tile == Tile.SINK:
        if held is not None or state.sink_dirty.get(pos, 0) <= 0:
            return None
        if not apply:
            return []
        state.sink_dirty[pos] -= 1
        player.held = Item.CLEAN_PLATE
        return [event(EventKind.WASHING)]

    if tile == Tile.CHOP:
        chopped = {Item.RAW_MEAT: Item.CHOPPED_MEAT,
                   Item.RAW_MUSHROOM: Item.CHOPPED_MUSHROOM}.get(held)
        if chopped is None:
            return None
        if not apply:
            return []
        player.held = chopped
        return [event(EventKind.CHOPPING)]

    if tile == Tile.POT:
        station = state.stations[pos]
        if held == Item.RAW_RICE and station.item is None:
            if not apply:
                return []
            station.item = Item.RAW_RICE
            station.timer = POT_COOK_TICKS
            player.held = None
            return [event(EventKind.POTTING)]
        if station.done and held is not None and add_rice(held) is not None:
            if not apply:
                return []
            player.held = add_rice(held)
            station.item = None
            return [event(EventKind.PLATING)]
        return None

    if tile == Tile.GRILL:
        station = state.stations[pos]
        if (held in (Item.CHOPPED_MEAT, Item.CHOPPED_MUSHROOM)
                and station.item is None):
            if not apply:
                return []
            station.item = held
            station.timer = GRILL_COOK_TICKS
            player.held = None
            return [event(EventKind.GRILLING)]
        if (station.done and held is not None
                and add_grilled(held, station.item) is not None):
            if not apply:
                return []
            player.held = add_grilled(held, station.item)
            station.item = None
            return [event(EventKind.PLATING)]
        return None

    if tile == Tile.SERVE:
        if held not in COMPLETED_DISHES:
            return None
        if not apply:
            return []
        recipe = recipe_for_dish(held)
        match_idx = next((i for i, o in enumerate(state.active_orders)
                          if o.recipe == recipe), None)
        player.held = None
        sink = _first_sink(state)
        if sink is not None:
            state.sink_dirty[sink] += 1
        if match_idx is None:
            return [event(EventKind.DELIVERY_WRONG, state.rewards.wrong)]
        order = state.active_orders.pop(match_idx)
        reward = (state.rewards.delivery_base
                  + state.rewards.delivery_bonus(order.remaining,
                                                 order.deadline))
        return [event(EventKind.DELIVERING),
                event(EventKind.DELIVERY_SUCCESS, reward)]

    if tile == Tile.TRASH:
        if held is None:
            return None
        if not apply:
            return []
        player.held = None
        return []

    if tile == Tile.COUNTER:
        if held is not None and pos not in state.counters:
            if not apply:
                return []
            state.counters[pos] = held
            player.held = None
            return []
        if held is None and pos in state.counters:
            if not apply:
                return []
            player.held = state.counters.pop(pos)
            return []
        return None

    return None


def interaction_has_effect(state: GameState, player_idx: int,
                           pos: tuple[int, int]) -> bool:
    return _interact(state, player_idx, pos, apply=False) is not None


def _primitive_interact_target(state: GameState,
                               player_idx: int) -> tuple[int, int] | None:
    """Faced tile if its interaction fires, else the first adjacent tile
    (N,S,W,E) with a live interaction."""
    player = state.players[player_idx]
    r, c = player.pos
    dr, dc = DELTAS[player.facing]
    faced = (r + dr, c + dc)
    h, w = state.layout.height, state.layout.width
    if 0 <= faced[0] < h and 0 <= faced[1] < w \
            and interaction_has_effect(state, player_idx, faced):
        return faced
    for dr, dc in DELTAS:
        cell = (r + dr, c + dc)
        if 0 <= cell[0] < h and 0 <= cell[1] < w \
                and interaction_has_effect(state, player_idx, cell):
            return cell
    return None


# ---------------------------------------------------------------------------
# Macro resolution


def _macro_candidates(state: GameState, player_idx: int,
                      action: Action) -> list[tuple[int, int]]:
    """Tiles of the macro's class whose interaction currently fires."""
    if action.target == EMPTY_COUNTER:
        tiles = [p for p in state.layout.tiles_of(Tile.COUNTER)
                 if p not in state.counters]
        if state.players[player_idx].held is None:
            return []
    elif action.target == FILLED_COUNTER:
        tiles = [p for p in state.layout.tiles_of(Tile.COUNTER)
                 if p in state.counters]
        if state.players[player_idx].held is not None:
            return []
    else:
        tiles = state.layout.tiles_of(action.target)
    return [p for p in tiles
            if interaction_has_effect(state, player_idx, p)]


def _macro_target(state: GameState, player_idx: int, action: Action,
                  dist: dict[tuple[int, int], int] | None = None,
                  ) -> tuple[tuple[int, int], tuple[int, int]] | None:
    """(target_tile, approach_cell) for the macro's rank-th nearest target,
    or None when no reachable target with a live interaction exists.

    ``dist`` is the BFS map from the player's position (partner blocked);
    it is computed when not supplied so callers resolving many macros for
    one state can share it.
    """
    player = state.players[player_idx]
    candidates = _macro_candidates(state, player_idx, action)
    if not candidates:
        return None
    if dist is None:
        partner = state.players[1 - player_idx]
        dist = bfs_distances(state.layout, player.pos,
                             frozenset([partner.pos]))
    ranked: list[tuple[int, tuple[int, int], tuple[int, int]]] = []
    for pos in candidates:
        cells = [c for c in approach_cells(state.layout, pos) if c in dist]
        if not cells:
            continue
        best = min(cells, key=lambda c: dist[c])
        ranked.append((dist[best], pos, best))
    ranked.sort(key=lambda t: (t[0], t[1]))
    if action.rank >= len(ranked):
        return None
    _, target, approach = ranked[action.rank]
    return target, approach


def resolve_macro(state: GameState, player_idx: int, action: Action,
                  dist: dict[tuple[int, int], int] | None = None,
                  ) -> tuple[str, object] | None:
    """One tick of a macro: ('interact', tile_pos) or ('move', direction).

    None when no reachable target with a live interaction exists.
    """
    resolved = _macro_target(state, player_idx, action, dist)
    if resolved is None:
        return None
    target, approach = resolved
    player = state.players[player_idx]
    if player.pos in approach_cells(state.layout, target):
        return ("interact", target)
    partner = state.players[1 - player_idx]
    direction = first_step(state.layout, player.pos, approach,
                           frozenset([partner.pos]))
    if direction is None:
        return None
    return ("move", direction)


# ---------------------------------------------------------------------------
# Legality and stepping


def legal_actions(state: GameState, player_idx: int) -> np.ndarray:
    """Boolean mask over the 27 actions."""
    if player_idx not in (0, 1):
        raise IndexError(f"invalid player index {player_idx}")
    mask = np.zeros(len(ACTIONS), dtype=bool)
    player = state.players[player_idx]
    partner = state.players[1 - player_idx]
    for direction, (dr, dc) in enumerate(DELTAS):
        cell = (player.pos[0] + dr, player.pos[1] + dc)
        mask[direction] = (state.layout.is_floor(*cell)
                           and cell != partner.pos)
    mask[A_INTERACT] = _primitive_interact_target(state, player_idx) is not None
    mask[A_STAY] = True
    dist = bfs_distances(state.layout, player.pos, frozenset([partner.pos]))
    for action in ACTIONS[6:]:
        mask[action.id] = _macro_target(state, player_idx, action,
                                        dist) is not None
    return mask


def _intent(state: GameState, player_idx: int, action: Action):
    """('move', dir) / ('interact', pos) / ('stay',) for this tick."""
    if action.kind == "macro":
        resolved = resolve_macro(state, player_idx, action)
        return resolved if resolved is not None else ("stay",)
    if action.id == A_STAY:
        return ("stay",)
    if action.id == A_INTERACT:
        target = _primitive_interact_target(state, player_idx)
        return ("interact", target) if target is not None else ("stay",)
    return ("move", action.id)


def step(state: GameState, a0: Action | int, a1: Action | int,
         ) -> tuple[GameState, list[EventRecord], float]:
    """Advance one tick. Both actions must pass legal_actions."""
    a0 = ACTIONS[a0] if isinstance(a0, (int, np.integer)) else a0
    a1 = ACTIONS[a1] if isinstance(a1, (int, np.integer)) else a1
    for idx, action in ((0, a0), (1, a1)):
        if not legal_actions(state, idx)[action.id]:
            raise IllegalActionError(
                f"player {idx}: action {action.name!r} is masked illegal")

    intents = [_intent(state, 0, a0), _intent(state, 1, a1)]
    events: list[EventRecord] = []

    # Simultaneous moves: same-target conflicts go to player 0, swaps block
    # both, and a move into a cell the partner vacates is allowed.
    targets: list[tuple[int, int] | None] = [None, None]
    for idx in (0, 1):
        if intents[idx][0] == "move":
            direction = intents[idx][1]
            dr, dc = DELTAS[direction]
            pos = state.players[idx].pos
            targets[idx] = (pos[0] + dr, pos[1] + dc)
            state.players[idx].facing = direction
    if targets[0] is not None and targets[0] == targets[1]:
        targets[1] = None
    p0, p1 = state.players[0].pos, state.players[1].pos
    if targets[0] == p1 and targets[1] == p0:     # swap attempt
        targets = [None, None]
    moved = [False, False]
    for _ in range(2):                            # fixed-point: vacated cells
        for idx in (0, 1):
            if moved[idx] or targets[idx] is None:
                continue
            other = state.players[1 - idx].pos
            if targets[idx] != other:
                state.players[idx].pos = targets[idx]
                moved[idx] = True

    for idx, intent in enumerate(intents):
        if intent[0] == "interact":
            pos = intent[1]
            state.players[idx].facing = direction_toward(
                state.players[idx].pos, pos) if _adjacent(
                state.players[idx].pos, pos) else state.players[idx].facing
            fired = _interact(state, idx, pos, apply=True)
            if fired:
                events.extend(fired)

    for station in state.stations.values():
        if station.item is not None and station.timer > 0:
            station.timer -= 1

    expired = []
    for order in state.active_orders:
        order.remaining -= 1
        if order.remaining <= 0:
            expired.append(order)
    for order in expired:
        state.active_orders.remove(order)
        events.append(EventRecord(state.tick, -1, EventKind.DELIVERY_LATE,
                                  state.rewards.expired))

    state.tick += 1
    schedule = state.layout.order_schedule
    while (state.next_order < len(schedule)
           and schedule[state.next_order].arrival <= state.tick):
        order = schedule[state.next_order]
        state.active_orders.append(
            ActiveOrder(order.recipe, order.deadline, order.deadline))
        state.next_order += 1

    reward = sum(e.reward for e in events)
    state.score += reward
    return state, events, reward


def _adjacent(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def inventory(state: GameState) -> dict[str, int]:
    """World item accounting, used by the conservation invariant."""
    plates = state.plate_stock
    foods = 0
    for holder in ([p.held for p in state.players]
                   + list(state.counters.values())):
        if holder is None:
            continue
        if holder in (Item.CLEAN_PLATE, Item.PLATE_RICE, Item.PLATE_MEAT,
                      Item.PLATE_MUSHROOM, Item.DISH_RICE_MEAT,
                      Item.DISH_RICE_MUSHROOM):
            plates += 1
        else:
            foods += 1
    for station in state.stations.values():
        if station.item is not None:
            foods += 1
    plates += sum(state.sink_dirty.values())
    return {"plates": plates, "loose_foods": foods}
