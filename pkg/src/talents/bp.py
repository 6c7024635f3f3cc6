"""Scripted behavior-preference partner population.

Each policy is a greedy macro planner whose utilities are shifted by a
nine-event preference vector: discouraged events are avoided whenever any
alternative exists, encouraged events get a flat utility bonus. The nine
events and their shaping magnitudes follow the fixed table: the six
cooking/serving events pay (-30, +20), the three dispenser events (-15, +10).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env.actions import (
    ACTIONS, A_STAY, Action, approach_cells, bfs_distances, first_step,
)
from .env.items import Item, COMPLETED_DISHES, RECIPES
from .env.layout import Tile
from .env.state import (
    BP_EVENTS, EventKind, EventRecord, GameState, _macro_target,
    legal_actions,
)

ENCOURAGED, DISCOURAGED, NEUTRAL = "E", "D", "N"

#: (discouraged, encouraged) shaping per event, canonical order.
SHAPED_REWARDS: dict[EventKind, tuple[float, float]] = {
    EventKind.PLATING: (-30.0, 20.0),
    EventKind.WASHING: (-30.0, 20.0),
    EventKind.DELIVERING: (-30.0, 20.0),
    EventKind.CHOPPING: (-30.0, 20.0),
    EventKind.POTTING: (-30.0, 20.0),
    EventKind.GRILLING: (-30.0, 20.0),
    EventKind.TAKE_MUSHROOM: (-15.0, 10.0),
    EventKind.TAKE_RICE: (-15.0, 10.0),
    EventKind.TAKE_MEAT: (-15.0, 10.0),
}

#: Category slices of the preference vector (Table rows are grouped in
#: threes: serving-related, cooking-related, dispenser-related).
CATEGORIES = ((0, 1, 2), (3, 4, 5), (6, 7, 8))


@dataclass(frozen=True)
class PreferenceVector:
    entries: tuple[str, ...]   # nine of {"E", "D", "N"}

    def __post_init__(self):
        if len(self.entries) != 9 or any(
                e not in (ENCOURAGED, DISCOURAGED, NEUTRAL)
                for e in self.entries):
            raise ValueError(f"bad preference entries {self.entries!r}")

    @classmethod
    def from_code(cls, code: str) -> "PreferenceVector":
        return cls(tuple(code))

    @property
    def code(self) -> str:
        return "".join(self.entries)

    def of(self, event: EventKind) -> str:
        return self.entries[BP_EVENTS.index(event)]

    @classmethod
    def neutral(cls) -> "PreferenceVector":
        return cls(tuple(NEUTRAL) * 9)


def shaped_reward(events: list[EventRecord], prefs: PreferenceVector) -> float:
    """Preference-matched shaping summed over one step's events."""
    total = 0.0
    for ev in events:
        if ev.kind not in SHAPED_REWARDS:
            continue
        pref = prefs.of(ev.kind)
        if pref == ENCOURAGED:
            total += SHAPED_REWARDS[ev.kind][1]
        elif pref == DISCOURAGED:
            total += SHAPED_REWARDS[ev.kind][0]
    return total


# ---------------------------------------------------------------------------
# Greedy planner


def _macro_event(state: GameState, player_idx: int,
                 action: Action) -> EventKind | None:
    """The preference event the macro's interact would fire, if any."""
    held = state.players[player_idx].held
    target = action.target
    if target == Tile.RICE:
        return EventKind.TAKE_RICE
    if target == Tile.MEAT:
        return EventKind.TAKE_MEAT
    if target == Tile.MUSHROOM:
        return EventKind.TAKE_MUSHROOM
    if target == Tile.SINK:
        return EventKind.WASHING
    if target == Tile.CHOP:
        return EventKind.CHOPPING
    if target == Tile.POT:
        return EventKind.POTTING if held == Item.RAW_RICE else EventKind.PLATING
    if target == Tile.GRILL:
        if held in (Item.CHOPPED_MEAT, Item.CHOPPED_MUSHROOM):
            return EventKind.GRILLING
        return EventKind.PLATING
    if target == Tile.SERVE:
        return EventKind.DELIVERING
    return None


def _world_flags(state: GameState, dist: dict | None = None) -> dict:
    """Coarse pipeline summary used by the task utilities.

    With ``dist`` (a BFS map from one player's position) the station-state
    flags only count stations that player can actually walk to, so items
    whose station sits across a divider are not treated as usable."""
    order = state.active_orders[0] if state.active_orders else None
    recipe = RECIPES[order.recipe] if order else None
    items_about = [p.held for p in state.players] + \
        list(state.counters.values())

    def reachable(pos):
        return dist is None or any(
            c in dist for c in approach_cells(state.layout, pos))

    all_pots = [state.stations[p] for p in state.layout.tiles_of(Tile.POT)]
    all_grills = [state.stations[p]
                  for p in state.layout.tiles_of(Tile.GRILL)]
    pots = [state.stations[p] for p in state.layout.tiles_of(Tile.POT)
            if reachable(p)]
    grills = [state.stations[p] for p in state.layout.tiles_of(Tile.GRILL)
              if reachable(p)]
    present = [i for i in items_about if i is not None]
    # Partial plates create demand for the component they are waiting on.
    awaiting_rice = any(i in (Item.PLATE_MEAT, Item.PLATE_MUSHROOM)
                        for i in present)
    awaiting_protein = Item.PLATE_RICE in present
    rice_in_play = (
        any(s.item is not None for s in all_pots)
        or Item.RAW_RICE in present
        or any(i in COMPLETED_DISHES for i in present)
        or (Item.PLATE_RICE in present and not awaiting_rice))
    protein_in_play = False
    if recipe is not None:
        plate = Item.PLATE_MEAT if recipe.id == "A" else Item.PLATE_MUSHROOM
        protein_in_play = (
            any(s.item == recipe.chopped_protein for s in all_grills)
            or recipe.raw_protein in present
            or recipe.chopped_protein in present
            or recipe.dish in present
            or (plate in present and not awaiting_protein))
    return {
        "order": order,
        "recipe": recipe,
        "pot_cooking": any(s.item is not None and not s.done for s in pots),
        "pot_done": any(s.done for s in pots),
        "pot_soon": any(s.item is not None and s.timer <= 40 for s in pots),
        "grill_done": any(s.done for s in grills),
        "grill_soon": any(s.item is not None and s.timer <= 40
                          for s in grills),
        "rice_in_play": rice_in_play,
        "protein_in_play": protein_in_play,
        "plate_in_hands": any(p.held in (Item.CLEAN_PLATE, Item.PLATE_RICE,
                                         Item.PLATE_MEAT, Item.PLATE_MUSHROOM)
                              for p in state.players),
        "pot_free": any(s.item is None for s in pots),
        "grill_free": any(s.item is None for s in grills),
        "pot_busy": any(s.item is not None and not s.done for s in pots),
        "grill_busy": any(s.item is not None and not s.done for s in grills),
        "pot_reachable": bool(pots),
        "grill_reachable": bool(grills),
        "raw_rice_present": Item.RAW_RICE in present,
        "chopped_present": any(i in (Item.CHOPPED_MEAT,
                                     Item.CHOPPED_MUSHROOM)
                               for i in present),
        "rice_reachable_counter": any(
            i == Item.RAW_RICE and reachable(p)
            for p, i in state.counters.items()),
        "chopped_reachable_counter": any(
            i in (Item.CHOPPED_MEAT, Item.CHOPPED_MUSHROOM) and reachable(p)
            for p, i in state.counters.items()),
        "serve_reachable": any(reachable(p)
                               for p in state.layout.tiles_of(Tile.SERVE)),
        "chop_reachable": any(reachable(p)
                              for p in state.layout.tiles_of(Tile.CHOP)),
        "dirty": sum(state.sink_dirty.values()),
    }


def _item_value(state: GameState, flags: dict, item: Item) -> float:
    """How useful it is to be holding ``item`` right now."""
    from .env.items import recipe_for_dish

    if item in COMPLETED_DISHES:
        if flags["serve_reachable"] and any(
                o.recipe == recipe_for_dish(item)
                for o in state.active_orders):
            return 10.0
        return 0.5
    if item in (Item.CLEAN_PLATE, Item.PLATE_RICE, Item.PLATE_MEAT,
                Item.PLATE_MUSHROOM):
        # A plate is only useful at a station it can actually collect from:
        # partial plates with rice finish at the grill and vice versa.
        complement = False
        if item == Item.PLATE_RICE:
            done, soon = flags["grill_done"], flags["grill_soon"]
            # Hold the plate while the protein cooks; while the protein
            # still sits on a counter this player can reach, it goes on the
            # grill first and the plate should stay parked.
            complement = flags["grill_reachable"] and (
                flags["grill_busy"]
                or (flags["chopped_present"]
                    and not flags["chopped_reachable_counter"]))
        elif item in (Item.PLATE_MEAT, Item.PLATE_MUSHROOM):
            done, soon = flags["pot_done"], flags["pot_soon"]
            complement = flags["pot_reachable"] and (
                flags["pot_busy"]
                or (flags["raw_rice_present"]
                    and not flags["rice_reachable_counter"]))
        else:
            done = flags["pot_done"] or flags["grill_done"]
            soon = flags["pot_soon"] or flags["grill_soon"]
        if done:
            return 7.0
        if soon:
            return 2.5   # worth holding on to; something finishes shortly
        if complement:
            return 2.0   # the missing component exists; free up its counter
        return 0.4
    if item == Item.RAW_RICE:
        return 4.0 if flags["pot_free"] else 0.2
    if item in (Item.CHOPPED_MEAT, Item.CHOPPED_MUSHROOM):
        return 4.5 if flags["grill_free"] else 0.3
    if item in (Item.RAW_MEAT, Item.RAW_MUSHROOM):
        recipe = flags["recipe"]
        return 3.0 if (flags["chop_reachable"] and recipe is not None
                       and recipe.raw_protein == item) else 0.2
    return 0.2


def _pickup_value(state: GameState, flags: dict, local: dict,
                  pos, item: Item) -> float:
    """Value of lifting ``item`` off counter ``pos``: its local use value,
    or a ferry value when it is useful on the partner's side and can be
    moved to a counter both players reach."""
    value = _item_value(state, local, item)
    if value >= 1.0:
        return value
    pdist = local.get("partner_dist")
    if (pdist is not None and local.get("shared_empty")
            and not any(c in pdist
                        for c in approach_cells(state.layout, pos))):
        gvalue = _item_value(state, flags, item)
        if gvalue >= 1.0:
            return min(0.5 * gvalue, 2.0)
    return value


def _task_utility(state: GameState, player_idx: int, action: Action,
                  flags: dict, target_pos=None,
                  local: dict | None = None) -> float:
    held = state.players[player_idx].held
    target = action.target
    recipe = flags["recipe"]
    local = flags if local is None else local

    if target == Tile.RICE:
        return 6.0 if (flags["order"] and not flags["rice_in_play"]) else 0.15
    if target in (Tile.MEAT, Tile.MUSHROOM):
        wanted = (recipe is not None and recipe.raw_protein ==
                  (Item.RAW_MEAT if target == Tile.MEAT
                   else Item.RAW_MUSHROOM))
        return 6.0 if (wanted and not flags["protein_in_play"]) else 0.15
    if target == Tile.POT:
        if held == Item.RAW_RICE:
            return 8.0
        return 9.0   # collecting cooked rice onto a plate
    if target == Tile.CHOP:
        wanted = recipe is not None and recipe.raw_protein == held
        return 8.0 if wanted else 0.5
    if target == Tile.GRILL:
        if held in (Item.CHOPPED_MEAT, Item.CHOPPED_MUSHROOM):
            wanted = recipe is not None and recipe.chopped_protein == held
            return 8.0 if wanted else 0.3
        return 9.0   # collecting the grilled protein
    if target == Tile.PLATE_STACK:
        ready_soon = (flags["pot_done"] or flags["grill_done"]
                      or flags["pot_soon"] or flags["grill_soon"])
        return 5.0 if (ready_soon and not flags["plate_in_hands"]) else 0.1
    if target == Tile.SINK:
        # Washing while a plate already circulates invites two half-filled
        # plates that can never be merged; only recycle when plates run out.
        if flags["plate_in_hands"]:
            return 0.15
        return 5.0 if state.plate_stock == 0 else 0.5
    if target == Tile.SERVE:
        if held in COMPLETED_DISHES and flags["order"] is not None:
            from .env.items import recipe_for_dish
            matches = any(o.recipe == recipe_for_dish(held)
                          for o in state.active_orders)
            return 12.0 if matches else 0.2
        return 0.2
    if target == Tile.TRASH:
        return 0.1
    if target == "empty_counter":
        # Unload items that cannot progress right now; keep useful ones.
        # A "stuck" hold (no station for it reachable) is unloaded too, so
        # split kitchens can pass items across shared counters.
        if held is None or _item_value(state, local, held) >= 1.0:
            return 0.05
        return 0.8 if flags.get("held_stuck") else 0.3
    if target == "filled_counter":
        item = state.counters.get(target_pos)
        if item is None:
            return 0.3
        # Pick an item back up only if holding it is actually useful now;
        # otherwise leave it parked instead of churning it between counters.
        value = _pickup_value(state, flags, local, target_pos, item)
        return value if value >= 1.0 else 0.05
    return 0.0


@dataclass(frozen=True)
class ScriptedPolicy:
    prefs: PreferenceVector
    seed: int = 0
    name: str = ""

    def _jitter(self, tick: int, action_id: int) -> float:
        mix = (self.seed * 1000003 + tick * 9176 + action_id * 2654435761)
        return ((mix % 1000003) % 997) / 1e6

    def _drift(self, state: GameState, player_idx: int,
               mask: np.ndarray) -> int:
        """Idle behavior: step away from the partner and off station
        frontage, so a parked player never blocks a corridor or the only
        approach cell of a station."""
        from .env.actions import DELTAS

        layout = state.layout
        player = state.players[player_idx]
        partner = state.players[1 - player_idx]
        away = bfs_distances(layout, partner.pos)

        def frontage(cell):
            r, c = cell
            return sum(layout.grid[nr][nc] not in (Tile.FLOOR, Tile.COUNTER)
                       for nr, nc in ((r - 1, c), (r + 1, c),
                                      (r, c - 1), (r, c + 1))
                       if 0 <= nr < layout.height and 0 <= nc < layout.width)

        def score(cell):
            return away.get(cell, 0) - 3.0 * frontage(cell)

        best, best_dir = score(player.pos), None
        for direction, (dr, dc) in enumerate(DELTAS):
            if not mask[direction]:
                continue
            cell = (player.pos[0] + dr, player.pos[1] + dc)
            if score(cell) > best:
                best, best_dir = score(cell), direction
        return A_STAY if best_dir is None else best_dir

    def _counter_walk(self, state: GameState, player_idx: int, dist,
                      flags: dict, local: dict, mask: np.ndarray,
                      best_utility: float) -> tuple[float, int] | None:
        """(utility, action_id) steering toward the most valuable reachable
        filled counter, or None when no such counter beats ``best_utility``.

        When that counter is already the macro's nearest instance the macro
        id is returned; otherwise a legal primitive step toward it."""
        goto_filled = next(a for a in ACTIONS
                           if a.name == "goto_filled_counter")
        nearest = _macro_target(state, player_idx, goto_filled, dist)
        player = state.players[player_idx]
        partner = state.players[1 - player_idx]
        best = None
        for pos, item in sorted(state.counters.items()):
            value = _pickup_value(state, flags, local, pos, item)
            if value < 1.0:
                continue
            cells = [c for c in approach_cells(state.layout, pos)
                     if c in dist]
            if not cells:
                continue
            approach = min(cells, key=lambda c: (dist[c], c))
            utility = value - 0.03 * dist[approach]
            if best is None or utility > best[0]:
                best = (utility, pos, approach)
        if best is None or best[0] <= best_utility:
            return None
        utility, pos, approach = best
        if nearest is not None and nearest[0] == pos:
            return utility, goto_filled.id
        direction = first_step(state.layout, player.pos, approach,
                               frozenset([partner.pos]))
        if direction is None:
            # Already standing at the approach, but a lower-value counter
            # shares it and shadows the macro. Lift the shadowing item so
            # it can be parked elsewhere.
            if nearest is not None and mask[goto_filled.id]:
                return utility, goto_filled.id
            return None
        if not mask[direction]:
            return None
        return utility, direction

    def _park_walk(self, state: GameState, player_idx: int, dist,
                   local: dict, mask: np.ndarray) -> int | None:
        """Action steering toward the nearest empty counter that does not
        share an approach cell with any valuable filled counter, so parking
        a junk item never shadows a pickup. None when no such spot exists."""
        goto_empty = next(a for a in ACTIONS
                          if a.name == "goto_empty_counter")
        layout = state.layout
        player = state.players[player_idx]
        partner = state.players[1 - player_idx]
        valuable_cells: set = set()
        for pos, item in state.counters.items():
            if _item_value(state, local, item) >= 1.0:
                valuable_cells.update(approach_cells(layout, pos))
        if not valuable_cells:
            return None
        best = None
        for pos in layout.tiles_of(Tile.COUNTER):
            if pos in state.counters:
                continue
            cells = [c for c in approach_cells(layout, pos) if c in dist]
            if not cells:
                continue
            if any(c in valuable_cells
                   for c in approach_cells(layout, pos)):
                continue
            approach = min(cells, key=lambda c: (dist[c], c))
            if best is None or dist[approach] < dist[best[1]]:
                best = (pos, approach)
        if best is None:
            return None
        pos, approach = best
        nearest = _macro_target(state, player_idx, goto_empty, dist)
        if nearest is not None and nearest[0] == pos:
            return goto_empty.id
        direction = first_step(layout, player.pos, approach,
                               frozenset([partner.pos]))
        if direction is None or not mask[direction]:
            return None
        return direction

    def _handoff_walk(self, state: GameState, player_idx: int, dist,
                      local: dict, mask: np.ndarray) -> int | None:
        """Action steering toward the nearest empty counter the partner can
        also reach, for parking an item this player cannot use. Spots that
        would shadow a valuable filled counter are avoided when possible.
        None when no shared counter exists."""
        goto_empty = next(a for a in ACTIONS
                          if a.name == "goto_empty_counter")
        layout = state.layout
        player = state.players[player_idx]
        partner = state.players[1 - player_idx]
        pdist = bfs_distances(layout, partner.pos)
        valuable_cells: set = set()
        for pos, item in state.counters.items():
            if _item_value(state, local, item) >= 1.0:
                valuable_cells.update(approach_cells(layout, pos))
        best = best_shadowed = None
        for pos in layout.tiles_of(Tile.COUNTER):
            if pos in state.counters:
                continue
            cells = [c for c in approach_cells(layout, pos) if c in dist]
            if not cells:
                continue
            if not any(c in pdist for c in approach_cells(layout, pos)):
                continue
            approach = min(cells, key=lambda c: (dist[c], c))
            shadows = any(c in valuable_cells
                          for c in approach_cells(layout, pos))
            if shadows:
                if best_shadowed is None or \
                        dist[approach] < dist[best_shadowed[1]]:
                    best_shadowed = (pos, approach)
            elif best is None or dist[approach] < dist[best[1]]:
                best = (pos, approach)
        best = best or best_shadowed
        if best is None:
            return None
        pos, approach = best
        nearest = _macro_target(state, player_idx, goto_empty, dist)
        if nearest is not None and nearest[0] == pos:
            return goto_empty.id
        direction = first_step(layout, player.pos, approach,
                               frozenset([partner.pos]))
        if direction is None or not mask[direction]:
            return None
        return direction

    def act(self, state: GameState, player_idx: int,
            mask: np.ndarray | None = None) -> int:
        """Deterministic greedy action; always legal."""
        if mask is None:
            mask = legal_actions(state, player_idx)
        player = state.players[player_idx]
        partner = state.players[1 - player_idx]
        dist = bfs_distances(state.layout, player.pos,
                             frozenset([partner.pos]))
        flags = _world_flags(state)
        local = _world_flags(state, dist)
        pdist = bfs_distances(state.layout, partner.pos)
        local["partner_dist"] = pdist
        local["shared_empty"] = any(
            pos not in state.counters
            and any(c in dist for c in approach_cells(state.layout, pos))
            and any(c in pdist for c in approach_cells(state.layout, pos))
            for pos in state.layout.tiles_of(Tile.COUNTER))
        if player.held is not None:
            stuck = not any(
                mask[a.id] and a.target not in ("empty_counter",
                                                "filled_counter", Tile.TRASH)
                for a in ACTIONS[6:])
            flags["held_stuck"] = local["held_stuck"] = stuck

        preferred: list[tuple[float, int]] = []
        discouraged: list[tuple[float, int]] = []
        at_target: dict[int, bool] = {}
        for action in ACTIONS[6:]:
            if not mask[action.id]:
                continue
            event = _macro_event(state, player_idx, action)
            resolved = _macro_target(state, player_idx, action, dist)
            if resolved is None:
                continue
            target, approach = resolved
            at_target[action.id] = approach == player.pos
            utility = _task_utility(state, player_idx, action, flags, target,
                                    local)
            utility -= 0.03 * dist.get(approach, 0)
            if abs(partner.pos[0] - target[0]) + \
                    abs(partner.pos[1] - target[1]) == 1:
                utility -= 0.5   # partner already working that tile
            utility -= 0.5 * action.rank
            utility += self._jitter(state.tick, action.id)
            pref = NEUTRAL if event is None else self.prefs.of(event)
            if pref == DISCOURAGED:
                discouraged.append((utility, action.id))
            else:
                if pref == ENCOURAGED:
                    utility += 8.0
                preferred.append((utility, action.id))

        # Discouraged-event macros are taken only when nothing else exists.
        pool = preferred or discouraged
        best_utility, best_id = -np.inf, None
        if pool:
            pool.sort(key=lambda t: (-t[0], t[1]))
            best_utility, best_id = pool[0]
        # A valuable item parked on a counter that is not the nearest one
        # cannot be reached through the macro; walk toward it until it is.
        if player.held is None:
            walk = self._counter_walk(state, player_idx, dist, flags, local,
                                      mask, best_utility)
            if walk is not None:
                best_utility, best_id = walk
                at_target[best_id] = False
        # A stuck hold must land on a counter the partner can reach, or the
        # hand-off dies on a wall counter in this player's half. A plain
        # junk hold is parked clear of valuable counters instead.
        if (best_id is not None and player.held is not None
                and ACTIONS[best_id].target == "empty_counter"):
            if flags.get("held_stuck"):
                override = self._handoff_walk(state, player_idx, dist, local,
                                              mask)
            else:
                override = self._park_walk(state, player_idx, dist, local,
                                           mask)
            if override is not None:
                best_id = override
                at_target[best_id] = False
        # Nothing worthwhile to do: wait for a timer, out of the way.
        if best_id is None or best_utility < 0.25:
            return self._drift(state, player_idx, mask)
        # Deadlock breaker: when the two players are crowding each other and
        # this one still has to travel, the higher-index player periodically
        # yields so symmetric replanning cannot mirror-oscillate forever.
        manhattan = abs(player.pos[0] - partner.pos[0]) + \
            abs(player.pos[1] - partner.pos[1])
        if (player_idx == 1 and manhattan <= 2
                and not at_target.get(best_id, False)
                and state.tick % 8 < 3):
            return A_STAY
        return best_id


# ---------------------------------------------------------------------------
# Population construction


def _category_codes(category: tuple[int, int, int]) -> list[str]:
    codes = []
    for bits in range(8):
        entries = [NEUTRAL] * 9
        for bit, idx in enumerate(category):
            entries[idx] = ENCOURAGED if (bits >> bit) & 1 else DISCOURAGED
        codes.append("".join(entries))
    return codes


def build_population(categories=CATEGORIES, seed: int = 0,
                     ) -> list[ScriptedPolicy]:
    """All 2^3 sign permutations per category: 8 x 3 = 24 policies."""
    policies = []
    for cat_idx, category in enumerate(categories):
        for code in _category_codes(category):
            policies.append(ScriptedPolicy(
                PreferenceVector.from_code(code),
                seed=seed + len(policies),
                name=f"bp_c{cat_idx}_{code}"))
    return policies


def population_codes(categories=CATEGORIES) -> set[str]:
    return {code for category in categories
            for code in _category_codes(category)}


def _hamming(a: str, b: str) -> int:
    return sum(x != y for x, y in zip(a, b))


def holdout_set(seed: int = 0) -> list[ScriptedPolicy]:
    """12 mixed-category policies, Hamming >= 2 from every training code."""
    train = population_codes()
    rng = np.random.default_rng(seed)
    chosen: list[str] = []
    while len(chosen) < 12:
        entries = [NEUTRAL] * 9
        # Four signed entries spread over at least two categories.
        idx = rng.choice(9, size=4, replace=False)
        if len({i // 3 for i in idx}) < 2:
            continue
        for i in idx:
            entries[i] = ENCOURAGED if rng.random() < 0.5 else DISCOURAGED
        code = "".join(entries)
        if code in chosen:
            continue
        if all(_hamming(code, t) >= 2 for t in train):
            chosen.append(code)
    return [ScriptedPolicy(PreferenceVector.from_code(code),
                           seed=1000 + i, name=f"holdout_{code}")
            for i, code in enumerate(chosen)]


def neutral_planner(seed: int = 0) -> ScriptedPolicy:
    """Pure task-utility planner; stands in for a best response."""
    return ScriptedPolicy(PreferenceVector.neutral(), seed=seed,
                          name="neutral")
