"""The 27-entry action table: 6 primitives + 21 navigate-and-interact macros.

Macros are stateless: each tick, the target is re-resolved from the current
state (rank-th nearest tile of the class with a live interaction), the
shortest path is recomputed with the partner treated as an obstacle, and one
primitive of the expansion is executed. With no reachable target the macro
degrades to stay.
"""

from __future__ import annotations

from dataclasses import dataclass

from .layout import Layout, Tile

# Facing / movement directions, fixed resolution order.
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))

# Macro target classes; the two counter targets are dynamic.
EMPTY_COUNTER = "empty_counter"
FILLED_COUNTER = "filled_counter"

_BASE_TARGETS = (
    Tile.RICE, Tile.MEAT, Tile.MUSHROOM, Tile.PLATE_STACK, Tile.SINK,
    Tile.CHOP, Tile.POT, Tile.GRILL, Tile.SERVE, Tile.TRASH,
    EMPTY_COUNTER, FILLED_COUNTER,
)
# Second-instance duplicates for the nine station classes, padding to 21.
_DUP_TARGETS = (
    Tile.RICE, Tile.MEAT, Tile.MUSHROOM, Tile.PLATE_STACK, Tile.SINK,
    Tile.CHOP, Tile.POT, Tile.GRILL, Tile.SERVE,
)


@dataclass(frozen=True)
class Action:
    id: int
    name: str
    kind: str                      # "primitive" | "macro"
    target: Tile | str | None = None
    rank: int = 0                  # 0 = nearest instance, 1 = second nearest


def _target_name(target: Tile | str) -> str:
    return target.name.lower() if isinstance(target, Tile) else target


def _build_table() -> tuple[Action, ...]:
    table = [
        Action(0, "up", "primitive"),
        Action(1, "down", "primitive"),
        Action(2, "left", "primitive"),
        Action(3, "right", "primitive"),
        Action(4, "interact", "primitive"),
        Action(5, "stay", "primitive"),
    ]
    next_id = 6
    for target in _BASE_TARGETS:
        table.append(Action(next_id, f"goto_{_target_name(target)}", "macro",
                            target, 0))
        next_id += 1
    for target in _DUP_TARGETS:
        table.append(Action(next_id, f"goto_{_target_name(target)}_2", "macro",
                            target, 1))
        next_id += 1
    assert next_id == 27
    return tuple(table)


ACTIONS: tuple[Action, ...] = _build_table()
N_ACTIONS = len(ACTIONS)
PRIMITIVES = ACTIONS[:6]
MACROS = ACTIONS[6:]

A_UP, A_DOWN, A_LEFT, A_RIGHT, A_INTERACT, A_STAY = range(6)


def action_table() -> list[tuple[int, str, str]]:
    """(id, name, kind) rows for CLI introspection."""
    return [(a.id, a.name, a.kind) for a in ACTIONS]


def bfs_distances(layout: Layout, start: tuple[int, int],
                  blocked: frozenset[tuple[int, int]] = frozenset(),
                  ) -> dict[tuple[int, int], int]:
    """Shortest 4-neighbor path lengths over floor tiles from ``start``.

    ``blocked`` floor cells (the partner) are impassable but ``start`` itself
    is always expanded.
    """
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt: list[tuple[int, int]] = []
        for (r, c) in frontier:
            d = dist[(r, c)]
            for dr, dc in DELTAS:
                cell = (r + dr, c + dc)
                if (cell not in dist and layout.is_floor(*cell)
                        and cell not in blocked):
                    dist[cell] = d + 1
                    nxt.append(cell)
        frontier = nxt
    return dist


def approach_cells(layout: Layout, pos: tuple[int, int]) -> list[tuple[int, int]]:
    """Floor cells adjacent to a station tile, fixed N,S,W,E order."""
    r, c = pos
    return [(r + dr, c + dc) for dr, dc in DELTAS
            if layout.is_floor(r + dr, c + dc)]


def direction_toward(src: tuple[int, int], dst: tuple[int, int]) -> int:
    """Facing direction from ``src`` to the 4-adjacent cell ``dst``."""
    dr, dc = dst[0] - src[0], dst[1] - src[1]
    return DELTAS.index((dr, dc))


def first_step(layout: Layout, start: tuple[int, int],
               goal: tuple[int, int],
               blocked: frozenset[tuple[int, int]] = frozenset()) -> int | None:
    """Direction of the first move on a shortest start->goal path.

    Ties are broken in UP, DOWN, LEFT, RIGHT order. Returns None when start
    equals goal or no path exists.
    """
    if start == goal:
        return None
    dist = bfs_distances(layout, goal, blocked)
    if start not in dist:
        return None
    d = dist[start]
    for direction, (dr, dc) in enumerate(DELTAS):
        cell = (start[0] + dr, start[1] + dc)
        if dist.get(cell, -1) == d - 1:
            return direction
    return None
