"""Layout files: a character grid followed by a key-value header block.

Grammar (bit-exact)::

    <grid line>+        one character per tile, all lines equal length
    <blank line>
    (<key>: <value>)*   one per line, '#' starts a comment line

Grid characters::

    ' '  floor            '#'  wall / counter
    'R'  rice dispenser   'M'  meat dispenser   'U'  mushroom dispenser
    'P'  plate stack      'S'  sink             'C'  chop board
    'O'  pot              'G'  grill            'W'  serve window
    'T'  trash            '1'/'2'  spawn points (floor tiles)

Header keys::

    name: <string>
    episode_ticks: <int>               default 2400
    plate_stock: <int>                 default 2
    order: <A|B> <arrival> <deadline>  repeatable, deadline > 0
    reward.<field>: <number>           reward table override
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path


class Tile(enum.IntEnum):
    FLOOR = 0
    COUNTER = 1
    RICE = 2
    MEAT = 3
    MUSHROOM = 4
    PLATE_STACK = 5
    SINK = 6
    CHOP = 7
    POT = 8
    GRILL = 9
    SERVE = 10
    TRASH = 11


CHAR_TO_TILE = {
    " ": Tile.FLOOR, "#": Tile.COUNTER,
    "R": Tile.RICE, "M": Tile.MEAT, "U": Tile.MUSHROOM,
    "P": Tile.PLATE_STACK, "S": Tile.SINK, "C": Tile.CHOP,
    "O": Tile.POT, "G": Tile.GRILL, "W": Tile.SERVE, "T": Tile.TRASH,
}
TILE_TO_CHAR = {v: k for k, v in CHAR_TO_TILE.items()}

#: Station classes that must appear when referenced by a recipe. Both recipes
#: jointly reference every station class except TRASH, which is still
#: required for play.
REQUIRED_STATIONS = (
    Tile.RICE, Tile.MEAT, Tile.MUSHROOM, Tile.PLATE_STACK, Tile.SINK,
    Tile.CHOP, Tile.POT, Tile.GRILL, Tile.SERVE,
)


class LayoutError(ValueError):
    """Malformed or invalid layout file."""


@dataclass(frozen=True)
class Order:
    recipe: str      # "A" | "B"
    arrival: int     # tick at which the order becomes active
    deadline: int    # ticks from arrival to expiry


@dataclass
class Layout:
    name: str
    grid: tuple[tuple[Tile, ...], ...]   # grid[row][col]
    spawn_points: tuple[tuple[int, int], tuple[int, int]]  # (row, col)
    order_schedule: tuple[Order, ...]
    episode_ticks: int = 2400
    plate_stock: int = 2
    reward_overrides: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def height(self) -> int:
        return len(self.grid)

    @property
    def width(self) -> int:
        return len(self.grid[0])

    def tiles_of(self, tile: Tile) -> list[tuple[int, int]]:
        """All (row, col) positions of a tile class, row-major order."""
        cache = self.__dict__.setdefault("_tiles_cache", {})
        if tile not in cache:
            cache[tile] = [(r, c) for r, row in enumerate(self.grid)
                           for c, t in enumerate(row) if t == tile]
        return cache[tile]

    def is_floor(self, r: int, c: int) -> bool:
        return (0 <= r < self.height and 0 <= c < self.width
                and self.grid[r][c] == Tile.FLOOR)


def _flood_floor(layout: Layout, start: tuple[int, int]) -> set[tuple[int, int]]:
    seen = {start}
    stack = [start]
    while stack:
        r, c = stack.pop()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nxt = (r + dr, c + dc)
            if nxt not in seen and layout.is_floor(*nxt):
                seen.add(nxt)
                stack.append(nxt)
    return seen


def parse_layout(text: str, name: str = "unnamed") -> Layout:
    lines = text.split("\n")
    grid_lines: list[str] = []
    i = 0
    while i < len(lines) and lines[i].strip("\r"):
        grid_lines.append(lines[i].rstrip("\r"))
        i += 1
    if not grid_lines:
        raise LayoutError("empty layout file")

    width = len(grid_lines[0])
    grid: list[tuple[Tile, ...]] = []
    spawns: dict[str, tuple[int, int]] = {}
    for r, line in enumerate(grid_lines):
        if len(line) != width:
            raise LayoutError(f"grid not rectangular at line {r + 1}")
        row = []
        for c, ch in enumerate(line):
            if ch in ("1", "2"):
                if ch in spawns:
                    raise LayoutError(f"duplicate spawn point '{ch}'")
                spawns[ch] = (r, c)
                row.append(Tile.FLOOR)
            elif ch in CHAR_TO_TILE:
                row.append(CHAR_TO_TILE[ch])
            else:
                raise LayoutError(f"unknown tile character {ch!r} at {(r, c)}")
        grid.append(tuple(row))

    header: dict[str, str] = {}
    orders: list[Order] = []
    overrides: dict[str, float] = {}
    for line in lines[i:]:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise LayoutError(f"malformed header line: {line!r}")
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if key == "order":
            parts = value.split()
            if len(parts) != 3 or parts[0] not in ("A", "B"):
                raise LayoutError(f"malformed order line: {line!r}")
            orders.append(Order(parts[0], int(parts[1]), int(parts[2])))
        elif key.startswith("reward."):
            overrides[key[len("reward."):]] = float(value)
        else:
            header[key] = value

    if "1" not in spawns or "2" not in spawns:
        raise LayoutError("layout must declare exactly 2 spawn points")

    layout = Layout(
        name=header.get("name", name),
        grid=tuple(grid),
        spawn_points=(spawns["1"], spawns["2"]),
        order_schedule=tuple(sorted(orders, key=lambda o: (o.arrival, o.recipe))),
        episode_ticks=int(header.get("episode_ticks", 2400)),
        plate_stock=int(header.get("plate_stock", 2)),
        reward_overrides=overrides,
    )
    _validate(layout)
    return layout


def _validate(layout: Layout) -> None:
    for order in layout.order_schedule:
        if order.deadline <= 0:
            raise LayoutError(f"order deadline must be > 0: {order}")
    for station in REQUIRED_STATIONS:
        if not layout.tiles_of(station):
            raise LayoutError(f"missing required station {station.name}")
    if not layout.tiles_of(Tile.TRASH):
        layout.warnings.append("no trash tile; held items cannot be discarded")

    # Reachability is a warning, not an error: a station behind walls loads
    # but is flagged.
    reachable = _flood_floor(layout, layout.spawn_points[0])
    reachable |= _flood_floor(layout, layout.spawn_points[1])
    for station in REQUIRED_STATIONS + (Tile.TRASH,):
        for (r, c) in layout.tiles_of(station):
            adjacent = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            if not any(p in reachable for p in adjacent):
                layout.warnings.append(
                    f"{station.name} at {(r, c)} unreachable by either player")


def load_layout(path: str | Path) -> Layout:
    path = Path(path)
    return parse_layout(path.read_text(), name=path.stem)


def builtin_layout_path(name: str) -> Path:
    """Path of a named layout shipped with the package."""
    return Path(__file__).parent / "layouts" / f"{name}.layout"


def load_builtin(name: str) -> Layout:
    path = builtin_layout_path(name)
    if not path.exists():
        raise LayoutError(f"unknown builtin layout {name!r}")
    return load_layout(path)


def resolve_layout(spec: str) -> Layout:
    """Load a layout from a builtin name or a file path."""
    if builtin_layout_path(spec).exists():
        return load_builtin(spec)
    return load_layout(spec)
