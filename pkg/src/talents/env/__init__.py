from .layout import Layout, Tile, LayoutError, load_layout, parse_layout
from .items import Item, Recipe, RECIPES, recipe_for_dish
from .actions import (
    Action,
    ACTIONS,
    N_ACTIONS,
    PRIMITIVES,
    MACROS,
    action_table,
)
from .state import (
    GameState,
    EventRecord,
    EventKind,
    IllegalActionError,
    RewardTable,
    reset,
    step,
    legal_actions,
)
from .featurize import featurize, reconstruct, channel_spec_hash, canvas_shape

__all__ = [
    "Layout", "Tile", "LayoutError", "load_layout", "parse_layout",
    "Item", "Recipe", "RECIPES", "recipe_for_dish",
    "Action", "ACTIONS", "N_ACTIONS", "PRIMITIVES", "MACROS", "action_table",
    "GameState", "EventRecord", "EventKind", "IllegalActionError",
    "RewardTable", "reset", "step", "legal_actions",
    "featurize", "reconstruct", "channel_spec_hash", "canvas_shape",
]
