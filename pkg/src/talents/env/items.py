"""Item vocabulary and the two recipes.

Items are a closed enumeration so they can be encoded losslessly into a
single feature channel as (index + 1) / len(Item).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Item(enum.IntEnum):
    RAW_RICE = 0
    RAW_MEAT = 1
    RAW_MUSHROOM = 2
    CHOPPED_MEAT = 3
    CHOPPED_MUSHROOM = 4
    CLEAN_PLATE = 5
    PLATE_RICE = 6          # plate + cooked rice
    PLATE_MEAT = 7          # plate + grilled meat
    PLATE_MUSHROOM = 8      # plate + grilled mushroom
    DISH_RICE_MEAT = 9      # completed recipe A
    DISH_RICE_MUSHROOM = 10  # completed recipe B


N_ITEMS = len(Item)

#: Items that sit on a plate (used for conservation accounting).
PLATE_ITEMS = frozenset({
    Item.CLEAN_PLATE, Item.PLATE_RICE, Item.PLATE_MEAT,
    Item.PLATE_MUSHROOM, Item.DISH_RICE_MEAT, Item.DISH_RICE_MUSHROOM,
})

COMPLETED_DISHES = frozenset({Item.DISH_RICE_MEAT, Item.DISH_RICE_MUSHROOM})


@dataclass(frozen=True)
class Recipe:
    id: str                  # "A" or "B"
    dish: Item               # completed dish item
    raw_protein: Item        # dispenser ingredient to chop then grill
    chopped_protein: Item
    pot_ticks: int = 100     # rice cook time
    grill_ticks: int = 80    # protein grill time


RECIPES: dict[str, Recipe] = {
    "A": Recipe("A", Item.DISH_RICE_MEAT, Item.RAW_MEAT, Item.CHOPPED_MEAT),
    "B": Recipe("B", Item.DISH_RICE_MUSHROOM, Item.RAW_MUSHROOM,
                Item.CHOPPED_MUSHROOM),
}

POT_COOK_TICKS = 100
GRILL_COOK_TICKS = 80


def recipe_for_dish(item: Item) -> str | None:
    for rid, r in RECIPES.items():
        if r.dish == item:
            return rid
    return None


def add_rice(item: Item) -> Item | None:
    """Plate item after adding cooked rice, or None if it cannot take rice."""
    return {
        Item.CLEAN_PLATE: Item.PLATE_RICE,
        Item.PLATE_MEAT: Item.DISH_RICE_MEAT,
        Item.PLATE_MUSHROOM: Item.DISH_RICE_MUSHROOM,
    }.get(item)


def add_grilled(item: Item, protein: Item) -> Item | None:
    """Plate item after adding a grilled protein (CHOPPED_* identifies it)."""
    if protein == Item.CHOPPED_MEAT:
        return {
            Item.CLEAN_PLATE: Item.PLATE_MEAT,
            Item.PLATE_RICE: Item.DISH_RICE_MEAT,
        }.get(item)
    if protein == Item.CHOPPED_MUSHROOM:
        return {
            Item.CLEAN_PLATE: Item.PLATE_MUSHROOM,
            Item.PLATE_RICE: Item.DISH_RICE_MUSHROOM,
        }.get(item)
    return None
