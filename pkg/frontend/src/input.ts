/** Keyboard mapping to engine primitives. Unbound keys map to null and
 * must be ignored by the caller (no accidental stays). */

import { A_DOWN, A_INTERACT, A_LEFT, A_RIGHT, A_STAY, A_UP } from "./protocol.js";

const KEY_TO_PRIMITIVE: Record<string, number> = {
  ArrowUp: A_UP,
  ArrowDown: A_DOWN,
  ArrowLeft: A_LEFT,
  ArrowRight: A_RIGHT,
  w: A_UP,
  s: A_DOWN,
  a: A_LEFT,
  d: A_RIGHT,
  " ": A_INTERACT,
  Enter: A_INTERACT,
  ".": A_STAY,
};

export function keyToPrimitive(key: string): number | null {
  const primitive = KEY_TO_PRIMITIVE[key.length === 1 ? key.toLowerCase() : key];
  return primitive ?? null;
}
