import { describe, expect, it } from "vitest";

import {
  LayoutInfo,
  ServerMessage,
  Snapshot,
  StateMessage,
} from "../src/protocol.js";
import {
  applyServerMessage,
  clockSeconds,
  formatClock,
  initialState,
  InputBuffer,
  orderFraction,
} from "../src/state.js";

const LAYOUT: LayoutInfo = {
  name: "open",
  grid: ["#########", "#   P   #", "#########"],
  episode_ticks: 2400,
};

function fullSnapshot(): Snapshot {
  return {
    players: [
      { pos: [1, 2], facing: 3, held: null },
      { pos: [1, 6], facing: 2, held: "PLATE" },
    ],
    stations: { "1,4": { item: null, timer: 0 } },
    counters: {},
    sink_dirty: {},
    orders: [{ recipe: "A", remaining: 300, deadline: 600 }],
    plate_stock: 4,
    score: 0,
  };
}

function fullMessage(): StateMessage {
  return {
    type: "state",
    tick: 1,
    full: true,
    layout: LAYOUT,
    delta: fullSnapshot(),
  };
}

describe("applyServerMessage", () => {
  it("installs snapshot and layout from a full state message", () => {
    const state = applyServerMessage(initialState(), fullMessage());
    expect(state.tick).toBe(1);
    expect(state.layout?.name).toBe("open");
    expect(state.snapshot?.plate_stock).toBe(4);
    expect(state.ended).toBe(false);
  });

  it("merges deltas at top-level-key granularity", () => {
    let state = applyServerMessage(initialState(), fullMessage());
    const delta: ServerMessage = {
      type: "state",
      tick: 2,
      delta: {
        players: [
          { pos: [1, 3], facing: 3, held: null },
          { pos: [1, 6], facing: 2, held: "PLATE" },
        ],
        score: 40,
      },
    };
    state = applyServerMessage(state, delta);
    expect(state.tick).toBe(2);
    expect(state.snapshot?.players[0]?.pos).toEqual([1, 3]);
    expect(state.snapshot?.score).toBe(40);
    // Untouched keys survive the merge.
    expect(state.snapshot?.orders).toHaveLength(1);
    expect(state.snapshot?.plate_stock).toBe(4);
  });

  it("does not mutate the previous state object", () => {
    const first = applyServerMessage(initialState(), fullMessage());
    const before = JSON.stringify(first);
    applyServerMessage(first, {
      type: "state",
      tick: 2,
      delta: { score: 99 },
    });
    expect(JSON.stringify(first)).toBe(before);
  });

  it("a later full message replaces the snapshot outright", () => {
    let state = applyServerMessage(initialState(), fullMessage());
    state = applyServerMessage(state, {
      type: "state",
      tick: 9,
      delta: { counters: { "1,1": "RICE_RAW" } },
    });
    const rejoin = fullMessage();
    rejoin.tick = 10;
    state = applyServerMessage(state, rejoin);
    expect(state.snapshot?.counters).toEqual({});
  });

  it("score and end messages update hud and terminal state", () => {
    let state = applyServerMessage(initialState(), fullMessage());
    state = applyServerMessage(state, { type: "score", tick: 5, score: 55 });
    expect(state.snapshot?.score).toBe(55);
    state = applyServerMessage(state, {
      type: "end",
      summary: { score: 55, ticks_played: 2400, complete: true },
    });
    expect(state.ended).toBe(true);
    expect(state.summary?.complete).toBe(true);
    expect(state.error).toBeNull();
  });

  it("carries weights forward until the next update", () => {
    let state = applyServerMessage(initialState(), fullMessage());
    state = applyServerMessage(state, {
      type: "state",
      tick: 2,
      delta: {},
      weights: [0.7, 0.3],
    });
    state = applyServerMessage(state, { type: "state", tick: 3, delta: {} });
    expect(state.weights).toEqual([0.7, 0.3]);
  });
});

describe("hud helpers", () => {
  it("orderFraction clamps to [0, 1]", () => {
    expect(orderFraction({ recipe: "A", remaining: 300, deadline: 600 })).toBe(
      0.5,
    );
    expect(orderFraction({ recipe: "A", remaining: 900, deadline: 600 })).toBe(
      1,
    );
    expect(orderFraction({ recipe: "A", remaining: -5, deadline: 600 })).toBe(
      0,
    );
    expect(orderFraction({ recipe: "A", remaining: 1, deadline: 0 })).toBe(0);
  });

  it("clock counts down at 10 Hz and formats mm:ss", () => {
    expect(clockSeconds(0, 2400)).toBe(240);
    expect(clockSeconds(2400, 2400)).toBe(0);
    expect(clockSeconds(3000, 2400)).toBe(0);
    expect(formatClock(240)).toBe("4:00");
    expect(formatClock(61)).toBe("1:01");
    expect(formatClock(0.4)).toBe("0:01");
  });
});

describe("InputBuffer", () => {
  it("is latest-wins with depth one", () => {
    const buffer = new InputBuffer();
    expect(buffer.take()).toBeNull();
    buffer.push(0);
    buffer.push(3);
    expect(buffer.take()).toBe(3);
    expect(buffer.take()).toBeNull();
    expect(buffer.isEmpty).toBe(true);
  });
});
