/** Pure client-side session state: reducer over server messages plus
 * small HUD helpers. The client never predicts; it renders exactly what
 * the last `state` message described. */

import {
  LayoutInfo,
  OrderView,
  ServerMessage,
  SessionSummary,
  Snapshot,
  TICK_RATE_HZ,
} from "./protocol.js";

export interface ClientState {
  tick: number;
  snapshot: Snapshot | null;
  layout: LayoutInfo | null;
  weights: number[] | null;
  ended: boolean;
  summary: SessionSummary | null;
  error: string | null;
}

export function initialState(): ClientState {
  return {
    tick: 0,
    snapshot: null,
    layout: null,
    weights: null,
    ended: false,
    summary: null,
    error: null,
  };
}

/** Apply one server message, returning a new state object. Delta state
 * messages replace only the top-level snapshot keys they carry; a
 * `full` message (first after every join) replaces the snapshot. */
export function applyServerMessage(
  state: ClientState,
  message: ServerMessage,
): ClientState {
  switch (message.type) {
    case "state": {
      const snapshot = message.full
        ? (message.delta as Snapshot)
        : ({ ...(state.snapshot ?? {}), ...message.delta } as Snapshot);
      return {
        ...state,
        tick: message.tick,
        snapshot,
        layout: message.layout ?? state.layout,
        weights: message.weights ?? state.weights,
      };
    }
    case "score": {
      if (state.snapshot === null) return state;
      return {
        ...state,
        snapshot: { ...state.snapshot, score: message.score },
      };
    }
    case "end":
      return {
        ...state,
        ended: true,
        summary: message.summary ?? null,
        error: message.error ?? null,
      };
  }
}

/** Fraction of an order's patience remaining, in [0, 1]. */
export function orderFraction(order: OrderView): number {
  if (order.deadline <= 0) return 0;
  return Math.min(1, Math.max(0, order.remaining / order.deadline));
}

/** Seconds of episode left given the current tick. */
export function clockSeconds(tick: number, episodeTicks: number): number {
  return Math.max(0, episodeTicks - tick) / TICK_RATE_HZ;
}

/** mm:ss episode clock. */
export function formatClock(seconds: number): string {
  const whole = Math.ceil(seconds);
  const minutes = Math.floor(whole / 60);
  const rest = whole % 60;
  return `${minutes}:${String(rest).padStart(2, "0")}`;
}

/** Latest-wins buffer of depth one: at most one queued action, flushed
 * once per received tick so a held key cannot flood the server. */
export class InputBuffer {
  private pending: number | null = null;

  push(action: number): void {
    this.pending = action;
  }

  /** Remove and return the buffered action, if any. */
  take(): number | null {
    const action = this.pending;
    this.pending = null;
    return action;
  }

  get isEmpty(): boolean {
    return this.pending === null;
  }
}
