/** Wire types for the live game server (protocol version 1). */

export const PROTOCOL_VERSION = 1;
export const TICK_RATE_HZ = 10;

/* Primitive action ids shared with the engine. */
export const A_UP = 0;
export const A_DOWN = 1;
export const A_LEFT = 2;
export const A_RIGHT = 3;
export const A_INTERACT = 4;
export const A_STAY = 5;

export interface PlayerView {
  pos: [number, number];
  facing: number;
  held: string | null;
}

export interface StationView {
  item: string | null;
  timer: number;
}

export interface OrderView {
  recipe: string;
  remaining: number;
  deadline: number;
}

/** Full snapshot; delta messages carry any subset of these keys. */
export interface Snapshot {
  players: PlayerView[];
  stations: Record<string, StationView>;
  counters: Record<string, string>;
  sink_dirty: Record<string, number>;
  orders: OrderView[];
  plate_stock: number;
  score: number;
}

export interface LayoutInfo {
  name: string;
  grid: string[];
  episode_ticks: number;
}

export interface StateMessage {
  type: "state";
  tick: number;
  delta: Partial<Snapshot>;
  full?: boolean;
  layout?: LayoutInfo;
  weights?: number[];
}

export interface ScoreMessage {
  type: "score";
  tick: number;
  score: number;
}

export interface EndMessage {
  type: "end";
  summary?: SessionSummary;
  error?: string;
}

export interface SessionSummary {
  score: number;
  ticks_played: number;
  complete: boolean;
  [extra: string]: unknown;
}

export type ServerMessage = StateMessage | ScoreMessage | EndMessage;

export interface JoinMessage {
  type: "join";
  token: string;
  protocol: number;
}

export interface ActionMessage {
  type: "action";
  action: number;
}

export interface PingMessage {
  type: "ping";
}

export type ClientMessage = JoinMessage | ActionMessage | PingMessage;

export interface CreateSessionRequest {
  layout?: string;
  agent?: string;
  human_seat?: number;
  ticks?: number;
  seed?: number;
}

export interface CreateSessionResponse {
  session_id: string;
  token: string;
  protocol: number;
  config_hash: string;
}

export function parseServerMessage(raw: string): ServerMessage {
  const message = JSON.parse(raw) as { type?: unknown };
  if (
    message.type !== "state" &&
    message.type !== "score" &&
    message.type !== "end"
  ) {
    throw new Error(`unknown server message type: ${String(message.type)}`);
  }
  return message as ServerMessage;
}
