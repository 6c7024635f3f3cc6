/** Canvas renderer. Draws against a minimal 2D-context interface so the
 * vitest suite can substitute a recording stub without a DOM. */

import { LayoutInfo, Snapshot } from "./protocol.js";
import { clockSeconds, formatClock, orderFraction } from "./state.js";

export const TILE_SIZE = 40;

/** The few CanvasRenderingContext2D members the renderer touches. */
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  font: string;
  textAlign: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

/** Engine tile character → fill colour. */
export const TILE_COLORS: Record<string, string> = {
  " ": "#f2e8d5", // floor
  "#": "#9a8c78", // counter
  R: "#e8e3c8", // rice crate
  M: "#c97b6e", // meat crate
  U: "#b49bc8", // mushroom crate
  P: "#dfe5ea", // plate stack
  S: "#7aa7c7", // sink
  C: "#caa24f", // chopping board
  O: "#8f8f8f", // pot
  G: "#5c5c5c", // grill
  W: "#79b791", // serving window
  T: "#4d4d4d", // trash
};

export const SEAT_COLORS = ["#2f6fb5", "#c23b3b"]; // seat 0 blue, seat 1 red
export const HUD_HEIGHT = 72;

export function canvasSize(layout: LayoutInfo): [number, number] {
  const rows = layout.grid.length;
  const cols = layout.grid[0]?.length ?? 0;
  return [cols * TILE_SIZE, rows * TILE_SIZE + HUD_HEIGHT];
}

const TILE_LABELS: Record<string, string> = {
  R: "rice",
  M: "meat",
  U: "mush",
  P: "plates",
  S: "sink",
  C: "chop",
  O: "pot",
  G: "grill",
  W: "serve",
  T: "trash",
};

function drawGrid(ctx: Ctx2D, layout: LayoutInfo): void {
  ctx.strokeStyle = "#00000022";
  for (let r = 0; r < layout.grid.length; r += 1) {
    const row = layout.grid[r] ?? "";
    for (let c = 0; c < row.length; c += 1) {
      const ch = row[c] ?? " ";
      ctx.fillStyle = TILE_COLORS[ch] ?? "#ff00ff";
      ctx.fillRect(c * TILE_SIZE, r * TILE_SIZE, TILE_SIZE, TILE_SIZE);
      ctx.strokeRect(c * TILE_SIZE, r * TILE_SIZE, TILE_SIZE, TILE_SIZE);
      const label = TILE_LABELS[ch];
      if (label) {
        ctx.fillStyle = "#000000aa";
        ctx.font = "9px sans-serif";
        ctx.textAlign = "center";
        ctx.fillText(label, (c + 0.5) * TILE_SIZE, (r + 0.92) * TILE_SIZE);
      }
    }
  }
}

const FACING_OFFSETS: [number, number][] = [
  [-0.3, 0],
  [0.3, 0],
  [0, -0.3],
  [0, 0.3],
];

function drawPlayers(ctx: Ctx2D, snapshot: Snapshot): void {
  snapshot.players.forEach((player, seat) => {
    const [r, c] = player.pos;
    const cx = (c + 0.5) * TILE_SIZE;
    const cy = (r + 0.5) * TILE_SIZE;
    ctx.fillStyle = SEAT_COLORS[seat] ?? "#444444";
    ctx.beginPath();
    ctx.arc(cx, cy, TILE_SIZE * 0.32, 0, Math.PI * 2);
    ctx.fill();
    const offset = FACING_OFFSETS[player.facing] ?? [0, 0];
    ctx.fillStyle = "#ffffff";
    ctx.beginPath();
    ctx.arc(
      cx + offset[1] * TILE_SIZE,
      cy + offset[0] * TILE_SIZE,
      TILE_SIZE * 0.08,
      0,
      Math.PI * 2,
    );
    ctx.fill();
    if (player.held) {
      ctx.fillStyle = "#000000cc";
      ctx.font = "9px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(player.held, cx, cy - TILE_SIZE * 0.45);
    }
  });
}

function drawCounterItems(ctx: Ctx2D, snapshot: Snapshot): void {
  ctx.fillStyle = "#000000cc";
  ctx.font = "9px sans-serif";
  ctx.textAlign = "center";
  for (const [key, item] of Object.entries(snapshot.counters)) {
    const [r, c] = key.split(",").map(Number) as [number, number];
    ctx.fillText(item, (c + 0.5) * TILE_SIZE, (r + 0.45) * TILE_SIZE);
  }
  for (const [key, station] of Object.entries(snapshot.stations)) {
    if (!station.item) continue;
    const [r, c] = key.split(",").map(Number) as [number, number];
    const tag = station.timer > 0 ? `${station.item}:${station.timer}` : station.item;
    ctx.fillText(tag, (c + 0.5) * TILE_SIZE, (r + 0.45) * TILE_SIZE);
  }
}

function drawHud(
  ctx: Ctx2D,
  layout: LayoutInfo,
  snapshot: Snapshot,
  tick: number,
  weights: number[] | null,
): void {
  const top = layout.grid.length * TILE_SIZE;
  const width = (layout.grid[0]?.length ?? 0) * TILE_SIZE;
  ctx.fillStyle = "#1d1f24";
  ctx.fillRect(0, top, width, HUD_HEIGHT);

  ctx.fillStyle = "#ffffff";
  ctx.font = "16px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(`score ${snapshot.score.toFixed(0)}`, 8, top + 22);
  ctx.fillText(
    formatClock(clockSeconds(tick, layout.episode_ticks)),
    8,
    top + 44,
  );
  ctx.font = "12px sans-serif";
  ctx.fillText(`plates ${snapshot.plate_stock}`, 8, top + 62);

  // Order tickets with patience bars.
  snapshot.orders.forEach((order, i) => {
    const x = 120 + i * 84;
    ctx.fillStyle = order.recipe === "A" ? "#caa24f" : "#7aa7c7";
    ctx.fillRect(x, top + 8, 72, 26);
    ctx.fillStyle = "#1d1f24";
    ctx.font = "14px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(order.recipe, x + 36, top + 26);
    const fraction = orderFraction(order);
    ctx.fillStyle = "#333941";
    ctx.fillRect(x, top + 38, 72, 6);
    ctx.fillStyle = fraction > 0.33 ? "#79b791" : "#c23b3b";
    ctx.fillRect(x, top + 38, 72 * fraction, 6);
  });

  // Partner-belief bars when the agent adapts.
  if (weights && weights.length > 0) {
    const barWidth = 14;
    const x0 = width - weights.length * (barWidth + 4) - 8;
    weights.forEach((w, i) => {
      const h = Math.max(2, w * 48);
      ctx.fillStyle = "#333941";
      ctx.fillRect(x0 + i * (barWidth + 4), top + 12, barWidth, 48);
      ctx.fillStyle = "#79b791";
      ctx.fillRect(x0 + i * (barWidth + 4), top + 60 - h, barWidth, h);
    });
  }
}

/** Draw one frame: tiles, items, players, HUD. */
export function drawFrame(
  ctx: Ctx2D,
  layout: LayoutInfo,
  snapshot: Snapshot,
  tick: number,
  weights: number[] | null = null,
): void {
  drawGrid(ctx, layout);
  drawCounterItems(ctx, snapshot);
  drawPlayers(ctx, snapshot);
  drawHud(ctx, layout, snapshot, tick, weights);
}
