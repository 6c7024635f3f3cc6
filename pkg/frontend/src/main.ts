/** Browser entry point: creates a session over HTTP, opens the socket,
 * wires keyboard input through the depth-one buffer, and redraws on
 * every state message. */

import { keyToPrimitive } from "./input.js";
import { Connection, ConnectionStatus, SocketLike } from "./net.js";
import {
  CreateSessionRequest,
  CreateSessionResponse,
  ServerMessage,
} from "./protocol.js";
import { canvasSize, Ctx2D, drawFrame } from "./render.js";
import {
  applyServerMessage,
  ClientState,
  initialState,
  InputBuffer,
} from "./state.js";

function queryConfig(): CreateSessionRequest {
  const params = new URLSearchParams(window.location.search);
  const request: CreateSessionRequest = {};
  const layout = params.get("layout");
  const agent = params.get("agent");
  const ticks = params.get("ticks");
  const seed = params.get("seed");
  if (layout) request.layout = layout;
  if (agent) request.agent = agent;
  if (ticks) request.ticks = Number(ticks);
  if (seed) request.seed = Number(seed);
  return request;
}

function setStatus(text: string): void {
  const el = document.getElementById("status");
  if (el) el.textContent = text;
}

async function boot(): Promise<void> {
  const canvas = document.getElementById("game") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d") as unknown as Ctx2D;

  const response = await fetch("/sessions", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(queryConfig()),
  });
  if (!response.ok) {
    setStatus(`session rejected: ${(await response.json()).detail}`);
    return;
  }
  const session = (await response.json()) as CreateSessionResponse;

  let state: ClientState = initialState();
  const buffer = new InputBuffer();

  const redraw = () => {
    if (!state.layout || !state.snapshot) return;
    const [w, h] = canvasSize(state.layout);
    if (canvas.width !== w || canvas.height !== h) {
      canvas.width = w;
      canvas.height = h;
    }
    drawFrame(ctx, state.layout, state.snapshot, state.tick, state.weights);
  };

  const connection = new Connection({
    url:
      `${window.location.protocol === "https:" ? "wss" : "ws"}://` +
      `${window.location.host}/ws/${session.session_id}`,
    token: session.token,
    socketFactory: (url) => new WebSocket(url) as unknown as SocketLike,
    onStatus: (status: ConnectionStatus) => setStatus(status),
    onMessage: (message: ServerMessage) => {
      state = applyServerMessage(state, message);
      if (message.type === "state") {
        // One buffered action per tick, sent when the tick lands.
        const action = buffer.take();
        if (action !== null) connection.sendAction(action);
        redraw();
      } else if (message.type === "end") {
        setStatus(
          state.error
            ? `error: ${state.error}`
            : `finished — score ${state.summary?.score ?? "?"}`,
        );
      }
    },
  });

  window.addEventListener("keydown", (event) => {
    const primitive = keyToPrimitive(event.key);
    if (primitive === null || state.ended) return;
    event.preventDefault();
    buffer.push(primitive);
  });

  connection.connect();
}

boot().catch((err) => setStatus(`failed to start: ${err}`));
