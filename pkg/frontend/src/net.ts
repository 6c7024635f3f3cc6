/** Websocket connection management: join handshake, latest-wins action
 * sends, and automatic rejoin with the same token. The server replays a
 * full snapshot on every join, so reconnecting needs no client state. */

import {
  ClientMessage,
  PROTOCOL_VERSION,
  parseServerMessage,
  ServerMessage,
} from "./protocol.js";

/** The subset of the WebSocket API the client uses; tests substitute a
 * scripted fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus =
  | "connecting"
  | "open"
  | "reconnecting"
  | "closed";

export interface ConnectionOptions {
  url: string;
  token: string;
  socketFactory: SocketFactory;
  onMessage: (message: ServerMessage) => void;
  onStatus?: (status: ConnectionStatus) => void;
  /** Rejoin attempts after an unexpected close; 0 disables. */
  maxRetries?: number;
  /** Delay scheduler for retries; tests run it synchronously. */
  schedule?: (fn: () => void, delayMs: number) => void;
  retryDelayMs?: number;
}

export class Connection {
  private socket: SocketLike | null = null;
  private retriesLeft: number;
  private closedByUs = false;
  status: ConnectionStatus = "closed";

  constructor(private readonly options: ConnectionOptions) {
    this.retriesLeft = options.maxRetries ?? 5;
  }

  connect(): void {
    this.closedByUs = false;
    this.setStatus(this.status === "closed" ? "connecting" : "reconnecting");
    const socket = this.options.socketFactory(this.options.url);
    this.socket = socket;
    socket.onopen = () => {
      this.send({
        type: "join",
        token: this.options.token,
        protocol: PROTOCOL_VERSION,
      });
      this.setStatus("open");
    };
    socket.onmessage = (event) => {
      const message = parseServerMessage(event.data);
      if (message.type === "end") this.closedByUs = true;
      this.options.onMessage(message);
    };
    socket.onerror = () => socket.onclose?.();
    socket.onclose = () => {
      socket.onclose = null;
      if (this.socket !== socket) return;
      this.socket = null;
      if (this.closedByUs || this.retriesLeft <= 0) {
        this.setStatus("closed");
        return;
      }
      this.retriesLeft -= 1;
      this.setStatus("reconnecting");
      const schedule =
        this.options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
      schedule(() => this.connect(), this.options.retryDelayMs ?? 500);
    };
  }

  sendAction(action: number): void {
    this.send({ type: "action", action });
  }

  ping(): void {
    this.send({ type: "ping" });
  }

  close(): void {
    this.closedByUs = true;
    this.socket?.close();
    this.socket = null;
    this.setStatus("closed");
  }

  private send(message: ClientMessage): void {
    this.socket?.send(JSON.stringify(message));
  }

  private setStatus(status: ConnectionStatus): void {
    this.status = status;
    this.options.onStatus?.(status);
  }
}
