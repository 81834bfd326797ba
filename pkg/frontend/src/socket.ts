// Reconnecting websocket client for the teleop service. Owns the hello
// handshake and retry/backoff policy; everything received is handed to the
// caller as a parsed ServerMessage. Nothing here touches the DOM, so the
// class runs unchanged under tests with a fake websocket factory.

import {
  ClientMessage,
  ServerMessage,
  configRequest,
  hello,
  parseServerMessage,
} from "./messages.js";

export type ConnectionStatus = "idle" | "connecting" | "connected" | "reconnecting" | "closed";

// The subset of the browser WebSocket API the client relies on.
export interface WebSocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

const WS_OPEN = 1;

export interface TeleopSocketOptions {
  url: string;
  clientName: string;
  onStatus: (status: ConnectionStatus) => void;
  onMessage: (msg: ServerMessage) => void;
  onBanner: (text: string | null) => void;
  // Injection seam for tests; defaults to the browser WebSocket.
  makeWebSocket?: (url: string) => WebSocketLike;
  initialRetryMs?: number;
  maxRetryMs?: number;
}

export class TeleopSocket {
  private readonly opts: Required<Pick<TeleopSocketOptions, "initialRetryMs" | "maxRetryMs">> &
    TeleopSocketOptions;
  private ws: WebSocketLike | null = null;
  private retryMs: number;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private everConnected = false;
  private closedByUser = false;
  private status: ConnectionStatus = "idle";

  constructor(options: TeleopSocketOptions) {
    this.opts = { initialRetryMs: 500, maxRetryMs: 8000, ...options };
    this.retryMs = this.opts.initialRetryMs;
  }

  connect(): void {
    this.closedByUser = false;
    this.open();
  }

  close(): void {
    this.closedByUser = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    if (this.ws !== null) {
      this.ws.close();
      this.ws = null;
    }
    this.setStatus("closed");
  }

  currentStatus(): ConnectionStatus {
    return this.status;
  }

  isOpen(): boolean {
    return this.ws !== null && this.ws.readyState === WS_OPEN;
  }

  // Send one client frame. Returns false (dropping the frame) when the
  // socket is not open — input handlers use this to suppress streaming
  // while disconnected.
  send(msg: ClientMessage): boolean {
    if (!this.isOpen()) {
      return false;
    }
    this.ws!.send(JSON.stringify(msg));
    return true;
  }

  private open(): void {
    this.setStatus(this.everConnected ? "reconnecting" : "connecting");
    const make = this.opts.makeWebSocket ?? ((url: string) => new WebSocket(url) as WebSocketLike);
    let ws: WebSocketLike;
    try {
      ws = make(this.opts.url);
    } catch (err) {
      this.opts.onBanner(`connection failed: ${String(err)}`);
      this.scheduleRetry();
      return;
    }
    this.ws = ws;

    ws.onopen = () => {
      this.everConnected = true;
      this.retryMs = this.opts.initialRetryMs;
      this.setStatus("connected");
      this.opts.onBanner(null);
      this.send(hello(this.opts.clientName));
      this.send(configRequest());
    };

    ws.onmessage = (ev) => {
      if (typeof ev.data !== "string") {
        return;
      }
      const msg = parseServerMessage(ev.data);
      if (msg !== null) {
        this.opts.onMessage(msg);
      }
    };

    ws.onerror = () => {
      this.opts.onBanner("connection error; retrying");
    };

    ws.onclose = () => {
      this.ws = null;
      if (this.closedByUser) {
        return;
      }
      this.opts.onBanner("connection lost; retrying");
      this.scheduleRetry();
    };
  }

  private scheduleRetry(): void {
    if (this.closedByUser || this.retryTimer !== null) {
      return;
    }
    this.setStatus("reconnecting");
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      this.open();
    }, this.retryMs);
    this.retryMs = Math.min(this.retryMs * 2, this.opts.maxRetryMs);
  }

  private setStatus(status: ConnectionStatus): void {
    if (status !== this.status) {
      this.status = status;
      this.opts.onStatus(status);
    }
  }
}
