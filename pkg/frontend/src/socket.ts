// WebSocket event stream with exponential-backoff reconnect.

import type { ApiEvent } from "./types.js";

export interface WsLike {
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  close(): void;
}

export interface SocketHandlers {
  onEvent(event: ApiEvent): void;
  onOnline(): void;
  onOffline(): void;
}

export interface SocketOptions {
  backoffBaseMs?: number;
  backoffMaxMs?: number;
  wsFactory?: (url: string) => WsLike;
  schedule?: (fn: () => void, ms: number) => void;
}

export class EventSocket {
  private ws: WsLike | null = null;
  private attempt = 0;
  private closed = false;
  private readonly base: number;
  private readonly max: number;
  private readonly factory: (url: string) => WsLike;
  private readonly schedule: (fn: () => void, ms: number) => void;

  constructor(
    private url: string,
    private handlers: SocketHandlers,
    options: SocketOptions = {},
  ) {
    this.base = options.backoffBaseMs ?? 500;
    this.max = options.backoffMaxMs ?? 10_000;
    this.factory = options.wsFactory ?? ((u) => new WebSocket(u) as unknown as WsLike);
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    if (this.closed) return;
    let ws: WsLike;
    try {
      ws = this.factory(this.url);
    } catch {
      this.retryLater();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.handlers.onOnline();
    };
    ws.onmessage = (ev) => {
      try {
        this.handlers.onEvent(JSON.parse(ev.data) as ApiEvent);
      } catch {
        // a malformed frame is dropped, never fatal
      }
    };
    ws.onclose = () => this.dropped();
    ws.onerror = () => {
      /* the close handler owns reconnection */
    };
  }

  private dropped(): void {
    this.ws = null;
    if (this.closed) return;
    this.handlers.onOffline();
    this.retryLater();
  }

  /** next reconnect delay; exported for display ("retrying in Ns") */
  nextDelayMs(): number {
    return Math.min(this.base * 2 ** this.attempt, this.max);
  }

  private retryLater(): void {
    const delay = this.nextDelayMs();
    this.attempt += 1;
    this.schedule(() => this.connect(), delay);
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
    this.ws = null;
  }
}
