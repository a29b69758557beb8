import { describe, expect, it } from "vitest";

import { EventSocket, type WsLike } from "../src/socket.js";
import type { ApiEvent } from "../src/types.js";

class FakeWs implements WsLike {
  onopen: (() => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  closedByClient = false;

  close(): void {
    this.closedByClient = true;
  }
}

function harness() {
  const sockets: FakeWs[] = [];
  const timers: Array<{ fn: () => void; ms: number }> = [];
  const events: ApiEvent[] = [];
  const transitions: string[] = [];
  const socket = new EventSocket(
    "ws://test/ws",
    {
      onEvent: (e) => events.push(e),
      onOnline: () => transitions.push("online"),
      onOffline: () => transitions.push("offline"),
    },
    {
      backoffBaseMs: 500,
      backoffMaxMs: 4000,
      wsFactory: () => {
        const ws = new FakeWs();
        sockets.push(ws);
        return ws;
      },
      schedule: (fn, ms) => timers.push({ fn, ms }),
    },
  );
  return { socket, sockets, timers, events, transitions };
}

describe("EventSocket", () => {
  it("dispatches parsed events once open", () => {
    const { socket, sockets, events, transitions } = harness();
    socket.connect();
    sockets[0].onopen?.();
    sockets[0].onmessage?.({ data: JSON.stringify({ kind: "pump", payload: { pump: true }, ts: 1 }) });
    expect(transitions).toEqual(["online"]);
    expect(events[0].kind).toBe("pump");
  });

  it("ignores malformed frames", () => {
    const { socket, sockets, events } = harness();
    socket.connect();
    sockets[0].onopen?.();
    sockets[0].onmessage?.({ data: "{not json" });
    expect(events).toHaveLength(0);
  });

  it("reconnects with exponential backoff capped at the max", () => {
    const { socket, sockets, timers, transitions } = harness();
    socket.connect();
    const delays: number[] = [];
    for (let i = 0; i < 6; i++) {
      sockets[i].onclose?.(); // connection drops immediately
      const timer = timers.shift();
      expect(timer).toBeDefined();
      delays.push(timer!.ms);
      timer!.fn(); // fire the scheduled reconnect
    }
    expect(delays).toEqual([500, 1000, 2000, 4000, 4000, 4000]);
    expect(transitions.filter((t) => t === "offline")).toHaveLength(6);
    expect(sockets).toHaveLength(7);
  });

  it("backoff resets after a successful open", () => {
    const { socket, sockets, timers } = harness();
    socket.connect();
    sockets[0].onclose?.();
    const retry = timers.shift()!;
    expect(retry.ms).toBe(500);
    retry.fn(); // reconnect succeeds this time, then drops again
    const ws = sockets[sockets.length - 1];
    ws.onopen?.();
    ws.onclose?.();
    expect(timers.shift()!.ms).toBe(500);
  });

  it("close() stops reconnection for good", () => {
    const { socket, sockets, timers } = harness();
    socket.connect();
    sockets[0].onopen?.();
    socket.close();
    expect(sockets[0].closedByClient).toBe(true);
    sockets[0].onclose?.();
    expect(timers).toHaveLength(0);
  });
});
