import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { sendOverride, type OverrideHooks } from "../src/override.js";
import type { Mode, Status } from "../src/types.js";

interface Recorded {
  requests: Array<{ method: string; url: string; body: any }>;
  optimistic: any[];
  confirmed: Status[];
  reverted: string[];
}

function harness(mode: Mode | null, responses: Array<{ status: number; body: any }>) {
  const rec: Recorded = { requests: [], optimistic: [], confirmed: [], reverted: [] };
  let call = 0;
  const api = new ApiClient("", async (url: string, init?: any) => {
    rec.requests.push({ method: init?.method ?? "GET", url, body: init?.body ? JSON.parse(init.body) : null });
    const r = responses[Math.min(call++, responses.length - 1)];
    return { status: r.status, json: async () => r.body };
  });
  const hooks: OverrideHooks = {
    currentMode: () => mode,
    optimistic: (c) => rec.optimistic.push(c),
    confirm: (s) => rec.confirmed.push(s),
    revert: (m) => rec.reverted.push(m),
  };
  return { api, hooks, rec };
}

const okStatus = (pump: boolean): Status => ({ mode: "manual", pump, last_decision: null });

describe("sendOverride", () => {
  it("start in manual mode posts one command", async () => {
    const { api, hooks, rec } = harness("manual", [{ status: 200, body: okStatus(true) }]);
    const ok = await sendOverride("start", api, hooks);
    expect(ok).toBe(true);
    expect(rec.requests.map((r) => r.url)).toEqual(["/api/command"]);
    expect(rec.optimistic[0]).toEqual({ mode: "manual", pump: true });
    expect(rec.confirmed[0].pump).toBe(true);
    expect(rec.reverted).toHaveLength(0);
  });

  it("start while in auto first switches to manual", async () => {
    const { api, hooks, rec } = harness("auto", [
      { status: 200, body: okStatus(false) },
      { status: 200, body: okStatus(true) },
    ]);
    await sendOverride("start", api, hooks);
    expect(rec.requests.map((r) => r.url)).toEqual(["/api/mode", "/api/command"]);
    expect(rec.requests[0].body).toEqual({ mode: "manual" });
    expect(rec.requests[1].body).toEqual({ value: 1 });
  });

  it("stop posts value 0", async () => {
    const { api, hooks, rec } = harness("manual", [{ status: 200, body: okStatus(false) }]);
    await sendOverride("stop", api, hooks);
    expect(rec.requests[0].body).toEqual({ value: 0 });
    expect(rec.optimistic[0]).toEqual({ mode: "manual", pump: false });
  });

  it("mode toggles post to /api/mode", async () => {
    const { api, hooks, rec } = harness("manual", [
      { status: 200, body: { mode: "auto", pump: false, last_decision: null } },
    ]);
    await sendOverride("set_auto", api, hooks);
    expect(rec.requests[0].url).toBe("/api/mode");
    expect(rec.requests[0].body).toEqual({ mode: "auto" });
  });

  it("a 409 reverts the optimistic update with the server message", async () => {
    const { api, hooks, rec } = harness("manual", [{ status: 409, body: { error: "nope" } }]);
    const ok = await sendOverride("start", api, hooks);
    expect(ok).toBe(false);
    expect(rec.optimistic).toHaveLength(1); // optimism happened...
    expect(rec.confirmed).toHaveLength(0); // ...but was never confirmed
    expect(rec.reverted).toEqual(["nope"]);
  });

  it("a dead gateway reverts with an explanation", async () => {
    const api = new ApiClient("", async () => {
      throw new Error("connection refused");
    });
    const reverted: string[] = [];
    const ok = await sendOverride("set_manual", api, {
      currentMode: () => "auto",
      optimistic: () => {},
      confirm: () => {},
      revert: (m) => reverted.push(m),
    });
    expect(ok).toBe(false);
    expect(reverted[0]).toContain("unreachable");
  });

  it("no action is silently lost: every call confirms or reverts", async () => {
    for (const status of [200, 400, 409, 503]) {
      const { api, hooks, rec } = harness("manual", [{ status, body: status === 200 ? okStatus(true) : { error: "e" } }]);
      await sendOverride("start", api, hooks);
      expect(rec.confirmed.length + rec.reverted.length).toBe(1);
    }
  });
});
