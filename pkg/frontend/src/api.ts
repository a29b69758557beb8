// Thin typed wrapper over the gateway HTTP API.

import type { DecisionPayload, Mode, ReadingPayload, Status } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (url: string, init?: any) => Promise<{ status: number; json(): Promise<any> }>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...(args as [any])),
  ) {}

  private async request(method: string, path: string, body?: unknown): Promise<any> {
    let response;
    try {
      response = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, `gateway unreachable: ${String(err)}`);
    }
    let parsed: any = null;
    try {
      parsed = await response.json();
    } catch {
      // non-JSON error bodies fall through with a generic message
    }
    if (response.status !== 200) {
      const message = parsed?.error ?? `request failed with status ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return parsed;
  }

  status(): Promise<Status> {
    return this.request("GET", "/api/status");
  }

  setMode(mode: Mode): Promise<Status> {
    return this.request("POST", "/api/mode", { mode });
  }

  command(value: 0 | 1): Promise<Status> {
    return this.request("POST", "/api/command", { value });
  }

  telemetry(from: number, to: number): Promise<ReadingPayload[]> {
    return this.request("GET", `/api/telemetry?from=${from}&to=${to}`);
  }

  decisions(from: number, to: number): Promise<DecisionPayload[]> {
    return this.request("GET", `/api/decisions?from=${from}&to=${to}`);
  }
}
