// Pure view-state reducer: every server event maps to a state update.

import type { ApiEvent, DecisionPayload, Mode, ReadingPayload, Status } from "./types.js";

/** 6 hours of 5-minute readings. */
export const WINDOW = 72;
export const DECISION_LOG_LIMIT = 50;

export interface SeriesPoint {
  t: number;
  v: number;
  /** first point after a dropped-events gap: charts draw a discontinuity */
  gap: boolean;
}

export type SeriesName = "humidity" | "temperature" | "soil" | "rain";

export type Connection = "connecting" | "online" | "offline";

export interface ViewState {
  series: Record<SeriesName, SeriesPoint[]>;
  mode: Mode | null; // last server-confirmed mode
  pump: boolean | null; // last server-confirmed pump state
  pumpSource: string | null;
  decisions: DecisionPayload[]; // newest first
  connection: Connection;
  pendingGap: boolean;
}

export function initialState(): ViewState {
  return {
    series: { humidity: [], temperature: [], soil: [], rain: [] },
    mode: null,
    pump: null,
    pumpSource: null,
    decisions: [],
    connection: "connecting",
    pendingGap: false,
  };
}

function pushPoint(points: SeriesPoint[], t: number, v: number, gap: boolean): SeriesPoint[] {
  const next = points.concat([{ t, v, gap }]);
  return next.length > WINDOW ? next.slice(next.length - WINDOW) : next;
}

export function applyEvent(state: ViewState, event: ApiEvent): ViewState {
  switch (event.kind) {
    case "snapshot": {
      // a snapshot resets the view to what the server knows right now
      const status: Status | null = event.payload?.status ?? null;
      const fresh = initialState();
      fresh.connection = state.connection;
      if (status) {
        fresh.mode = status.mode;
        fresh.pump = status.pump;
        if (status.last_decision) fresh.decisions = [status.last_decision];
      }
      return fresh;
    }
    case "reading": {
      const r = event.payload as ReadingPayload;
      const gap = state.pendingGap;
      return {
        ...state,
        pendingGap: false,
        series: {
          humidity: pushPoint(state.series.humidity, r.ts, r.humidity, gap),
          temperature: pushPoint(state.series.temperature, r.ts, r.temperature, gap),
          soil: pushPoint(state.series.soil, r.ts, r.soil, gap),
          rain: pushPoint(state.series.rain, r.ts, r.rain, gap),
        },
      };
    }
    case "decision": {
      const d = event.payload as DecisionPayload;
      const decisions = [d, ...state.decisions].slice(0, DECISION_LOG_LIMIT);
      return { ...state, decisions };
    }
    case "mode":
      return { ...state, mode: event.payload.mode as Mode };
    case "pump":
      return { ...state, pump: Boolean(event.payload.pump), pumpSource: event.payload.source ?? null };
    case "gap":
      return { ...state, pendingGap: true };
    default:
      return state;
  }
}

export function setConnection(state: ViewState, connection: Connection): ViewState {
  return { ...state, connection };
}
