// Schemas mirrored from the gateway API documentation.

export type Mode = "auto" | "manual";

export interface ReadingPayload {
  ts: number;
  node: string;
  humidity: number;
  temperature: number;
  soil: number;
  rain: 0 | 1;
}

export interface DecisionPayload {
  ts: number;
  decision: 0 | 1;
  source: "model" | "manual";
  reading: ReadingPayload | null;
}

export interface Status {
  mode: Mode;
  pump: boolean;
  last_decision: DecisionPayload | null;
}

export type EventKind = "snapshot" | "reading" | "decision" | "mode" | "pump" | "gap";

export interface ApiEvent {
  kind: EventKind;
  payload: any;
  ts: number;
}

export type OverrideAction = "start" | "stop" | "set_auto" | "set_manual";
