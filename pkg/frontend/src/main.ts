// DOM wiring: socket -> reducer -> render; buttons -> override flow.

import { ApiClient } from "./api.js";
import { drawSeries } from "./charts.js";
import { sendOverride } from "./override.js";
import { EventSocket } from "./socket.js";
import {
  applyEvent,
  initialState,
  setConnection,
  type SeriesName,
  type ViewState,
} from "./state.js";
import type { OverrideAction, Status } from "./types.js";

const CHARTS: Array<{ name: SeriesName; canvasId: string; lo: number; hi: number; color: string }> = [
  { name: "soil", canvasId: "chart-soil", lo: 100, hi: 920, color: "#8d6e63" },
  { name: "humidity", canvasId: "chart-humidity", lo: 0, hi: 100, color: "#42a5f5" },
  { name: "temperature", canvasId: "chart-temperature", lo: 0, hi: 50, color: "#ef5350" },
  { name: "rain", canvasId: "chart-rain", lo: 0, hi: 1, color: "#5c6bc0" },
];

let state: ViewState = initialState();
const api = new ApiClient("");

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

function render(): void {
  const pump = $("pump-badge");
  pump.textContent = state.pump == null ? "pump ?" : state.pump ? "pump ON" : "pump OFF";
  pump.className = `badge ${state.pump ? "on" : "off"}`;
  if (state.pump && state.pumpSource) pump.textContent += ` (${state.pumpSource})`;

  const mode = $("mode-badge");
  mode.textContent = state.mode ? `mode: ${state.mode}` : "mode ?";
  mode.className = `badge ${state.mode === "manual" ? "manual" : "auto"}`;

  $("offline-banner").style.display = state.connection === "online" ? "none" : "block";

  const log = $("decision-log");
  log.innerHTML = "";
  for (const d of state.decisions) {
    const li = document.createElement("li");
    const when = new Date(d.ts).toLocaleTimeString();
    li.textContent = `${when}  ${d.decision === 1 ? "irrigate" : "hold"}  [${d.source}]`;
    log.appendChild(li);
  }

  for (const chart of CHARTS) {
    const canvas = document.getElementById(chart.canvasId) as HTMLCanvasElement | null;
    if (canvas) drawSeries(canvas, state.series[chart.name], chart.lo, chart.hi, chart.color);
  }
}

function toast(message: string): void {
  const el = $("toast");
  el.textContent = message;
  el.style.display = "block";
  setTimeout(() => (el.style.display = "none"), 4000);
}

function onAction(action: OverrideAction): void {
  const before = state;
  void sendOverride(action, api, {
    currentMode: () => state.mode,
    optimistic(change) {
      state = { ...state, ...("mode" in change ? { mode: change.mode! } : {}), ...("pump" in change ? { pump: change.pump! } : {}) };
      render();
    },
    confirm(status: Status) {
      state = { ...state, mode: status.mode, pump: status.pump };
      render();
    },
    revert(message) {
      state = { ...state, mode: before.mode, pump: before.pump };
      render();
      toast(message);
    },
  });
}

function start(): void {
  for (const [id, action] of [
    ["btn-start", "start"],
    ["btn-stop", "stop"],
    ["btn-auto", "set_auto"],
    ["btn-manual", "set_manual"],
  ] as Array<[string, OverrideAction]>) {
    $(id).addEventListener("click", () => onAction(action));
  }

  const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
  const socket = new EventSocket(wsUrl, {
    onEvent(event) {
      state = applyEvent(state, event);
      render();
    },
    onOnline() {
      state = setConnection(state, "online");
      render();
    },
    onOffline() {
      state = setConnection(state, "offline");
      render();
    },
  });
  socket.connect();
  render();
}

window.addEventListener("load", start);
