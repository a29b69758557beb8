// Manual-override flow: optimistic UI, server confirmation, revert on error.

import { ApiClient, ApiError } from "./api.js";
import type { Mode, OverrideAction, Status } from "./types.js";

export interface OverrideHooks {
  /** current server-confirmed mode, to mirror the controller's manual rule */
  currentMode(): Mode | null;
  /** apply the hoped-for state immediately */
  optimistic(change: { mode?: Mode; pump?: boolean }): void;
  /** server agreed; sync to its status */
  confirm(status: Status): void;
  /** server refused or vanished; undo and explain */
  revert(message: string): void;
}

/**
 * Every click ends in either confirm() or revert(): no silent losses.
 * Starting the pump while in auto first switches to manual, matching the
 * controller's own rule for manual commands.
 */
export async function sendOverride(action: OverrideAction, api: ApiClient, hooks: OverrideHooks): Promise<boolean> {
  try {
    switch (action) {
      case "set_auto": {
        hooks.optimistic({ mode: "auto" });
        hooks.confirm(await api.setMode("auto"));
        return true;
      }
      case "set_manual": {
        hooks.optimistic({ mode: "manual" });
        hooks.confirm(await api.setMode("manual"));
        return true;
      }
      case "start":
      case "stop": {
        const value = action === "start" ? 1 : 0;
        hooks.optimistic({ mode: "manual", pump: value === 1 });
        if (hooks.currentMode() !== "manual") {
          await api.setMode("manual");
        }
        hooks.confirm(await api.command(value));
        return true;
      }
    }
  } catch (err) {
    const message = err instanceof ApiError ? err.message : String(err);
    hooks.revert(message);
    return false;
  }
}
