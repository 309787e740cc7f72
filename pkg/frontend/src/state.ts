/** Viewer state serialized into the URL hash for shareable views. */

import type { Orbit } from "./camera.js";
import type { RenderSettingsJson } from "./api.js";
import type { TransferJson } from "./transfer.js";

export interface PaneState {
  settings: RenderSettingsJson;
  transfer: string | TransferJson;
}

export interface ViewerState {
  volume: string | null;
  orbit: Orbit;
  pane: PaneState;
  compare: boolean;
  /** Settings for the right-hand pane when compare mode is on. */
  comparePane: PaneState | null;
}

export function defaultState(): ViewerState {
  return {
    volume: null,
    orbit: { azimuthDeg: 0, elevationDeg: 15, distance: 300, target: [0, 0, 0] },
    pane: { settings: { use_blocks: true }, transfer: "bone" },
    compare: false,
    comparePane: null,
  };
}

/** Node's Buffer, when present; lets the encoder run under vitest without DOM. */
interface NodeBufferLike {
  from(data: string, encoding: string): { toString(encoding: string): string };
}

function nodeBuffer(): NodeBufferLike | undefined {
  return (globalThis as { Buffer?: NodeBufferLike }).Buffer;
}

/** Round floats so hashes stay short and stable across tiny drags. */
function tidy(value: unknown): unknown {
  if (typeof value === "number") return Number(value.toFixed(4));
  if (Array.isArray(value)) return value.map(tidy);
  if (value !== null && typeof value === "object") {
    return Object.fromEntries(
      Object.entries(value as Record<string, unknown>).map(([k, v]) => [k, tidy(v)]),
    );
  }
  return value;
}

export function encodeHash(state: ViewerState): string {
  const json = JSON.stringify(tidy(state));
  // base64url keeps the hash free of characters the URL would mangle
  const b64 =
    typeof btoa === "function"
      ? btoa(json)
      : nodeBuffer()!.from(json, "utf8").toString("base64");
  return "#s=" + b64.replace(/\+/g, "-").replace(/\//g, "_").replace(/=+$/, "");
}

export function decodeHash(hash: string): ViewerState | null {
  const match = /^#s=([A-Za-z0-9_-]+)$/.exec(hash);
  if (!match) return null;
  const b64 = match[1]!.replace(/-/g, "+").replace(/_/g, "/");
  try {
    const json =
      typeof atob === "function"
        ? atob(b64)
        : nodeBuffer()!.from(b64, "base64").toString("utf8");
    const parsed = JSON.parse(json) as ViewerState;
    if (!parsed || typeof parsed !== "object" || !parsed.orbit || !parsed.pane) return null;
    return parsed;
  } catch {
    return null;
  }
}
