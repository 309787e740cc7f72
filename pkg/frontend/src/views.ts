/** Pure view-model helpers; the DOM layer renders what these return. */

import { ServiceError, type VolumeManifest } from "./api.js";

export type VolumeListView =
  | { kind: "empty"; message: string }
  | { kind: "list"; rows: { id: string; label: string }[] };

export function volumeListView(volumes: VolumeManifest[]): VolumeListView {
  if (volumes.length === 0) {
    return { kind: "empty", message: "No volumes yet. Drop a DICOM zip here to upload." };
  }
  return {
    kind: "list",
    rows: volumes.map((v) => ({
      id: v.id,
      label:
        `${v.id} — ${v.dims.join("×")} @ ` +
        `${v.spacing.map((s) => s.toFixed(2)).join("×")} mm (${v.source})`,
    })),
  };
}

export function errorBanner(err: unknown): string {
  if (err instanceof ServiceError) {
    return `${err.code}: ${err.message}`;
  }
  if (err instanceof TypeError || (err instanceof Error && /fetch|network/i.test(err.message))) {
    return "Cannot reach the render service. Is it running?";
  }
  return err instanceof Error ? err.message : String(err);
}

export function statsLine(stats: {
  rays: number;
  samples_taken: number;
  blocks_visited: number;
  blocks_total: number;
  wall_time_s: number;
}): string {
  return (
    `${stats.rays.toLocaleString()} rays, ` +
    `${stats.samples_taken.toLocaleString()} samples, ` +
    `${stats.blocks_visited}/${stats.blocks_total} blocks, ` +
    `${(stats.wall_time_s * 1000).toFixed(0)} ms`
  );
}
