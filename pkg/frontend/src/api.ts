/** Typed client for the render service. All viewer pixels originate here. */

import type { CameraJson } from "./camera.js";
import type { TransferJson } from "./transfer.js";

export interface VolumeManifest {
  id: string;
  dims: [number, number, number];
  spacing: [number, number, number];
  value_range: [number, number];
  source: string;
  created_at: string;
}

export interface BlockSummary {
  block_size: number;
  overlap: number;
  stride: number;
  shape: number[];
  count: number;
  empty: number | null;
  empty_fraction: number | null;
  value_min: number;
  value_max: number;
  empty_by_preset: Record<string, number>;
}

export interface VolumeDetail extends VolumeManifest {
  blocks: BlockSummary;
}

export interface RenderSettingsJson {
  step?: number | null;
  interpolation?: "trilinear" | "tricubic";
  classification?: "post" | "pre" | "preintegrated";
  mode?: "dvr" | "isosurface";
  isovalue?: number | null;
  lighting?: boolean;
  early_termination_alpha?: number;
  use_blocks?: boolean;
}

export interface RenderRequest {
  camera: CameraJson;
  transfer: string | TransferJson;
  settings?: RenderSettingsJson;
}

export interface RenderStats {
  rays: number;
  samples_taken: number;
  samples_skipped: number;
  blocks_total: number;
  blocks_empty: number;
  blocks_visited: number;
  wall_time_s: number;
}

export interface RenderResult {
  blob: Blob;
  stats: RenderStats;
}

/** Error body the service returns for every expected failure. */
export class ServiceError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export const STATS_HEADER = "X-Render-Stats";

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let code = `HTTP${resp.status}`;
  let message = resp.statusText;
  try {
    const body = (await resp.json()) as { error?: { code?: string; message?: string } };
    if (body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(code, message, resp.status);
}

export class ApiClient {
  constructor(
    public readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  async health(): Promise<boolean> {
    const resp = await this.fetchFn(this.url("/healthz"));
    return resp.ok;
  }

  async listVolumes(): Promise<VolumeManifest[]> {
    const resp = await this.fetchFn(this.url("/volumes"));
    await raiseForStatus(resp);
    return (await resp.json()) as VolumeManifest[];
  }

  async volumeDetail(id: string): Promise<VolumeDetail> {
    const resp = await this.fetchFn(this.url(`/volumes/${id}`));
    await raiseForStatus(resp);
    return (await resp.json()) as VolumeDetail;
  }

  async presets(): Promise<Record<string, TransferJson>> {
    const resp = await this.fetchFn(this.url("/presets"));
    await raiseForStatus(resp);
    return (await resp.json()) as Record<string, TransferJson>;
  }

  async render(id: string, request: RenderRequest): Promise<RenderResult> {
    const resp = await this.fetchFn(this.url(`/volumes/${id}/render`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    await raiseForStatus(resp);
    const header = resp.headers.get(STATS_HEADER);
    if (header === null) throw new Error(`render response missing ${STATS_HEADER}`);
    return { blob: await resp.blob(), stats: JSON.parse(header) as RenderStats };
  }

  async upload(file: File | Blob, name: string): Promise<{ id: string }> {
    const form = new FormData();
    form.append("file", file, name);
    const resp = await this.fetchFn(this.url("/volumes"), { method: "POST", body: form });
    await raiseForStatus(resp);
    return (await resp.json()) as { id: string };
  }

  sliceUrl(id: string, axis: "x" | "y" | "z", index: number, window?: number, level?: number): string {
    const query = new URLSearchParams();
    if (window !== undefined) query.set("window", String(window));
    if (level !== undefined) query.set("level", String(level));
    const qs = query.toString();
    return this.url(`/volumes/${id}/slices/${axis}/${index}`) + (qs ? `?${qs}` : "");
  }
}
