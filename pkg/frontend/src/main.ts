/** DOM wiring: connects the pure modules to the page. */

import {
  ApiClient,
  type RenderRequest,
  type RenderResult,
  type RenderSettingsJson,
  type VolumeManifest,
} from "./api.js";
import { applyDrag, applyZoom, defaultOrbit, orbitToCamera } from "./camera.js";
import { formatBadge, psnr, type RgbaImage } from "./psnr.js";
import { RequestScheduler } from "./scheduler.js";
import { decodeHash, defaultState, encodeHash, type ViewerState } from "./state.js";
import { TransferModel, type TransferJson } from "./transfer.js";
import { errorBanner, statsLine, volumeListView } from "./views.js";

const VIEW_SIZE = 384;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const api = new ApiClient(
  (window as { VOXELRAY_URL?: string }).VOXELRAY_URL ?? "http://127.0.0.1:8000",
);

const state: ViewerState = decodeHash(location.hash) ?? defaultState();
let volumes: VolumeManifest[] = [];
let presets: Record<string, TransferJson> = {};
let tfModel: TransferModel | null = null;
let leftPixels: RgbaImage | null = null;
let rightPixels: RgbaImage | null = null;

const banner = el<HTMLDivElement>("banner");
const picker = el<HTMLSelectElement>("volume-picker");
const viewLeft = el<HTMLCanvasElement>("view-left");
const viewRight = el<HTMLCanvasElement>("view-right");
const statsOut = el<HTMLDivElement>("stats");
const badge = el<HTMLSpanElement>("psnr-badge");
const tfCanvas = el<HTMLCanvasElement>("tf-editor");

function showError(err: unknown): void {
  banner.textContent = errorBanner(err);
  banner.hidden = false;
}

function clearError(): void {
  banner.hidden = true;
}

function readSettings(suffix: ""): RenderSettingsJson;
function readSettings(suffix: "-b"): RenderSettingsJson;
function readSettings(suffix: "" | "-b"): RenderSettingsJson {
  const pick = (id: string) => el<HTMLSelectElement | HTMLInputElement>(id + suffix);
  const mode = pick("mode").value as "dvr" | "isosurface";
  const settings: RenderSettingsJson = {
    interpolation: pick("interpolation").value as "trilinear" | "tricubic",
    classification: pick("classification").value as "post" | "pre" | "preintegrated",
    mode,
    lighting: (pick("lighting") as HTMLInputElement).checked,
    use_blocks: (pick("use-blocks") as HTMLInputElement).checked,
  };
  if (mode === "isosurface") settings.isovalue = Number(pick("isovalue").value);
  const step = Number(pick("step").value);
  if (step > 0) settings.step = step;
  return settings;
}

function currentRequest(settings: RenderSettingsJson, transfer: string | TransferJson): RenderRequest {
  return {
    camera: orbitToCamera(state.orbit, VIEW_SIZE, VIEW_SIZE),
    transfer,
    settings,
  };
}

async function drawResult(canvas: HTMLCanvasElement, result: RenderResult): Promise<RgbaImage> {
  const bitmap = await createImageBitmap(result.blob);
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d context unavailable");
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { width: data.width, height: data.height, data: data.data };
}

function updateBadge(): void {
  if (!state.compare || !leftPixels || !rightPixels) {
    badge.hidden = true;
    return;
  }
  badge.hidden = false;
  try {
    badge.textContent = formatBadge(psnr(leftPixels, rightPixels));
  } catch (err) {
    badge.textContent = errorBanner(err);
  }
}

const leftScheduler = new RequestScheduler<RenderRequest, RenderResult>(
  (req) => {
    if (state.volume === null) return Promise.reject(new Error("no volume selected"));
    return api.render(state.volume, req);
  },
  (result) => {
    void drawResult(viewLeft, result).then((pixels) => {
      leftPixels = pixels;
      updateBadge();
    });
    statsOut.textContent = statsLine(result.stats);
    clearError();
    location.hash = encodeHash(state);
  },
  showError,
);

const rightScheduler = new RequestScheduler<RenderRequest, RenderResult>(
  (req) => {
    if (state.volume === null) return Promise.reject(new Error("no volume selected"));
    return api.render(state.volume, req);
  },
  (result) => {
    void drawResult(viewRight, result).then((pixels) => {
      rightPixels = pixels;
      updateBadge();
    });
  },
  showError,
);

function requestRenders(force = false): void {
  if (state.volume === null) return;
  state.pane.settings = readSettings("");
  state.pane.transfer = tfModel ? tfModel.toRequest() : state.pane.transfer;
  leftScheduler.request(currentRequest(state.pane.settings, state.pane.transfer));
  if (force) leftScheduler.flush(true);
  if (state.compare) {
    state.comparePane = { settings: readSettings("-b"), transfer: state.pane.transfer };
    rightScheduler.request(currentRequest(state.comparePane.settings, state.comparePane.transfer));
    if (force) rightScheduler.flush(true);
  }
}

// ---------------------------------------------------------------- orbit

let dragging = false;
let lastX = 0;
let lastY = 0;

viewLeft.addEventListener("pointerdown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
  viewLeft.setPointerCapture(ev.pointerId);
});
viewLeft.addEventListener("pointermove", (ev) => {
  if (!dragging) return;
  state.orbit = applyDrag(state.orbit, ev.clientX - lastX, ev.clientY - lastY, VIEW_SIZE);
  lastX = ev.clientX;
  lastY = ev.clientY;
  requestRenders();
});
viewLeft.addEventListener("pointerup", () => {
  dragging = false;
});
viewLeft.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  state.orbit = applyZoom(state.orbit, ev.deltaY);
  requestRenders();
});

// ------------------------------------------------------------ TF editor

let selectedPoint = 0;

function tfToCanvas(value: number, opacity: number): [number, number] {
  if (!tfModel) return [0, 0];
  const [lo, hi] = tfModel.domain;
  const x = ((value - lo) / (hi - lo)) * tfCanvas.width;
  const y = (1 - opacity) * tfCanvas.height;
  return [x, y];
}

function canvasToTf(x: number, y: number): [number, number] {
  if (!tfModel) return [0, 0];
  const [lo, hi] = tfModel.domain;
  return [lo + (x / tfCanvas.width) * (hi - lo), 1 - y / tfCanvas.height];
}

function drawTf(): void {
  const ctx = tfCanvas.getContext("2d");
  if (!ctx || !tfModel) return;
  ctx.clearRect(0, 0, tfCanvas.width, tfCanvas.height);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  tfModel.points.forEach((p, i) => {
    const [x, y] = tfToCanvas(p.value, p.opacity);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  tfModel.points.forEach((p, i) => {
    const [x, y] = tfToCanvas(p.value, p.opacity);
    ctx.fillStyle = `rgb(${p.color.map((c) => Math.round(c * 255)).join(",")})`;
    ctx.beginPath();
    ctx.arc(x, y, i === selectedPoint ? 7 : 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#222";
    ctx.stroke();
  });
}

let tfDragging = false;

tfCanvas.addEventListener("pointerdown", (ev) => {
  if (!tfModel) return;
  const rect = tfCanvas.getBoundingClientRect();
  const x = ev.clientX - rect.left;
  const y = ev.clientY - rect.top;
  let best = -1;
  let bestDist = 12;
  tfModel.points.forEach((p, i) => {
    const [px, py] = tfToCanvas(p.value, p.opacity);
    const d = Math.hypot(px - x, py - y);
    if (d < bestDist) {
      best = i;
      bestDist = d;
    }
  });
  if (best >= 0) {
    selectedPoint = best;
    tfDragging = true;
    tfCanvas.setPointerCapture(ev.pointerId);
  } else if (ev.detail === 2) {
    const [value, opacity] = canvasToTf(x, y);
    try {
      selectedPoint = tfModel.addPoint(value, [1, 1, 1], opacity);
    } catch (err) {
      showError(err);
    }
  }
  drawTf();
});
tfCanvas.addEventListener("pointermove", (ev) => {
  if (!tfDragging || !tfModel) return;
  const rect = tfCanvas.getBoundingClientRect();
  const [value, opacity] = canvasToTf(ev.clientX - rect.left, ev.clientY - rect.top);
  tfModel.movePoint(selectedPoint, value, opacity);
  drawTf();
  requestRenders();
});
tfCanvas.addEventListener("pointerup", () => {
  tfDragging = false;
});
tfCanvas.addEventListener("contextmenu", (ev) => {
  ev.preventDefault();
  if (!tfModel) return;
  try {
    tfModel.removePoint(selectedPoint);
    selectedPoint = 0;
    drawTf();
    requestRenders();
  } catch (err) {
    showError(err);
  }
});

el<HTMLInputElement>("point-color").addEventListener("input", (ev) => {
  if (!tfModel) return;
  const hex = (ev.target as HTMLInputElement).value;
  const rgb: [number, number, number] = [
    parseInt(hex.slice(1, 3), 16) / 255,
    parseInt(hex.slice(3, 5), 16) / 255,
    parseInt(hex.slice(5, 7), 16) / 255,
  ];
  tfModel.setColor(selectedPoint, rgb);
  drawTf();
  requestRenders();
});

el<HTMLSelectElement>("preset-picker").addEventListener("change", (ev) => {
  const name = (ev.target as HTMLSelectElement).value;
  const preset = presets[name];
  if (preset) {
    tfModel = TransferModel.fromPreset(preset);
    selectedPoint = 0;
    drawTf();
    requestRenders(true);
  }
});

// ------------------------------------------------------------- controls

for (const id of [
  "interpolation", "classification", "mode", "isovalue", "step", "lighting", "use-blocks",
  "interpolation-b", "classification-b", "mode-b", "isovalue-b", "step-b", "lighting-b", "use-blocks-b",
]) {
  el(id).addEventListener("change", () => requestRenders(true));
}

el<HTMLInputElement>("compare-toggle").addEventListener("change", (ev) => {
  state.compare = (ev.target as HTMLInputElement).checked;
  el<HTMLDivElement>("pane-right").hidden = !state.compare;
  updateBadge();
  requestRenders(true);
});

picker.addEventListener("change", () => {
  void selectVolume(picker.value);
});

async function selectVolume(id: string): Promise<void> {
  const manifest = volumes.find((v) => v.id === id);
  if (!manifest) return;
  state.volume = id;
  const extent: [number, number, number] = [
    manifest.dims[0] * manifest.spacing[0],
    manifest.dims[1] * manifest.spacing[1],
    manifest.dims[2] * manifest.spacing[2],
  ];
  state.orbit = defaultOrbit(extent);
  try {
    const detail = await api.volumeDetail(id);
    el<HTMLDivElement>("volume-info").textContent =
      `${detail.blocks.count} blocks, value range ` +
      `[${detail.value_range[0]}, ${detail.value_range[1]}]`;
    const iso = el<HTMLInputElement>("isovalue");
    iso.min = String(detail.value_range[0]);
    iso.max = String(detail.value_range[1]);
  } catch (err) {
    showError(err);
  }
  requestRenders(true);
}

// -------------------------------------------------------------- upload

const drop = el<HTMLDivElement>("drop-zone");
drop.addEventListener("dragover", (ev) => ev.preventDefault());
drop.addEventListener("drop", (ev) => {
  ev.preventDefault();
  const file = ev.dataTransfer?.files[0];
  if (!file) return;
  api
    .upload(file, file.name)
    .then(async (body) => {
      await refreshVolumes();
      picker.value = body.id;
      await selectVolume(body.id);
    })
    .catch(showError);
});

// ---------------------------------------------------------------- boot

async function refreshVolumes(): Promise<void> {
  volumes = await api.listVolumes();
  const view = volumeListView(volumes);
  picker.innerHTML = "";
  if (view.kind === "empty") {
    el<HTMLDivElement>("empty-state").textContent = view.message;
    el<HTMLDivElement>("empty-state").hidden = false;
    return;
  }
  el<HTMLDivElement>("empty-state").hidden = true;
  for (const row of view.rows) {
    const opt = document.createElement("option");
    opt.value = row.id;
    opt.textContent = row.label;
    picker.appendChild(opt);
  }
}

async function boot(): Promise<void> {
  try {
    presets = await api.presets();
    const presetPicker = el<HTMLSelectElement>("preset-picker");
    for (const name of Object.keys(presets)) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      presetPicker.appendChild(opt);
    }
    const initial =
      typeof state.pane.transfer === "string" ? presets[state.pane.transfer] : undefined;
    tfModel = initial
      ? TransferModel.fromPreset(initial)
      : typeof state.pane.transfer === "object"
        ? TransferModel.fromPreset(state.pane.transfer)
        : TransferModel.fromPreset(presets["grayscale"]!);
    drawTf();
    await refreshVolumes();
    if (state.volume && volumes.some((v) => v.id === state.volume)) {
      picker.value = state.volume;
      requestRenders(true);
    } else if (volumes.length > 0) {
      await selectVolume(volumes[0]!.id);
    }
    clearError();
  } catch (err) {
    showError(err);
  }
}

void boot();
