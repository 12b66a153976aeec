// Review client: render pairs with overlays, collect A/E/R decisions,
// report per-decision elapsed time, auto-advance through the queue.

import { ConflictError, newToken, PairPayload, ReviewClient } from "./api.js";
import { EditBuffer, Handle, hitTest } from "./editor.js";
import { bindKeys } from "./keyboard.js";
import { bboxFromRecord, categoryCss, denormalizeBox, denormalizePolygon, legendEntries, maskOverlayPixels } from "./overlay.js";
import { DecisionTimer } from "./timer.js";

const client = new ReviewClient("");
const timer = new DecisionTimer();
const edits = new EditBuffer();

interface ViewState {
  pairId: string | null;
  payload: PairPayload | null;
  band: string;
  showMasks: boolean;
  showBoxes: boolean;
  editMode: boolean;
  drag: { index: number; handle: Handle; lastX: number; lastY: number } | null;
}

const state: ViewState = {
  pairId: null,
  payload: null,
  band: "rgb",
  showMasks: true,
  showBoxes: true,
  editMode: false,
  drag: null,
};

const canvas = document.getElementById("viewer") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const statusEl = document.getElementById("status") as HTMLElement;
const legendEl = document.getElementById("legend") as HTMLElement;
const bandsEl = document.getElementById("bands") as HTMLElement;
const statsEl = document.getElementById("stats") as HTMLElement;
const errorEl = document.getElementById("error") as HTMLElement;
const controls = Array.from(
  document.querySelectorAll<HTMLButtonElement>("button[data-action]"),
);

let image: HTMLImageElement | null = null;
let overlayCanvas: HTMLCanvasElement | null = null;

function setError(message: string | null): void {
  errorEl.textContent = message ?? "";
  errorEl.style.display = message ? "block" : "none";
  for (const button of controls) button.disabled = Boolean(message);
}

async function loadNext(): Promise<void> {
  const page = await client.listPending(1, 0);
  if (page.entries.length === 0) {
    state.pairId = null;
    state.payload = null;
    statusEl.textContent = "queue empty — every pair is decided";
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    await refreshStats();
    return;
  }
  await loadPair(page.entries[0].pair_id);
}

async function loadPair(pairId: string): Promise<void> {
  setError(null);
  try {
    const payload = await client.getPair(pairId);
    state.pairId = pairId;
    state.payload = payload;
    if (!payload.bands.includes(state.band)) state.band = payload.bands[0];
    edits.load(payload.labels[state.band] ?? { pair_id: pairId, records: [] });
    buildOverlay(payload);
    await drawBand();
    renderBandButtons();
    renderLegend();
    timer.start();
    statusEl.textContent = `reviewing ${pairId} (${payload.status})`;
  } catch (err) {
    setError(`failed to load ${pairId}: ${err}`);
  }
}

function buildOverlay(payload: PairPayload): void {
  overlayCanvas = null;
  if (!payload.masks || payload.masks.masks.length === 0) return;
  try {
    const pixels = maskOverlayPixels(payload.masks);
    const off = document.createElement("canvas");
    off.width = payload.masks.width;
    off.height = payload.masks.height;
    const offCtx = off.getContext("2d") as CanvasRenderingContext2D;
    offCtx.putImageData(new ImageData(pixels, payload.masks.width, payload.masks.height), 0, 0);
    overlayCanvas = off;
  } catch (err) {
    setError(`mask decode failed: ${err}`);
  }
}

async function drawBand(): Promise<void> {
  if (!state.payload) return;
  const url = state.payload.images[state.band];
  image = await loadImage(url);
  canvas.width = image.naturalWidth;
  canvas.height = image.naturalHeight;
  redraw();
}

function redraw(): void {
  if (!image || !state.payload) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(image, 0, 0);
  if (state.showMasks && overlayCanvas) {
    ctx.drawImage(overlayCanvas, 0, 0, canvas.width, canvas.height);
  }
  if (!state.showBoxes) return;
  const ontology = state.payload.masks?.ontology ?? [];
  if (state.editMode) {
    edits.records.forEach((record, index) => {
      drawRect(record.box, record.categoryId, ontology[record.categoryId], true, index);
    });
  } else {
    const labels = state.payload.labels[state.band];
    for (const record of labels?.records ?? []) {
      const box = bboxFromRecord(record);
      if (box) {
        drawRect(box, record.category_id, ontology[record.category_id], false, -1);
      } else if (record.polygon) {
        drawPolygon(record.polygon, record.category_id);
      }
    }
  }
}

function drawRect(
  box: { cx: number; cy: number; w: number; h: number },
  categoryId: number,
  name: string | undefined,
  withHandles: boolean,
  index: number,
): void {
  const rect = denormalizeBox(box, canvas.width, canvas.height);
  ctx.strokeStyle = categoryCss(categoryId);
  ctx.lineWidth = 2;
  ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
  ctx.font = "12px sans-serif";
  ctx.fillStyle = categoryCss(categoryId);
  ctx.fillText(`${name ?? categoryId}${withHandles ? ` [${index}]` : ""}`, rect.x + 2, rect.y - 3);
  if (withHandles) {
    for (const [hx, hy] of [
      [rect.x, rect.y],
      [rect.x + rect.w, rect.y],
      [rect.x, rect.y + rect.h],
      [rect.x + rect.w, rect.y + rect.h],
    ]) {
      ctx.fillRect(hx - 3, hy - 3, 6, 6);
    }
  }
}

function drawPolygon(flat: number[], categoryId: number): void {
  const points = denormalizePolygon(flat, canvas.width, canvas.height);
  if (points.length < 3) return;
  ctx.strokeStyle = categoryCss(categoryId);
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(points[0][0], points[0][1]);
  for (const [x, y] of points.slice(1)) ctx.lineTo(x, y);
  ctx.closePath();
  ctx.stroke();
}

function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`image load failed: ${url}`));
    img.src = url;
  });
}

function renderBandButtons(): void {
  bandsEl.innerHTML = "";
  for (const band of state.payload?.bands ?? []) {
    const button = document.createElement("button");
    button.textContent = band;
    button.className = band === state.band ? "band active" : "band";
    button.onclick = () => {
      state.band = band;
      edits.load(state.payload?.labels[band] ?? { pair_id: state.pairId ?? "", records: [] });
      void drawBand();
      renderBandButtons();
    };
    bandsEl.appendChild(button);
  }
}

function renderLegend(): void {
  legendEl.innerHTML = "";
  const masks = state.payload?.masks;
  if (!masks || masks.masks.length === 0) {
    legendEl.textContent = "no detections";
    return;
  }
  for (const entry of legendEntries(masks)) {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.style.borderColor = entry.color;
    chip.textContent = entry.name;
    legendEl.appendChild(chip);
  }
}

async function refreshStats(): Promise<void> {
  const stats = await client.stats();
  const mean = stats.mean_elapsed_seconds;
  statsEl.textContent =
    `${stats.decided} decided / ${stats.pending} pending` +
    (mean !== null
      ? ` — ${mean.toFixed(1)}s mean, ~${(stats.projected_hours_remaining ?? 0).toFixed(2)}h left`
      : "");
}

async function submit(action: "Accept" | "Edit" | "Reject"): Promise<void> {
  if (!state.pairId) return;
  const body = {
    action,
    band: state.band,
    reviewer: "ui",
    elapsed_seconds: timer.elapsedSeconds(),
    token: newToken(),
    ...(action === "Edit" ? { edited_labels: edits.toPayload(state.pairId) } : {}),
  };
  try {
    await client.postDecision(state.pairId, body);
    state.editMode = false;
    await refreshStats();
    await loadNext();
  } catch (err) {
    if (err instanceof ConflictError) {
      setError("pair was decided elsewhere — loading the next one");
      await loadNext();
    } else {
      setError(`submit failed: ${err}`);
    }
  }
}

function canvasToNorm(event: MouseEvent): [number, number] {
  const bounds = canvas.getBoundingClientRect();
  return [
    (event.clientX - bounds.left) / bounds.width,
    (event.clientY - bounds.top) / bounds.height,
  ];
}

canvas.addEventListener("mousedown", (event) => {
  if (!state.editMode) return;
  const [nx, ny] = canvasToNorm(event);
  for (let i = edits.records.length - 1; i >= 0; i--) {
    const handle = hitTest(edits.records[i].box, nx, ny, 8 / canvas.width);
    if (handle) {
      state.drag = { index: i, handle, lastX: nx, lastY: ny };
      return;
    }
  }
  // click on empty space adds a fresh box under the cursor
  edits.add(0, { cx: nx, cy: ny, w: 0.08, h: 0.08 });
  redraw();
});

canvas.addEventListener("mousemove", (event) => {
  if (!state.drag) return;
  const [nx, ny] = canvasToNorm(event);
  edits.update(state.drag.index, state.drag.handle, nx - state.drag.lastX, ny - state.drag.lastY);
  state.drag.lastX = nx;
  state.drag.lastY = ny;
  redraw();
});

window.addEventListener("mouseup", () => {
  state.drag = null;
});

canvas.addEventListener("dblclick", (event) => {
  if (!state.editMode) return;
  const [nx, ny] = canvasToNorm(event);
  for (let i = edits.records.length - 1; i >= 0; i--) {
    if (hitTest(edits.records[i].box, nx, ny, 0)) {
      edits.remove(i);
      redraw();
      return;
    }
  }
});

for (const button of controls) {
  button.onclick = () => {
    const action = button.dataset.action;
    if (action === "accept") void submit("Accept");
    else if (action === "reject") void submit("Reject");
    else if (action === "edit") void submit("Edit");
    else if (action === "toggle-edit") {
      state.editMode = !state.editMode;
      button.classList.toggle("active", state.editMode);
      redraw();
    } else if (action === "toggle-masks") {
      state.showMasks = !state.showMasks;
      redraw();
    } else if (action === "toggle-boxes") {
      state.showBoxes = !state.showBoxes;
      redraw();
    }
  };
}

bindKeys(
  {
    onAccept: () => void submit("Accept"),
    onEdit: () => void submit("Edit"),
    onReject: () => void submit("Reject"),
    onPrevBand: () => cycleBand(-1),
    onNextBand: () => cycleBand(1),
  },
  window,
);

function cycleBand(step: number): void {
  const bands = state.payload?.bands ?? [];
  if (bands.length === 0) return;
  const index = (bands.indexOf(state.band) + step + bands.length) % bands.length;
  state.band = bands[index];
  void drawBand();
  renderBandButtons();
}

void (async () => {
  await refreshStats();
  await loadNext();
})();
