// Pure overlay geometry/pixel helpers (canvas-free, unit-testable).

import { BBox, LabelRecordPayload, MaskPayload } from "./api.js";
import { decodeRle } from "./rle.js";

export interface CanvasRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function bboxFromRecord(record: LabelRecordPayload): BBox | null {
  if (!record.bbox) return null;
  const [cx, cy, w, h] = record.bbox;
  return { cx, cy, w, h };
}

// Normalized geometry is band-invariant: the same record lands correctly
// on any band's canvas because only the target dimensions change here.
export function denormalizeBox(box: BBox, width: number, height: number): CanvasRect {
  return {
    x: (box.cx - box.w / 2) * width,
    y: (box.cy - box.h / 2) * height,
    w: box.w * width,
    h: box.h * height,
  };
}

export function denormalizePolygon(
  flat: number[],
  width: number,
  height: number,
): [number, number][] {
  const points: [number, number][] = [];
  for (let i = 0; i + 1 < flat.length; i += 2) {
    points.push([flat[i] * width, flat[i + 1] * height]);
  }
  return points;
}

const PALETTE: [number, number, number][] = [
  [46, 204, 113],
  [231, 76, 60],
  [52, 152, 219],
  [241, 196, 15],
  [155, 89, 182],
  [230, 126, 34],
];

export function categoryColor(categoryId: number): [number, number, number] {
  return PALETTE[((categoryId % PALETTE.length) + PALETTE.length) % PALETTE.length];
}

export function categoryCss(categoryId: number): string {
  const [r, g, b] = categoryColor(categoryId);
  return `rgb(${r}, ${g}, ${b})`;
}

// RGBA pixel buffer for putImageData: translucent fill over mask pixels.
export function maskOverlayPixels(
  payload: MaskPayload,
  alpha = 110,
): Uint8ClampedArray<ArrayBuffer> {
  const { width, height } = payload;
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (const mask of payload.masks) {
    const bitmap = decodeRle(mask.rle, width, height);
    const [r, g, b] = categoryColor(mask.category_id);
    for (let i = 0; i < bitmap.length; i++) {
      if (bitmap[i]) {
        const o = i * 4;
        rgba[o] = r;
        rgba[o + 1] = g;
        rgba[o + 2] = b;
        rgba[o + 3] = alpha;
      }
    }
  }
  return rgba;
}

export function legendEntries(payload: MaskPayload): { name: string; color: string }[] {
  const present = new Set(payload.masks.map((m) => m.category_id));
  return [...present]
    .sort((a, b) => a - b)
    .map((id) => ({ name: payload.ontology[id] ?? `category ${id}`, color: categoryCss(id) }));
}
