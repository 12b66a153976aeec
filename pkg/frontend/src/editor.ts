// Box edit buffer: move/resize/delete/add with normalized clamping.
// All geometry stays in normalized [0,1] coordinates; pixel conversion
// happens only at render and hit-test time.

import { BBox, LabelRecordPayload, LabelsPayload } from "./api.js";

export type Handle =
  | "move"
  | "nw"
  | "ne"
  | "sw"
  | "se";

export interface EditRecord {
  categoryId: number;
  box: BBox;
}

const MIN_SIZE = 0.005; // boxes may not collapse below half a percent

export function clampBox(box: BBox): BBox {
  const w = Math.min(Math.max(box.w, MIN_SIZE), 1);
  const h = Math.min(Math.max(box.h, MIN_SIZE), 1);
  const cx = Math.min(Math.max(box.cx, w / 2), 1 - w / 2);
  const cy = Math.min(Math.max(box.cy, h / 2), 1 - h / 2);
  return { cx, cy, w, h };
}

export function hitTest(
  box: BBox,
  nx: number,
  ny: number,
  tolerance: number,
): Handle | null {
  const x0 = box.cx - box.w / 2;
  const x1 = box.cx + box.w / 2;
  const y0 = box.cy - box.h / 2;
  const y1 = box.cy + box.h / 2;
  const near = (a: number, b: number) => Math.abs(a - b) <= tolerance;
  if (near(nx, x0) && near(ny, y0)) return "nw";
  if (near(nx, x1) && near(ny, y0)) return "ne";
  if (near(nx, x0) && near(ny, y1)) return "sw";
  if (near(nx, x1) && near(ny, y1)) return "se";
  if (nx >= x0 && nx <= x1 && ny >= y0 && ny <= y1) return "move";
  return null;
}

export function dragBox(box: BBox, handle: Handle, dx: number, dy: number): BBox {
  if (handle === "move") {
    return clampBox({ ...box, cx: box.cx + dx, cy: box.cy + dy });
  }
  let x0 = box.cx - box.w / 2;
  let x1 = box.cx + box.w / 2;
  let y0 = box.cy - box.h / 2;
  let y1 = box.cy + box.h / 2;
  if (handle === "nw" || handle === "sw") x0 += dx;
  if (handle === "ne" || handle === "se") x1 += dx;
  if (handle === "nw" || handle === "ne") y0 += dy;
  if (handle === "sw" || handle === "se") y1 += dy;
  // a handle dragged past its opposite edge swaps roles
  const [lo_x, hi_x] = x0 <= x1 ? [x0, x1] : [x1, x0];
  const [lo_y, hi_y] = y0 <= y1 ? [y0, y1] : [y1, y0];
  return clampBox({
    cx: (lo_x + hi_x) / 2,
    cy: (lo_y + hi_y) / 2,
    w: hi_x - lo_x,
    h: hi_y - lo_y,
  });
}

export class EditBuffer {
  records: EditRecord[] = [];
  dirty = false;

  load(labels: LabelsPayload): void {
    this.records = labels.records
      .filter((r) => r.bbox)
      .map((r) => {
        const [cx, cy, w, h] = r.bbox as number[];
        return { categoryId: r.category_id, box: { cx, cy, w, h } };
      });
    this.dirty = false;
  }

  update(index: number, handle: Handle, dx: number, dy: number): void {
    const record = this.records[index];
    if (!record) return;
    record.box = dragBox(record.box, handle, dx, dy);
    this.dirty = true;
  }

  add(categoryId: number, box: BBox): void {
    this.records.push({ categoryId, box: clampBox(box) });
    this.dirty = true;
  }

  remove(index: number): void {
    if (index >= 0 && index < this.records.length) {
      this.records.splice(index, 1);
      this.dirty = true;
    }
  }

  toPayload(pairId: string): LabelsPayload {
    const records: LabelRecordPayload[] = this.records.map((r) => {
      const box = clampBox(r.box);
      return {
        category_id: r.categoryId,
        bbox: [box.cx, box.cy, box.w, box.h],
      };
    });
    return { pair_id: pairId, records };
  }
}
