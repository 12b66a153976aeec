import { describe, expect, it } from "vitest";
import { clampBox, dragBox, EditBuffer, hitTest } from "../src/editor.js";

describe("clampBox", () => {
  it("keeps boxes inside the frame", () => {
    const box = clampBox({ cx: 0.99, cy: 0.5, w: 0.2, h: 0.2 });
    expect(box.cx + box.w / 2).toBeLessThanOrEqual(1);
    expect(box.cx - box.w / 2).toBeGreaterThanOrEqual(0);
  });

  it("enforces a minimum size", () => {
    const box = clampBox({ cx: 0.5, cy: 0.5, w: 0, h: 0 });
    expect(box.w).toBeGreaterThan(0);
    expect(box.h).toBeGreaterThan(0);
  });
});

describe("hitTest", () => {
  const box = { cx: 0.5, cy: 0.5, w: 0.2, h: 0.2 };

  it("detects corner handles", () => {
    expect(hitTest(box, 0.4, 0.4, 0.01)).toBe("nw");
    expect(hitTest(box, 0.6, 0.4, 0.01)).toBe("ne");
    expect(hitTest(box, 0.4, 0.6, 0.01)).toBe("sw");
    expect(hitTest(box, 0.6, 0.6, 0.01)).toBe("se");
  });

  it("detects interior as move", () => {
    expect(hitTest(box, 0.5, 0.5, 0.01)).toBe("move");
  });

  it("misses outside", () => {
    expect(hitTest(box, 0.9, 0.9, 0.01)).toBeNull();
  });
});

describe("dragBox", () => {
  const box = { cx: 0.5, cy: 0.5, w: 0.2, h: 0.2 };

  it("move shifts the center", () => {
    const moved = dragBox(box, "move", 0.1, -0.05);
    expect(moved.cx).toBeCloseTo(0.6, 12);
    expect(moved.cy).toBeCloseTo(0.45, 12);
    expect(moved.w).toBeCloseTo(0.2, 12);
  });

  it("corner drag resizes", () => {
    const resized = dragBox(box, "se", 0.1, 0.1);
    expect(resized.w).toBeCloseTo(0.3, 12);
    expect(resized.h).toBeCloseTo(0.3, 12);
  });

  it("drag past the opposite edge swaps roles instead of inverting", () => {
    const crossed = dragBox(box, "se", -0.3, 0);
    expect(crossed.w).toBeGreaterThan(0);
    expect(crossed.cx - crossed.w / 2).toBeGreaterThanOrEqual(0);
  });

  it("never leaves the frame", () => {
    const pushed = dragBox(box, "move", 5, 5);
    expect(pushed.cx + pushed.w / 2).toBeLessThanOrEqual(1);
    expect(pushed.cy + pushed.h / 2).toBeLessThanOrEqual(1);
  });
});

describe("EditBuffer", () => {
  it("loads bbox records and round-trips to a payload", () => {
    const buffer = new EditBuffer();
    buffer.load({
      pair_id: "p",
      records: [{ category_id: 1, bbox: [0.5, 0.5, 0.2, 0.2] }],
    });
    expect(buffer.records).toHaveLength(1);
    const payload = buffer.toPayload("p");
    expect(payload.records[0].bbox).toEqual([0.5, 0.5, 0.2, 0.2]);
    expect(buffer.dirty).toBe(false);
  });

  it("edits mark the buffer dirty and clamp to [0,1]", () => {
    const buffer = new EditBuffer();
    buffer.load({ pair_id: "p", records: [{ category_id: 0, bbox: [0.9, 0.9, 0.3, 0.3] }] });
    buffer.update(0, "move", 0.5, 0.5);
    expect(buffer.dirty).toBe(true);
    const [cx, cy, w, h] = buffer.toPayload("p").records[0].bbox as number[];
    expect(cx + w / 2).toBeLessThanOrEqual(1);
    expect(cy + h / 2).toBeLessThanOrEqual(1);
    expect(cx - w / 2).toBeGreaterThanOrEqual(0);
    expect(cy - h / 2).toBeGreaterThanOrEqual(0);
  });

  it("add and remove adjust the record list", () => {
    const buffer = new EditBuffer();
    buffer.load({ pair_id: "p", records: [] });
    buffer.add(0, { cx: 0.3, cy: 0.3, w: 0.1, h: 0.1 });
    expect(buffer.records).toHaveLength(1);
    buffer.remove(0);
    expect(buffer.records).toHaveLength(0);
  });

  it("every emitted coordinate is normalized in [0,1]", () => {
    const buffer = new EditBuffer();
    buffer.load({ pair_id: "p", records: [] });
    buffer.add(0, { cx: -3, cy: 7, w: 9, h: 0.0001 });
    for (const record of buffer.toPayload("p").records) {
      for (const value of record.bbox ?? []) {
        expect(value).toBeGreaterThanOrEqual(0);
        expect(value).toBeLessThanOrEqual(1);
      }
    }
  });
});
