// Row-major RLE: alternating background/foreground run lengths, first run
// background (possibly zero-length). Must match the pipeline's codec; the
// shared golden fixtures in tests/fixtures pin both sides.

export function decodeRle(runs: number[], width: number, height: number): Uint8Array {
  const total = width * height;
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (run < 0 || !Number.isInteger(run)) {
      throw new Error(`bad run length ${run}`);
    }
    if (value === 1) {
      out.fill(1, pos, Math.min(pos + run, total));
    }
    pos += run;
    value ^= 1;
  }
  if (pos !== total) {
    throw new Error(`run sum ${pos} != ${width}x${height}`);
  }
  return out;
}

export function encodeRle(bitmap: Uint8Array): number[] {
  const runs: number[] = [];
  if (bitmap.length === 0) return runs;
  if (bitmap[0] !== 0) runs.push(0);
  let current = bitmap[0];
  let length = 1;
  for (let i = 1; i < bitmap.length; i++) {
    const v = bitmap[i] === 0 ? 0 : 1;
    if (v === current) {
      length += 1;
    } else {
      runs.push(length);
      current = v;
      length = 1;
    }
  }
  runs.push(length);
  return runs;
}
