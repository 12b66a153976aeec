"""Row-major RLE for the mask interchange wire format.

Runs alternate background/foreground, first run background (possibly
zero-length); the run sum equals width x height. This mirrors the format
the MATT pipeline consumes; the adapter keeps its own encoder so it only
depends on the wire contract, not the consumer's code.
"""

from __future__ import annotations

import numpy as np


def encode(bitmap: np.ndarray) -> list[int]:
    flat = np.ascontiguousarray(bitmap, dtype=np.uint8).reshape(-1)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] != 0:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def decode(runs: list[int], width: int, height: int) -> np.ndarray:
    values = np.zeros(len(runs), dtype=np.uint8)
    values[1::2] = 1
    flat = np.repeat(values, runs)
    if flat.size != width * height:
        raise ValueError(f"run sum {flat.size} != {width}x{height}")
    return flat.reshape(height, width)
