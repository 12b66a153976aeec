"""Pure-numpy kernel implementations.

Fallback backend used when numba is unavailable or disabled via
MATT_NUMBA=0. Same contracts as matt.kernels.numba_backend; the two are
cross-checked in tests/test_kernels.py.

Conventions shared by both backends:
  * binary rasters are uint8 row-major arrays with values {0, 1}
  * RLE payloads alternate background/foreground run lengths, first run
    background (possibly zero-length)
  * border handling for convolutions is mirror reflection about the edge
    pixel (the edge sample itself is not repeated)
  * contour vertices are (x, y) lattice points on the pixel-corner grid
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def rle_encode(flat: np.ndarray) -> np.ndarray:
    """Encode a flat binary array as alternating run lengths (int64)."""
    flat = np.ascontiguousarray(flat, dtype=np.uint8)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).astype(np.int64)
    if flat[0] != 0:
        runs = np.concatenate(([0], runs))
    return runs


def rle_decode(runs: np.ndarray, size: int) -> np.ndarray:
    """Expand run lengths back to a flat uint8 array of the given size."""
    runs = np.asarray(runs, dtype=np.int64)
    values = np.zeros(runs.size, dtype=np.uint8)
    values[1::2] = 1
    flat = np.repeat(values, runs)
    return flat[:size]


def _grow4(mask: np.ndarray) -> np.ndarray:
    grown = mask.copy()
    grown[1:, :] |= mask[:-1, :]
    grown[:-1, :] |= mask[1:, :]
    grown[:, 1:] |= mask[:, :-1]
    grown[:, :-1] |= mask[:, 1:]
    return grown


def label_components(bitmap: np.ndarray) -> tuple[np.ndarray, int]:
    """Label 4-connected foreground components; returns (labels, count).

    Frontier dilation per component: O(diameter) vectorized passes each.
    """
    fg = bitmap != 0
    labels = np.zeros(bitmap.shape, dtype=np.int32)
    count = 0
    remaining = fg.copy()
    while remaining.any():
        count += 1
        seed_r, seed_c = np.argwhere(remaining)[0]
        comp = np.zeros_like(remaining)
        comp[seed_r, seed_c] = True
        while True:
            grown = _grow4(comp) & remaining
            if grown.sum() == comp.sum():
                break
            comp = grown
        labels[comp] = count
        remaining &= ~comp
    return labels, count


# Outgoing crack-edge directions at a lattice vertex, in the fixed order
# +x, +y, -x, -y. Edge d exists iff pixel FG[d] is foreground and BG[d] is
# background (foreground kept on the right of travel, y pointing down).
_DX = (1, 0, -1, 0)
_DY = (0, 1, 0, -1)


def _edge_exists(bitmap: np.ndarray, x: int, y: int, d: int) -> bool:
    h, w = bitmap.shape

    def fg(r: int, c: int) -> bool:
        return 0 <= r < h and 0 <= c < w and bitmap[r, c] != 0

    if d == 0:  # +x: top edge of pixel (y, x)
        return fg(y, x) and not fg(y - 1, x)
    if d == 1:  # +y: right edge of pixel (y, x-1)
        return fg(y, x - 1) and not fg(y, x)
    if d == 2:  # -x: bottom edge of pixel (y-1, x-1)
        return fg(y - 1, x - 1) and not fg(y, x - 1)
    # d == 3, -y: left edge of pixel (y-1, x)
    return fg(y - 1, x) and not fg(y - 1, x - 1)


def trace_contour(bitmap: np.ndarray) -> np.ndarray:
    """Trace the outer boundary of the foreground as closed crack polygon.

    Returns an (N, 2) int64 array of (x, y) lattice vertices, not closed
    (the first vertex is not repeated). Starts at the top-left corner of
    the topmost-leftmost foreground pixel and keeps the foreground on the
    right of travel. At pinch vertices the sharpest right turn is taken,
    which merges the outer boundary into a single cycle whose signed area
    equals the foreground pixel count.
    """
    fg_rows, fg_cols = np.nonzero(bitmap)
    if fg_rows.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    r0 = int(fg_rows[0])
    c0 = int(fg_cols[fg_rows == r0].min())

    x, y, d = c0, r0, 0  # start on the top edge, moving +x
    vertices = [(x, y)]
    start = (x, y, d)
    max_steps = 4 * bitmap.size + 4
    for _ in range(max_steps):
        x, y = x + _DX[d], y + _DY[d]
        # preference: right turn, straight, left turn (U-turns cannot occur)
        for turn in (1, 0, 3):
            nd = (d + turn) % 4
            if _edge_exists(bitmap, x, y, nd):
                d = nd
                break
        else:
            raise AssertionError("open contour: inconsistent bitmap")
        if (x, y, d) == start:
            break
        vertices.append((x, y))
    return np.asarray(vertices, dtype=np.int64)


def _point_segment_dist(px, py, ax, ay, bx, by) -> float:
    vx, vy = bx - ax, by - ay
    seg2 = vx * vx + vy * vy
    if seg2 == 0.0:
        dx, dy = px - ax, py - ay
        return float(np.sqrt(dx * dx + dy * dy))
    # perpendicular distance to the infinite line through a-b
    return float(abs(vx * (py - ay) - vy * (px - ax)) / np.sqrt(seg2))


def simplify_polyline(points: np.ndarray, eps: float) -> np.ndarray:
    """Douglas-Peucker keep-mask for an open polyline (endpoints kept).

    A point survives only where its perpendicular distance to the current
    anchor segment exceeds eps, so eps=0 removes exactly-collinear points.
    """
    n = points.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = keep[n - 1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        ax, ay = points[i]
        bx, by = points[j]
        best = -1.0
        best_k = i
        for k in range(i + 1, j):
            dist = _point_segment_dist(points[k, 0], points[k, 1], ax, ay, bx, by)
            if dist > best:
                best = dist
                best_k = k
        if best > eps:
            keep[best_k] = True
            stack.append((i, best_k))
            stack.append((best_k, j))
    return keep


def sep_convolve(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 2-D convolution (rows then columns), reflected borders."""
    img = np.asarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    radius = kernel.size // 2

    def pad_axis(arr: np.ndarray, axis: int) -> np.ndarray:
        width = [(0, 0), (0, 0)]
        width[axis] = (radius, radius)
        # mirror reflection needs >= 2 samples; a 1-sample axis is constant
        mode = "reflect" if arr.shape[axis] > 1 else "edge"
        return np.pad(arr, width, mode=mode)

    out = sliding_window_view(pad_axis(img, 1), kernel.size, axis=1) @ kernel
    out = sliding_window_view(pad_axis(out, 0), kernel.size, axis=0) @ kernel
    return out


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    """Gradient magnitude with the standard 3x3 kernels, reflected borders."""
    img = np.asarray(img, dtype=np.float64)
    pad_mode = "reflect" if min(img.shape) > 1 else "edge"
    p = np.pad(img, 1, mode=pad_mode)
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2]
    )
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]
    )
    return np.sqrt(gx * gx + gy * gy)
