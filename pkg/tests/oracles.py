"""Independent reference implementations used to derive expected values.

Everything here is deliberately naive (explicit loops, brute force) and
shares no code with the package paths it checks.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def reflect_index(i: int, n: int) -> int:
    if n == 1:
        return 0
    period = 2 * n - 2
    j = i % period
    return j if j < n else period - j


def direct_convolve2d(img: np.ndarray, kernel2d: np.ndarray) -> np.ndarray:
    """Full 2-D convolution with mirror-reflected borders, explicit loops."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    kh, kw = kernel2d.shape
    rr, rc = kh // 2, kw // 2
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for dr in range(kh):
                for dc in range(kw):
                    sr = reflect_index(r + dr - rr, h)
                    sc = reflect_index(c + dc - rc, w)
                    acc += img[sr, sc] * kernel2d[dr, dc]
            out[r, c] = acc
    return out


def gaussian_kernel_1d(sigma: float, radius: int | None = None) -> np.ndarray:
    if radius is None:
        radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T


def sobel_magnitude_direct(img: np.ndarray) -> np.ndarray:
    gx = direct_convolve2d(img, SOBEL_X)
    gy = direct_convolve2d(img, SOBEL_Y)
    return np.sqrt(gx * gx + gy * gy)


def flood_fill_component_count(bitmap: np.ndarray) -> int:
    """Count 4-connected components with a queue-based flood fill."""
    h, w = bitmap.shape
    seen = np.zeros((h, w), dtype=bool)
    count = 0
    for r in range(h):
        for c in range(w):
            if bitmap[r, c] and not seen[r, c]:
                count += 1
                queue = deque([(r, c)])
                seen[r, c] = True
                while queue:
                    cr, cc = queue.popleft()
                    for nr, nc in ((cr - 1, cc), (cr + 1, cc), (cr, cc - 1), (cr, cc + 1)):
                        if 0 <= nr < h and 0 <= nc < w and bitmap[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            queue.append((nr, nc))
    return count


def all_point_ap(flags: list[bool], total_gt: int) -> float | None:
    """Exact area under the rectified precision-recall curve."""
    if total_gt == 0:
        return None if not flags else 0.0
    if not flags:
        return 0.0
    tp = fp = 0
    recalls = [0.0]
    precisions = []
    for flag in flags:
        tp += bool(flag)
        fp += not flag
        recalls.append(tp / total_gt)
        precisions.append(tp / (tp + fp))
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    area = 0.0
    for i, precision in enumerate(precisions):
        area += (recalls[i + 1] - recalls[i]) * precision
    return area


def greedy_match_oracle(det_boxes, det_confidences, gt_boxes, iou_thresh):
    """Reference matcher: full rescan per detection, no shared code.

    det_boxes/gt_boxes are (x0, y0, x1, y1) tuples; returns flags aligned
    with input detections plus the unmatched ground-truth count.
    """

    def iou(a, b):
        ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
        ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
        if ix1 <= ix0 or iy1 <= iy0:
            return 0.0
        inter = (ix1 - ix0) * (iy1 - iy0)
        area_a = (a[2] - a[0]) * (a[3] - a[1])
        area_b = (b[2] - b[0]) * (b[3] - b[1])
        return inter / (area_a + area_b - inter)

    order = sorted(range(len(det_boxes)), key=lambda i: (-det_confidences[i], i))
    available = set(range(len(gt_boxes)))
    flags = [False] * len(det_boxes)
    for i in order:
        candidates = [(iou(det_boxes[i], gt_boxes[j]), -j) for j in sorted(available)]
        candidates = [(v, nj) for v, nj in candidates if v >= iou_thresh]
        if not candidates:
            continue
        best_v, neg_j = max(candidates, key=lambda t: (t[0], t[1]))
        available.discard(-neg_j)
        flags[i] = True
    return flags, len(available)


def raster_iou(a_extents, b_extents, n: int = 1000) -> float:
    """IoU by counting cells of an n x n rasterization of [0,1]^2."""
    grid_a = np.zeros((n, n), dtype=bool)
    grid_b = np.zeros((n, n), dtype=bool)
    for grid, (x0, y0, x1, y1) in ((grid_a, a_extents), (grid_b, b_extents)):
        c0, c1 = int(round(x0 * n)), int(round(x1 * n))
        r0, r1 = int(round(y0 * n)), int(round(y1 * n))
        grid[r0:r1, c0:c1] = True
    inter = np.logical_and(grid_a, grid_b).sum()
    union = np.logical_or(grid_a, grid_b).sum()
    return inter / union if union else 0.0


def shoelace(vertices) -> float:
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return abs(total) / 2.0
