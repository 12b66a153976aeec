"""Numba-jitted kernel implementations.

Loop-style twins of matt.kernels.numpy_backend, compiled with @njit
(cache=True, so the JIT cost is paid once per machine). Importing this
module requires numba; matt.kernels guards the import.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def rle_encode(flat):
    n = flat.size
    runs = np.empty(n + 1, dtype=np.int64)
    count = 0
    if flat[0] != 0:
        runs[0] = 0  # leading zero-length background run
        count = 1
    current = flat[0]
    length = 1
    for i in range(1, n):
        if flat[i] == current:
            length += 1
        else:
            runs[count] = length
            count += 1
            current = flat[i]
            length = 1
    runs[count] = length
    count += 1
    return runs[:count].copy()


@njit(cache=True)
def rle_decode(runs, size):
    flat = np.zeros(size, dtype=np.uint8)
    pos = 0
    for i in range(runs.size):
        if i % 2 == 1:
            end = min(pos + runs[i], size)
            for j in range(pos, end):
                flat[j] = 1
        pos += runs[i]
        if pos >= size:
            break
    return flat


@njit(cache=True)
def label_components(bitmap):
    h, w = bitmap.shape
    labels = np.zeros((h, w), dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    count = 0
    for r0 in range(h):
        for c0 in range(w):
            if bitmap[r0, c0] != 0 and labels[r0, c0] == 0:
                count += 1
                labels[r0, c0] = count
                stack[0] = r0 * w + c0
                top = 1
                while top > 0:
                    top -= 1
                    p = stack[top]
                    r = p // w
                    c = p % w
                    if r > 0 and bitmap[r - 1, c] != 0 and labels[r - 1, c] == 0:
                        labels[r - 1, c] = count
                        stack[top] = p - w
                        top += 1
                    if r + 1 < h and bitmap[r + 1, c] != 0 and labels[r + 1, c] == 0:
                        labels[r + 1, c] = count
                        stack[top] = p + w
                        top += 1
                    if c > 0 and bitmap[r, c - 1] != 0 and labels[r, c - 1] == 0:
                        labels[r, c - 1] = count
                        stack[top] = p - 1
                        top += 1
                    if c + 1 < w and bitmap[r, c + 1] != 0 and labels[r, c + 1] == 0:
                        labels[r, c + 1] = count
                        stack[top] = p + 1
                        top += 1
    return labels, count


@njit(cache=True)
def _fg(bitmap, r, c):
    h, w = bitmap.shape
    return 0 <= r < h and 0 <= c < w and bitmap[r, c] != 0


@njit(cache=True)
def _edge_exists(bitmap, x, y, d):
    # d: 0=+x, 1=+y, 2=-x, 3=-y; foreground stays on the right of travel
    if d == 0:
        return _fg(bitmap, y, x) and not _fg(bitmap, y - 1, x)
    if d == 1:
        return _fg(bitmap, y, x - 1) and not _fg(bitmap, y, x)
    if d == 2:
        return _fg(bitmap, y - 1, x - 1) and not _fg(bitmap, y, x - 1)
    return _fg(bitmap, y - 1, x) and not _fg(bitmap, y - 1, x - 1)


@njit(cache=True)
def trace_contour(bitmap):
    h, w = bitmap.shape
    r0 = -1
    c0 = -1
    for r in range(h):
        for c in range(w):
            if bitmap[r, c] != 0:
                r0 = r
                c0 = c
                break
        if r0 >= 0:
            break
    if r0 < 0:
        return np.zeros((0, 2), dtype=np.int64)

    dx = (1, 0, -1, 0)
    dy = (0, 1, 0, -1)
    max_steps = 4 * h * w + 4
    vertices = np.empty((max_steps, 2), dtype=np.int64)
    x, y, d = c0, r0, 0
    sx, sy, sd = x, y, d
    vertices[0, 0] = x
    vertices[0, 1] = y
    n = 1
    for _ in range(max_steps):
        x += dx[d]
        y += dy[d]
        found = False
        for turn in (1, 0, 3):
            nd = (d + turn) % 4
            if _edge_exists(bitmap, x, y, nd):
                d = nd
                found = True
                break
        if not found:
            raise AssertionError("open contour: inconsistent bitmap")
        if x == sx and y == sy and d == sd:
            break
        vertices[n, 0] = x
        vertices[n, 1] = y
        n += 1
    return vertices[:n].copy()


@njit(cache=True)
def simplify_polyline(points, eps):
    n = points.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = True
    keep[n - 1] = True
    stack = np.empty((n, 2), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = n - 1
    top = 1
    while top > 0:
        top -= 1
        i = stack[top, 0]
        j = stack[top, 1]
        if j - i < 2:
            continue
        ax = points[i, 0]
        ay = points[i, 1]
        vx = points[j, 0] - ax
        vy = points[j, 1] - ay
        seg2 = vx * vx + vy * vy
        best = -1.0
        best_k = i
        for k in range(i + 1, j):
            px = points[k, 0]
            py = points[k, 1]
            if seg2 == 0.0:
                ddx = px - ax
                ddy = py - ay
                dist = np.sqrt(ddx * ddx + ddy * ddy)
            else:
                dist = abs(vx * (py - ay) - vy * (px - ax)) / np.sqrt(seg2)
            if dist > best:
                best = dist
                best_k = k
        if best > eps:
            keep[best_k] = True
            stack[top, 0] = i
            stack[top, 1] = best_k
            top += 1
            stack[top, 0] = best_k
            stack[top, 1] = j
            top += 1
    return keep


@njit(cache=True)
def _reflect(i, n):
    # mirror about the edge sample without repeating it (period 2n-2)
    if n == 1:
        return 0
    period = 2 * n - 2
    j = i % period
    if j < 0:
        j += period
    if j >= n:
        j = period - j
    return j


@njit(cache=True)
def sep_convolve(img, kernel):
    h, w = img.shape
    k = kernel.size
    radius = k // 2
    tmp = np.empty((h, w), dtype=np.float64)
    out = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for t in range(k):
                acc += img[r, _reflect(c + t - radius, w)] * kernel[t]
            tmp[r, c] = acc
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for t in range(k):
                acc += tmp[_reflect(r + t - radius, h), c] * kernel[t]
            out[r, c] = acc
    return out


@njit(cache=True)
def sobel_magnitude(img):
    h, w = img.shape
    out = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        rm = _reflect(r - 1, h)
        rp = _reflect(r + 1, h)
        for c in range(w):
            cm = _reflect(c - 1, w)
            cp = _reflect(c + 1, w)
            gx = (
                img[rm, cp]
                + 2.0 * img[r, cp]
                + img[rp, cp]
                - img[rm, cm]
                - 2.0 * img[r, cm]
                - img[rp, cm]
            )
            gy = (
                img[rp, cm]
                + 2.0 * img[rp, c]
                + img[rp, cp]
                - img[rm, cm]
                - 2.0 * img[rm, c]
                - img[rm, cp]
            )
            out[r, c] = np.sqrt(gx * gx + gy * gy)
    return out
