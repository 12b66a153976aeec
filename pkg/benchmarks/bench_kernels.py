#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--size 512] [--repeat 5]
Prints per-kernel wall times for both backends after a warmup pass, plus
the speedup ratio. The same dispatch switch used here is what MATT_NUMBA
selects at import time.
"""

import argparse
import time

import numpy as np

from matt import kernels
from matt.imgproc import gaussian_kernel


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if "numba" not in kernels.available_backends():
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    n = args.size
    bitmap = (rng.random((n, n)) < 0.45).astype(np.uint8)
    blob = np.zeros((n, n), dtype=np.uint8)
    blob[n // 8: n - n // 8, n // 8: n - n // 8] = 1
    image = rng.uniform(0, 255, (n, n))
    kernel = gaussian_kernel(2.0)
    flat = bitmap.ravel()
    runs = np.asarray(kernels.rle_encode(flat), dtype=np.int64)

    cases = {
        "rle_encode": lambda: kernels.rle_encode(flat),
        "rle_decode": lambda: kernels.rle_decode(runs, flat.size),
        "label_components": lambda: kernels.label_components(bitmap),
        "trace_contour": lambda: kernels.trace_contour(blob),
        "sep_convolve(sigma=2)": lambda: kernels.sep_convolve(image, kernel),
        "sobel_magnitude": lambda: kernels.sobel_magnitude(image),
    }

    results = {}
    for backend in ("numpy", "numba"):
        kernels.set_backend(backend)
        for name, fn in cases.items():
            fn()  # warmup (JIT compile on the numba side)
            results[(backend, name)] = timeit(fn, args.repeat)

    print(f"kernel benchmarks on {n}x{n} inputs (best of {args.repeat})\n")
    print(f"{'kernel':<24} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name in cases:
        t_np = results[("numpy", name)]
        t_nb = results[("numba", name)]
        print(f"{name:<24} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
