import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from matt import kernels  # noqa: E402
from matt.imageio import write_image  # noqa: E402
from matt.maskio import Mask, MaskSet, write_maskset  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger one compile of every jitted kernel so JIT cost is paid once."""
    bitmap = np.zeros((4, 4), dtype=np.uint8)
    bitmap[1:3, 1:3] = 1
    kernels.rle_decode(kernels.rle_encode(bitmap.ravel()), bitmap.size)
    kernels.label_components(bitmap)
    contour = kernels.trace_contour(bitmap).astype(np.float64)
    kernels.simplify_polyline(np.vstack([contour, contour[:1]]), 0.0)
    kernels.sep_convolve(bitmap.astype(np.float64), np.array([0.25, 0.5, 0.25]))
    kernels.sobel_magnitude(bitmap.astype(np.float64))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_bitmap(rng, height, width, density=0.4):
    return (rng.random((height, width)) < density).astype(np.uint8)


def random_connected_bitmap(rng, height, width):
    """Row-convex simply-connected blob: per-row column interval, rows overlap."""
    bitmap = np.zeros((height, width), dtype=np.uint8)
    r0 = int(rng.integers(0, max(1, height - 2)))
    rows = int(rng.integers(1, height - r0 + 1))
    lo = int(rng.integers(0, width - 1))
    hi = int(rng.integers(lo + 1, width + 1))
    for r in range(r0, r0 + rows):
        bitmap[r, lo:hi] = 1
        if r + 1 < r0 + rows:
            # shift the interval but keep >= 1 column of overlap with this row
            new_lo = int(rng.integers(max(0, lo - 3), min(width - 1, hi - 1) + 1))
            new_hi = int(rng.integers(max(new_lo + 1, lo + 1), min(width, hi + 3) + 1))
            lo, hi = new_lo, new_hi
    return bitmap


def make_fixture_dataset(root: Path, n_pairs: int, bands=("rgb", "lwir", "fused"),
                         size=24, seed=7, masks=True):
    """Synthetic paired dataset: tiny images plus one rectangle mask each."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    pair_ids = [f"{i:06d}" for i in range(n_pairs)]
    for band in bands:
        band_dir = root / "frames" / band
        band_dir.mkdir(parents=True, exist_ok=True)
        for pid in pair_ids:
            image = rng.integers(0, 255, (size, size, 3), dtype=np.uint8)
            write_image(np.ascontiguousarray(image), band_dir / f"{pid}.png")
    if masks:
        mask_dir = root / "masks"
        mask_dir.mkdir(parents=True, exist_ok=True)
        for pid in pair_ids:
            bitmap = np.zeros((size, size), dtype=np.uint8)
            r = int(rng.integers(0, size - 6))
            c = int(rng.integers(0, size - 6))
            bitmap[r:r + 5, c:c + 5] = 1
            maskset = MaskSet(
                pair_id=pid,
                masks=[Mask.from_bitmap(bitmap, category_id=int(rng.integers(0, 2)),
                                        confidence=0.9)],
                ontology=["car", "truck"],
            )
            write_maskset(maskset, mask_dir / f"{pid}.json")
    return pair_ids


def make_review_dataset(root: Path, n_pairs: int, size=16, seed=3):
    """Dataset laid out for the review server (images/labels/masks)."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    pair_ids = [f"{i:06d}" for i in range(n_pairs)]
    for band in ("rgb", "lwir"):
        (root / "images" / band).mkdir(parents=True, exist_ok=True)
        (root / "labels" / band).mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for pid in pair_ids:
        for band in ("rgb", "lwir"):
            image = rng.integers(0, 255, (size, size, 3), dtype=np.uint8)
            write_image(np.ascontiguousarray(image), root / "images" / band / f"{pid}.png")
            (root / "labels" / band / f"{pid}.txt").write_text(
                "0 0.500000 0.500000 0.250000 0.250000\n"
            )
        bitmap = np.zeros((size, size), dtype=np.uint8)
        bitmap[4:8, 4:8] = 1
        maskset = MaskSet(pair_id=pid, masks=[Mask.from_bitmap(bitmap, 0, 0.8)],
                          ontology=["car", "truck"])
        write_maskset(maskset, root / "masks" / f"{pid}.json")
    return pair_ids


def write_run_config(path: Path, base: Path, stages, out_dir="run", seed=0):
    config = f"""
[pair]
rgb = "frames/rgb"
lwir = "frames/lwir"
fused = "frames/fused"

[masks]
dir = "masks"

[transfer]
mode = "bbox"
out = "dataset"

[assemble]
ratios = [0.8, 0.2]
splits = ["train", "val"]
ontology = ["car", "truck"]
seed = {seed}
out = "yolo"

[run]
stages = {json.dumps(list(stages))}
out = "{out_dir}"
"""
    path.write_text(config)
    return path
