"""Batch segmentation: frames in, interchange JSON + timing sidecar out."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .backends import AdapterConfig, FixtureBackend, make_backend
from . import rle

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
SIDECAR_NAME = "timing.json"


@dataclass
class SegmentResult:
    written: int
    skipped: list[str]
    wall_seconds: float


def _read_frame(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def segment_frames(frames_dir: str | Path, out_dir: str | Path,
                   config: AdapterConfig) -> SegmentResult:
    """Segment every frame and write one interchange file per frame.

    Masks below the confidence floor are dropped. A frame whose inference
    fails is skipped and logged; the batch continues. Wall time for the
    whole batch lands in a timing sidecar next to the outputs.
    """
    frames_dir = Path(frames_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend = make_backend(config)
    frames = sorted(
        p for p in frames_dir.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    ) if frames_dir.is_dir() else []

    written = 0
    skipped: list[str] = []
    start = time.monotonic()
    for frame in frames:
        try:
            image = _read_frame(frame)
            if isinstance(backend, FixtureBackend):
                masks = backend.segment_stem(frame.stem, image.shape[:2])
            else:
                masks = backend.segment(image)
            masks = [m for m in masks if m.confidence >= config.confidence_floor]
            height, width = image.shape[:2]
            payload = {
                "pair_id": frame.stem,
                "width": width,
                "height": height,
                "ontology": config.ontology,
                "masks": [
                    {
                        "category_id": m.category_id,
                        "confidence": round(m.confidence, 6),
                        "rle": rle.encode(m.bitmap),
                    }
                    for m in masks
                ],
                "provenance": config.provenance(),
            }
            _atomic_write(out_dir / f"{frame.stem}.json", json.dumps(payload))
            written += 1
        except Exception as exc:  # per-frame failure: skip and keep going
            logger.warning("skipping %s: %s", frame.name, exc)
            skipped.append(frame.name)
    wall = time.monotonic() - start

    sidecar = {"stage": "segment", "wall_seconds": round(wall, 3), "items": written}
    _atomic_write(out_dir / SIDECAR_NAME, json.dumps(sidecar))
    return SegmentResult(written=written, skipped=skipped, wall_seconds=wall)
