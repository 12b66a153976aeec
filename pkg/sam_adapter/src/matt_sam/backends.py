"""Segmentation backends.

The real foundation-model backend wraps autodistill + SAM and needs its
optional dependencies plus a checkpoint. The two desk-scale backends
(threshold, fixture) exist so the rest of the toolchain can be exercised
with no model at all: the pipeline's contract is the interchange file
only.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rle


@dataclass
class AdapterConfig:
    ontology: list[str]
    prompts: dict[str, str] = field(default_factory=dict)
    backend: str = "threshold"
    model_checkpoint: str = ""
    model_variant: str = "vit_b"
    device: str = "cpu"
    confidence_floor: float = 0.0
    fixture_dir: str = ""

    def __post_init__(self):
        if not self.ontology:
            raise ValueError("ontology must not be empty")
        if not 0.0 <= self.confidence_floor <= 1.0:
            raise ValueError("confidence_floor must be in [0, 1]")

    def provenance(self) -> dict:
        return {
            "backend": self.backend,
            "model_variant": self.model_variant,
            "device": self.device,
            "prompts": self.prompts or {name: name for name in self.ontology},
        }


@dataclass
class MaskOut:
    category_id: int
    confidence: float
    bitmap: np.ndarray


class ThresholdBackend:
    """Bright-blob segmenter for desk-scale runs on synthetic frames.

    Thresholds the grayscale frame at mean + 1 std, splits the result into
    4-connected blobs, and scores each blob by its contrast above the
    threshold. Blobs larger than 2% of the frame go to the second
    ontology slot when one exists (big things are trucks).
    """

    MIN_BLOB_PX = 4

    def __init__(self, config: AdapterConfig):
        self.config = config

    def segment(self, image: np.ndarray) -> list[MaskOut]:
        gray = image.astype(np.float64)
        if gray.ndim == 3:
            gray = 0.299 * gray[:, :, 0] + 0.587 * gray[:, :, 1] + 0.114 * gray[:, :, 2]
        thresh = gray.mean() + gray.std()
        binary = gray > thresh
        masks = []
        big_cutoff = 0.02 * binary.size
        for blob in _blobs(binary):
            if blob.sum() < self.MIN_BLOB_PX:
                continue
            contrast = (gray[blob].mean() - thresh) / max(255.0 - thresh, 1e-9)
            category = 1 if (blob.sum() > big_cutoff and len(self.config.ontology) > 1) else 0
            masks.append(MaskOut(
                category_id=category,
                confidence=float(np.clip(contrast, 0.0, 1.0)),
                bitmap=blob.astype(np.uint8),
            ))
        return masks


def _blobs(binary: np.ndarray):
    h, w = binary.shape
    seen = np.zeros((h, w), dtype=bool)
    for r in range(h):
        for c in range(w):
            if binary[r, c] and not seen[r, c]:
                blob = np.zeros((h, w), dtype=bool)
                queue = deque([(r, c)])
                seen[r, c] = blob[r, c] = True
                while queue:
                    cr, cc = queue.popleft()
                    for nr, nc in ((cr - 1, cc), (cr + 1, cc), (cr, cc - 1), (cr, cc + 1)):
                        if 0 <= nr < h and 0 <= nc < w and binary[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = blob[nr, nc] = True
                            queue.append((nr, nc))
                yield blob


class FixtureBackend:
    """Replays hand-written interchange JSON fixtures keyed by frame stem."""

    def __init__(self, config: AdapterConfig):
        if not config.fixture_dir:
            raise ValueError("fixture backend needs fixture_dir")
        self.fixture_dir = Path(config.fixture_dir)
        self.config = config

    def segment_stem(self, stem: str, shape: tuple[int, int]) -> list[MaskOut]:
        path = self.fixture_dir / f"{stem}.json"
        if not path.exists():
            return []
        payload = json.loads(path.read_text())
        masks = []
        for entry in payload.get("masks", []):
            bitmap = rle.decode(entry["rle"], payload["width"], payload["height"])
            masks.append(MaskOut(
                category_id=int(entry["category_id"]),
                confidence=float(entry.get("confidence", 1.0)),
                bitmap=bitmap,
            ))
        return masks


class SamBackend:
    """Foundation-model backend (autodistill + SAM); optional dependencies."""

    def __init__(self, config: AdapterConfig):
        if not config.model_checkpoint or not Path(config.model_checkpoint).exists():
            raise RuntimeError(
                f"model checkpoint not found: {config.model_checkpoint!r}"
            )
        try:
            from autodistill.detection import CaptionOntology
            from autodistill_grounded_sam import GroundedSAM
        except ImportError as exc:
            raise RuntimeError(
                "autodistill backends are not installed; "
                "pip install 'matt-sam[sam]'"
            ) from exc
        prompts = config.prompts or {name: name for name in config.ontology}
        self._model = GroundedSAM(
            ontology=CaptionOntology({prompt: name for name, prompt in prompts.items()})
        )
        self.config = config

    def segment(self, image: np.ndarray) -> list[MaskOut]:
        detections = self._model.predict(image)
        masks = []
        for i in range(len(detections)):
            masks.append(MaskOut(
                category_id=int(detections.class_id[i]),
                confidence=float(detections.confidence[i]),
                bitmap=detections.mask[i].astype(np.uint8),
            ))
        return masks


def make_backend(config: AdapterConfig):
    if config.backend == "threshold":
        return ThresholdBackend(config)
    if config.backend == "fixture":
        return FixtureBackend(config)
    if config.backend == "sam":
        return SamBackend(config)
    raise ValueError(f"unknown backend {config.backend!r}")
