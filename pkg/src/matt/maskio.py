"""Mask codecs and YOLO label IO.

Binary masks travel between tools as JSON "interchange" files holding
row-major RLE payloads (alternating background/foreground run lengths,
first run background, possibly zero-length). This module converts masks
to bounding boxes or boundary polygons and reads/writes YOLO .txt label
files.

Geometry convention: pixel (r, c) occupies the half-open square
[c, c+1) x [r, r+1); normalized coordinates divide by image width/height.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from . import kernels
from .errors import (
    CorruptPayloadError,
    EmptyMaskError,
    InvalidParameterError,
    ParseError,
    ValidationError,
)

logger = logging.getLogger(__name__)

DEFAULT_SIMPLIFY_EPS_PX = 1.0


@dataclass
class Mask:
    """One category-tagged binary mask, RLE-encoded."""

    width_px: int
    height_px: int
    runs: list[int]
    category_id: int
    confidence: float = 1.0

    def validate(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValidationError("mask dimensions must be positive")
        if any(r < 0 for r in self.runs):
            raise CorruptPayloadError("negative run length")
        total = sum(self.runs)
        expected = self.width_px * self.height_px
        if total != expected:
            raise CorruptPayloadError(f"run sum {total} != {self.width_px}x{self.height_px}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")
        if self.category_id < 0:
            raise ValidationError("category_id must be non-negative")

    def to_bitmap(self) -> np.ndarray:
        self.validate()
        flat = kernels.rle_decode(np.asarray(self.runs, dtype=np.int64), self.width_px * self.height_px)
        return flat.reshape(self.height_px, self.width_px)

    @classmethod
    def from_bitmap(cls, bitmap: np.ndarray, category_id: int, confidence: float = 1.0) -> "Mask":
        bitmap = np.ascontiguousarray(bitmap, dtype=np.uint8)
        if bitmap.ndim != 2 or bitmap.size == 0:
            raise ValidationError("bitmap must be a non-empty 2-D array")
        runs = kernels.rle_encode(bitmap.reshape(-1))
        h, w = bitmap.shape
        return cls(width_px=w, height_px=h, runs=[int(r) for r in runs],
                   category_id=category_id, confidence=confidence)

    def foreground_count(self) -> int:
        return sum(self.runs[1::2])


@dataclass
class MaskSet:
    """All masks for one image plus the category ontology."""

    pair_id: str
    masks: list[Mask]
    ontology: list[str]

    def validate(self) -> None:
        for mask in self.masks:
            mask.validate()
            if mask.category_id >= len(self.ontology):
                raise ValidationError(
                    f"category_id {mask.category_id} outside ontology of {len(self.ontology)}"
                )


@dataclass(frozen=True)
class BBoxNorm:
    """Axis-aligned box, center/size normalized to image dimensions."""

    cx: float
    cy: float
    w: float
    h: float

    def validate(self, eps: float = 1e-9) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"degenerate box w={self.w} h={self.h}")
        for lo, hi in ((self.cx - self.w / 2, self.cx + self.w / 2),
                       (self.cy - self.h / 2, self.cy + self.h / 2)):
            if lo < -eps or hi > 1 + eps:
                raise ValidationError(f"box extent [{lo}, {hi}] outside [0, 1]")

    def extents(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max)."""
        return (self.cx - self.w / 2, self.cy - self.h / 2,
                self.cx + self.w / 2, self.cy + self.h / 2)


@dataclass(frozen=True)
class PolygonNorm:
    """Closed polygon outline, vertices normalized to image dimensions."""

    vertices: tuple[tuple[float, float], ...]

    def validate(self, eps: float = 1e-9) -> None:
        if len(self.vertices) < 3:
            raise ValidationError(f"polygon needs >= 3 vertices, got {len(self.vertices)}")
        for i, (x, y) in enumerate(self.vertices):
            if not (-eps <= x <= 1 + eps and -eps <= y <= 1 + eps):
                raise ValidationError(f"vertex {i} ({x}, {y}) outside [0, 1]")
            px, py = self.vertices[i - 1]
            if x == px and y == py:
                raise ValidationError(f"consecutive duplicate vertex at {i}")

    def area(self) -> float:
        """Shoelace area (absolute value) in normalized units."""
        total = 0.0
        n = len(self.vertices)
        for i in range(n):
            x0, y0 = self.vertices[i]
            x1, y1 = self.vertices[(i + 1) % n]
            total += x0 * y1 - x1 * y0
        return abs(total) / 2.0

    def bounding_box(self) -> BBoxNorm:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return BBoxNorm(cx=(min(xs) + max(xs)) / 2, cy=(min(ys) + max(ys)) / 2,
                        w=max(xs) - min(xs), h=max(ys) - min(ys))


Geometry = Union[BBoxNorm, PolygonNorm]


@dataclass(frozen=True)
class LabelRecord:
    category_id: int
    geometry: Geometry


@dataclass
class LabelFile:
    """Normalized label records for one image; may be empty (negative)."""

    pair_id: str
    records: list[LabelRecord] = field(default_factory=list)


def rle_encode(bitmap: np.ndarray) -> list[int]:
    """Encode a row-major binary grid as alternating run lengths."""
    bitmap = np.ascontiguousarray(bitmap, dtype=np.uint8)
    if bitmap.ndim != 2 or bitmap.size == 0:
        raise InvalidParameterError("bitmap must be a non-empty 2-D array")
    return [int(r) for r in kernels.rle_encode(bitmap.reshape(-1))]


def rle_decode(runs: Iterable[int], width_px: int, height_px: int) -> np.ndarray:
    """Decode run lengths back to a (height, width) uint8 grid."""
    runs = list(runs)
    if width_px <= 0 or height_px <= 0:
        raise InvalidParameterError("dimensions must be positive")
    if any(r < 0 for r in runs):
        raise CorruptPayloadError("negative run length")
    total = sum(runs)
    if total != width_px * height_px:
        raise CorruptPayloadError(f"run sum {total} != {width_px}x{height_px}")
    flat = kernels.rle_decode(np.asarray(runs, dtype=np.int64), width_px * height_px)
    return flat.reshape(height_px, width_px)


def mask_to_bbox(mask: Mask) -> BBoxNorm:
    """Tightest box over the foreground pixels, normalized."""
    bitmap = mask.to_bitmap()
    rows = np.flatnonzero(bitmap.any(axis=1))
    if rows.size == 0:
        raise EmptyMaskError("mask has no foreground pixels")
    cols = np.flatnonzero(bitmap.any(axis=0))
    r_min, r_max = int(rows[0]), int(rows[-1])
    c_min, c_max = int(cols[0]), int(cols[-1])
    w, h = float(mask.width_px), float(mask.height_px)
    # pixel (r, c) spans [c, c+1) x [r, r+1), so the far edge is max+1
    return BBoxNorm(
        cx=(c_min + c_max + 1) / 2 / w,
        cy=(r_min + r_max + 1) / 2 / h,
        w=(c_max + 1 - c_min) / w,
        h=(r_max + 1 - r_min) / h,
    )


def _force_triangle(points: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Guarantee >= 3 surviving vertices when eps erased a whole contour."""
    kept = np.flatnonzero(keep)
    if kept.size >= 3:
        return keep
    a, b = points[kept[0]], points[kept[-1]]
    best_k, best_d = -1, -1.0
    for k in range(points.shape[0]):
        if keep[k]:
            continue
        d = abs((b[0] - a[0]) * (points[k, 1] - a[1]) - (b[1] - a[1]) * (points[k, 0] - a[0]))
        if d > best_d:
            best_d, best_k = d, k
    if best_k >= 0:
        keep[best_k] = True
    return keep


def mask_to_polygon(mask: Mask, simplify_eps_px: float = DEFAULT_SIMPLIFY_EPS_PX) -> PolygonNorm:
    """Outer boundary of a single-component mask as a simplified polygon.

    The contour is traced on the pixel-corner grid, so with eps 0 its
    shoelace area equals the foreground pixel count exactly. Multi
    component masks must be split with split_components first.
    """
    if simplify_eps_px < 0:
        raise InvalidParameterError("simplify_eps_px must be >= 0")
    bitmap = mask.to_bitmap()
    if not bitmap.any():
        raise EmptyMaskError("mask has no foreground pixels")
    contour = kernels.trace_contour(bitmap)
    closed = np.vstack([contour, contour[:1]]).astype(np.float64)
    keep = kernels.simplify_polyline(closed, float(simplify_eps_px))
    keep = np.asarray(keep, dtype=bool)
    keep[-1] = False  # drop the duplicated closing vertex
    keep = _force_triangle(closed, keep)
    kept = closed[keep]
    w, h = float(mask.width_px), float(mask.height_px)
    vertices = tuple((float(x) / w, float(y) / h) for x, y in kept)
    polygon = PolygonNorm(vertices=vertices)
    polygon.validate()
    return polygon


def split_components(mask: Mask) -> list[Mask]:
    """Split a mask into its 4-connected components (own category/confidence)."""
    bitmap = mask.to_bitmap()
    labels, count = kernels.label_components(bitmap)
    parts = []
    for lab in range(1, count + 1):
        part = (labels == lab).astype(np.uint8)
        parts.append(Mask.from_bitmap(part, mask.category_id, mask.confidence))
    return parts


def masks_to_labelfile(
    maskset: MaskSet,
    mode: str = "bbox",
    simplify_eps_px: float = DEFAULT_SIMPLIFY_EPS_PX,
    split: bool = True,
) -> LabelFile:
    """Convert a MaskSet to one label record per object instance."""
    if mode not in ("bbox", "polygon"):
        raise InvalidParameterError(f"unknown label mode: {mode!r}")
    maskset.validate()
    records = []
    for mask in maskset.masks:
        instances = split_components(mask) if split else [mask]
        for instance in instances:
            if instance.foreground_count() == 0:
                continue
            if mode == "bbox":
                geometry: Geometry = mask_to_bbox(instance)
            else:
                geometry = mask_to_polygon(instance, simplify_eps_px)
            records.append(LabelRecord(category_id=instance.category_id, geometry=geometry))
    return LabelFile(pair_id=maskset.pair_id, records=records)


def emit_yolo(labels: LabelFile, mode: str) -> str:
    """Render records as YOLO label text (6 decimal places, one per line)."""
    if mode not in ("bbox", "polygon"):
        raise InvalidParameterError(f"unknown label mode: {mode!r}")
    lines = []
    for record in labels.records:
        geom = record.geometry
        if mode == "bbox":
            if not isinstance(geom, BBoxNorm):
                geom = geom.bounding_box()
            values = (geom.cx, geom.cy, geom.w, geom.h)
        else:
            if not isinstance(geom, PolygonNorm):
                raise ValidationError("polygon mode requires polygon geometry")
            values = tuple(coord for vertex in geom.vertices for coord in vertex)
        parts = " ".join(f"{v:.6f}" for v in values)
        lines.append(f"{record.category_id} {parts}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_yolo(text: str, mode: str, pair_id: str = "") -> LabelFile:
    """Parse YOLO label text; tolerates 6-decimal printing granularity."""
    if mode not in ("bbox", "polygon"):
        raise InvalidParameterError(f"unknown label mode: {mode!r}")
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if mode == "bbox" and len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", line=lineno)
        if mode == "polygon" and (len(fields) < 7 or len(fields) % 2 == 0):
            raise ParseError(
                f"expected odd field count >= 7, got {len(fields)}", line=lineno
            )
        try:
            category_id = int(fields[0])
        except ValueError:
            raise ParseError(f"non-integer category {fields[0]!r}", line=lineno, token=fields[0])
        coords = []
        for token in fields[1:]:
            try:
                value = float(token)
            except ValueError:
                raise ParseError(f"non-numeric coordinate {token!r}", line=lineno, token=token)
            if not math.isfinite(value) or value < 0.0 or value > 1.0:
                raise ParseError(f"coordinate {value} outside [0, 1]", line=lineno, token=token)
            coords.append(value)
        if category_id < 0:
            raise ParseError(f"negative category {category_id}", line=lineno)
        if mode == "bbox":
            geometry: Geometry = BBoxNorm(cx=coords[0], cy=coords[1], w=coords[2], h=coords[3])
            try:
                geometry.validate(eps=1e-5)  # printed coords can overhang by ~5e-7
            except ValidationError as exc:
                raise ParseError(str(exc), line=lineno)
        else:
            vertices = tuple(zip(coords[0::2], coords[1::2]))
            geometry = PolygonNorm(vertices=vertices)
            try:
                geometry.validate(eps=1e-5)
            except ValidationError as exc:
                raise ParseError(str(exc), line=lineno)
        records.append(LabelRecord(category_id=category_id, geometry=geometry))
    return LabelFile(pair_id=pair_id, records=records)


def read_label_file(path: str | Path, mode: str) -> LabelFile:
    path = Path(path)
    return parse_yolo(path.read_text(), mode, pair_id=path.stem)


def write_label_file(labels: LabelFile, path: str | Path, mode: str) -> None:
    Path(path).write_text(emit_yolo(labels, mode))


RESERVED_JSON = ("timing.json",)


def list_interchange_files(directory: str | Path) -> list[Path]:
    """Interchange JSONs in a directory, skipping sidecars like timing.json."""
    return sorted(
        p for p in Path(directory).glob("*.json") if p.name not in RESERVED_JSON
    )


def read_maskset(path: str | Path) -> MaskSet:
    """Load and validate an interchange JSON file."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path.name}: {exc}")
    for key in ("pair_id", "width", "height", "ontology", "masks"):
        if key not in payload:
            raise ParseError(f"interchange file {path.name} missing key {key!r}")
    width, height = int(payload["width"]), int(payload["height"])
    masks = []
    for i, entry in enumerate(payload["masks"]):
        for key in ("category_id", "rle"):
            if key not in entry:
                raise ParseError(f"mask {i} in {path.name} missing key {key!r}")
        masks.append(
            Mask(
                width_px=width,
                height_px=height,
                runs=[int(r) for r in entry["rle"]],
                category_id=int(entry["category_id"]),
                confidence=float(entry.get("confidence", 1.0)),
            )
        )
    maskset = MaskSet(pair_id=str(payload["pair_id"]), masks=masks,
                      ontology=[str(n) for n in payload["ontology"]])
    maskset.validate()
    return maskset


def write_maskset(
    maskset: MaskSet,
    path: str | Path,
    width: int | None = None,
    height: int | None = None,
) -> None:
    maskset.validate()
    if maskset.masks:
        width = maskset.masks[0].width_px
        height = maskset.masks[0].height_px
        if any(m.width_px != width or m.height_px != height for m in maskset.masks):
            raise ValidationError("all masks in one interchange file must share dimensions")
    elif width is None or height is None:
        raise ValidationError("empty maskset needs explicit width/height")
    payload = {
        "pair_id": maskset.pair_id,
        "width": width,
        "height": height,
        "ontology": maskset.ontology,
        "masks": [
            {"category_id": m.category_id, "confidence": m.confidence, "rle": m.runs}
            for m in maskset.masks
        ],
    }
    Path(path).write_text(json.dumps(payload))
