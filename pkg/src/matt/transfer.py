"""Label transfer between co-aligned sensor frames.

Because label geometry is normalized, co-registered frames of any
resolution share labels unchanged; an optional 6-coefficient affine
calibration corrects residual misalignment in pixel space. Calibrations
can be fit from point correspondences by least squares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InsufficientDataError,
    InvalidCalibrationError,
    InvalidParameterError,
    OrphanMaskError,
    ParseError,
)
from .ingest import FramePair, SensorProfile
from .maskio import (
    BBoxNorm,
    LabelFile,
    LabelRecord,
    MaskSet,
    PolygonNorm,
    masks_to_labelfile,
)


@dataclass(frozen=True)
class AffineCal:
    """Pixel-space map (x, y) -> (a*x + b*y + c, d*x + e*y + f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    def validate(self) -> None:
        if self.determinant() == 0.0:
            raise InvalidCalibrationError("affine calibration is not invertible (det = 0)")

    def inverse(self) -> "AffineCal":
        det = self.determinant()
        if det == 0.0:
            raise InvalidCalibrationError("affine calibration is not invertible (det = 0)")
        ia, ib = self.e / det, -self.b / det
        id_, ie = -self.d / det, self.a / det
        return AffineCal(
            a=ia, b=ib, c=-(ia * self.c + ib * self.f),
            d=id_, e=ie, f=-(id_ * self.c + ie * self.f),
        )

    @classmethod
    def identity(cls) -> "AffineCal":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class Correspondence:
    """A matched pixel location in the source and target frames."""

    src: tuple[float, float]
    dst: tuple[float, float]


@dataclass
class TransferStats:
    """Drop accounting for a transfer run; merged associatively."""

    transferred: int = 0
    dropped: int = 0

    def merge(self, other: "TransferStats") -> None:
        self.transferred += other.transferred
        self.dropped += other.dropped


def apply_affine(cal: AffineCal, point: tuple[float, float]) -> tuple[float, float]:
    x, y = point
    return (cal.a * x + cal.b * y + cal.c, cal.d * x + cal.e * y + cal.f)


def fit_affine(points: Sequence[Correspondence]) -> AffineCal:
    """Least-squares affine fit; exact for noiseless affine-generated points."""
    if len(points) < 3:
        raise InsufficientDataError(f"need >= 3 correspondences, got {len(points)}")
    design = np.array([[p.src[0], p.src[1], 1.0] for p in points], dtype=np.float64)
    if np.linalg.matrix_rank(design) < 3:
        raise DegenerateGeometryError("source points are collinear or coincident")
    targets = np.array([[p.dst[0], p.dst[1]] for p in points], dtype=np.float64)
    solution, _, _, _ = np.linalg.lstsq(design, targets, rcond=None)
    (a, d), (b, e), (c, f) = solution
    return AffineCal(a=float(a), b=float(b), c=float(c), d=float(d), e=float(e), f=float(f))


def _clip01(v: float) -> float:
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)


def _map_vertex(
    vertex: tuple[float, float],
    cal: AffineCal,
    src_w: float,
    src_h: float,
    dst_w: float,
    dst_h: float,
) -> tuple[float, float]:
    px, py = vertex[0] * src_w, vertex[1] * src_h
    qx, qy = apply_affine(cal, (px, py))
    return qx / dst_w, qy / dst_h


def _transfer_record(
    record: LabelRecord,
    cal: AffineCal,
    src_w: float,
    src_h: float,
    dst_w: float,
    dst_h: float,
) -> LabelRecord | None:
    geom = record.geometry
    if isinstance(geom, BBoxNorm):
        x0, y0, x1, y1 = geom.extents()
        corners = [
            _map_vertex(v, cal, src_w, src_h, dst_w, dst_h)
            for v in ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
        ]
        xs = [_clip01(p[0]) for p in corners]
        ys = [_clip01(p[1]) for p in corners]
        w, h = max(xs) - min(xs), max(ys) - min(ys)
        if w <= 0.0 or h <= 0.0:
            return None
        box = BBoxNorm(cx=(min(xs) + max(xs)) / 2, cy=(min(ys) + max(ys)) / 2, w=w, h=h)
        return LabelRecord(category_id=record.category_id, geometry=box)

    mapped = [
        _map_vertex(v, cal, src_w, src_h, dst_w, dst_h) for v in geom.vertices
    ]
    clipped = [(_clip01(x), _clip01(y)) for x, y in mapped]
    # clamping can fuse neighbours; collapse consecutive duplicates
    deduped: list[tuple[float, float]] = []
    for vertex in clipped:
        if not deduped or vertex != deduped[-1]:
            deduped.append(vertex)
    if len(deduped) > 1 and deduped[0] == deduped[-1]:
        deduped.pop()
    if len(deduped) < 3:
        return None
    polygon = PolygonNorm(vertices=tuple(deduped))
    if polygon.area() == 0.0:
        return None
    return LabelRecord(category_id=record.category_id, geometry=polygon)


def transfer_labels(
    labels: LabelFile,
    src: SensorProfile,
    dst: SensorProfile,
    cal: AffineCal | None = None,
    stats: TransferStats | None = None,
) -> LabelFile:
    """Map labels from the source frame onto the target frame.

    Without a calibration this is the identity: normalized coordinates are
    resolution-invariant across co-registered frames. With one, every
    vertex is denormalized to source pixels, mapped, renormalized by the
    target dimensions, and clipped to [0, 1]; records whose clipped
    geometry degenerates are dropped (and counted in `stats`).
    """
    if cal is None:
        if stats is not None:
            stats.transferred += len(labels.records)
        return LabelFile(pair_id=labels.pair_id, records=list(labels.records))
    cal.validate()
    out: list[LabelRecord] = []
    dropped = 0
    for record in labels.records:
        mapped = _transfer_record(
            record, cal,
            float(src.width_px), float(src.height_px),
            float(dst.width_px), float(dst.height_px),
        )
        if mapped is None:
            dropped += 1
        else:
            out.append(mapped)
    if stats is not None:
        stats.transferred += len(out)
        stats.dropped += dropped
    return LabelFile(pair_id=labels.pair_id, records=out)


@dataclass
class TransferBatchResult:
    by_band: dict[str, list[LabelFile]] = field(default_factory=dict)
    stats: TransferStats = field(default_factory=TransferStats)


def transfer_batch(
    pairs: Sequence[FramePair],
    masksets: Sequence[MaskSet],
    mode: str = "bbox",
    cals: Mapping[str, AffineCal] | None = None,
    profiles: Mapping[str, SensorProfile] | None = None,
    simplify_eps_px: float = 1.0,
) -> TransferBatchResult:
    """Convert masks to labels and fan them out to every band of each pair.

    The RGB band receives the untransformed labels; other bands receive
    transfer_labels output (identity unless that band has a calibration).
    """
    pair_index = {p.pair_id: p for p in pairs}
    orphans = [m.pair_id for m in masksets if m.pair_id not in pair_index]
    if orphans:
        raise OrphanMaskError(orphans)
    cals = dict(cals or {})
    profiles = dict(profiles or {})
    result = TransferBatchResult()
    for maskset in masksets:
        pair = pair_index[maskset.pair_id]
        labels = masks_to_labelfile(maskset, mode=mode, simplify_eps_px=simplify_eps_px)
        src = profiles.get("rgb") or _profile_from_maskset(maskset)
        for band in pair.images:
            if band == "rgb":
                band_labels = LabelFile(pair_id=labels.pair_id, records=list(labels.records))
                result.stats.transferred += len(band_labels.records)
            else:
                dst = profiles.get(band, src)
                band_labels = transfer_labels(
                    labels, src, dst, cals.get(band), stats=result.stats
                )
            result.by_band.setdefault(band, []).append(band_labels)
    return result


def _profile_from_maskset(maskset: MaskSet) -> SensorProfile:
    if maskset.masks:
        width, height = maskset.masks[0].width_px, maskset.masks[0].height_px
    else:
        width = height = 1
    return SensorProfile(name="rgb", width_px=width, height_px=height, fov_deg=90.0, band="RGB")


def load_calibration(path: str | Path) -> AffineCal:
    """Read a calibration file: explicit coefficients or correspondences."""
    payload = json.loads(Path(path).read_text())
    if "coefficients" in payload:
        coeffs = payload["coefficients"]
        if len(coeffs) != 6:
            raise ParseError(f"expected 6 coefficients, got {len(coeffs)}")
        cal = AffineCal(*(float(v) for v in coeffs))
        cal.validate()
        return cal
    if "correspondences" in payload:
        points = [
            Correspondence(src=(float(p["src"][0]), float(p["src"][1])),
                           dst=(float(p["dst"][0]), float(p["dst"][1])))
            for p in payload["correspondences"]
        ]
        return fit_affine(points)
    raise ParseError("calibration file needs 'coefficients' or 'correspondences'")


def save_calibration(cal: AffineCal, path: str | Path,
                     src_band: str = "rgb", dst_band: str = "lwir") -> None:
    payload = {
        "src_band": src_band,
        "dst_band": dst_band,
        "coefficients": [cal.a, cal.b, cal.c, cal.d, cal.e, cal.f],
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def parse_mode(mode: str) -> str:
    if mode not in ("bbox", "polygon"):
        raise InvalidParameterError(f"mode must be bbox or polygon, got {mode!r}")
    return mode
