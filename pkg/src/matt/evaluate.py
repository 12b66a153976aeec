"""Detection evaluation: IoU, greedy matching, AP/mAP, stratified reports.

Average precision uses 101-point interpolation over the rectified
precision-recall curve (running max from the right). Strata are
(band, method, period, elevation) cells; group rows aggregate cell mAPs
with mean +/- standard error (sample standard deviation / sqrt(n)).
Predictions come from files written by an external trainer; nothing here
runs inference.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyStratumError, ParseError
from .ingest import PERIODS
from .maskio import BBoxNorm, LabelFile, LabelRecord

METHODS = ("Manual", "MATT")
NIGHT_PERIODS = ("PreSunrise", "PostSunset")
DAY_PERIODS = ("PostSunrise", "Noon", "PreSunset")


@dataclass(frozen=True)
class Detection:
    pair_id: str
    category_id: int
    bbox: BBoxNorm
    confidence: float


@dataclass(frozen=True)
class Stratum:
    elevation_m: float
    period: str
    band: str
    method: str


def iou_bbox(a: BBoxNorm, b: BBoxNorm) -> float:
    ax0, ay0, ax1, ay1 = a.extents()
    bx0, by0, bx1, by1 = b.extents()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    # areas from the same extents as the intersection so iou(a, a) == 1.0
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[LabelRecord],
    iou_thresh: float,
) -> tuple[list[bool], int]:
    """Greedy TP/FP assignment for one image and category.

    Detections are processed in descending confidence (ties keep input
    order); each takes the highest-IoU unmatched ground truth at or above
    the threshold. Returns flags aligned with the input detections plus
    the count of ground truths left unmatched.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    gt_boxes = [_as_bbox(g) for g in gts]
    taken = [False] * len(gt_boxes)
    flags = [False] * len(dets)
    for i in order:
        best_iou = 0.0
        best_j = -1
        for j, gt_box in enumerate(gt_boxes):
            if taken[j]:
                continue
            value = iou_bbox(dets[i].bbox, gt_box)
            if value >= iou_thresh and value > best_iou:
                best_iou = value
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            flags[i] = True
    return flags, taken.count(False)


def _as_bbox(record: LabelRecord) -> BBoxNorm:
    geom = record.geometry
    return geom if isinstance(geom, BBoxNorm) else geom.bounding_box()


def average_precision(flags: Sequence[bool], total_gt: int) -> float | None:
    """101-point interpolated AP from flags in descending-confidence order.

    total_gt == 0 with no detections is undefined (None, excluded from
    means); with detections it is 0.0.
    """
    if total_gt < 0:
        raise ValueError("total_gt must be >= 0")
    if total_gt == 0:
        return None if len(flags) == 0 else 0.0
    if len(flags) == 0:
        return 0.0
    flag_arr = np.asarray(flags, dtype=np.float64)
    tp = np.cumsum(flag_arr)
    fp = np.cumsum(1.0 - flag_arr)
    recall = tp / total_gt
    precision = tp / (tp + fp)
    rectified = np.maximum.accumulate(precision[::-1])[::-1]
    grid = np.arange(101, dtype=np.float64) / 100.0
    idx = np.searchsorted(recall, grid, side="left")
    sampled = np.where(idx < recall.size, rectified[np.minimum(idx, recall.size - 1)], 0.0)
    return float(sampled.mean())


def map_score(aps: Mapping[int, float | None]) -> float:
    """Unweighted mean over defined category APs."""
    defined = [v for v in aps.values() if v is not None]
    if not defined:
        raise EmptyStratumError("no category has a defined AP")
    return float(sum(defined) / len(defined))


def pooled_category_ap(
    dets_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[LabelRecord]],
    iou_thresh: float,
) -> float | None:
    """AP for one category pooled across a set of images."""
    scored: list[tuple[float, int, bool]] = []
    total_gt = 0
    seq = 0
    for pair_id in sorted(set(dets_by_image) | set(gts_by_image)):
        dets = list(dets_by_image.get(pair_id, ()))
        gts = list(gts_by_image.get(pair_id, ()))
        total_gt += len(gts)
        flags, _ = match_detections(dets, gts, iou_thresh)
        for det, flag in zip(dets, flags):
            scored.append((-det.confidence, seq, flag))
            seq += 1
    scored.sort()
    return average_precision([flag for _, _, flag in scored], total_gt)


@dataclass
class StratumScore:
    band: str
    method: str
    period: str
    elevation_m: float
    ap_per_category: dict[int, float | None]
    map_value: float
    n_images: int
    n_gt: int


@dataclass
class GroupStat:
    mean: float
    se: float
    bar_low: float
    bar_high: float
    n_samples: int
    n_images: int


@dataclass
class EvalReport:
    iou_thresh: float
    cells: list[StratumScore] = field(default_factory=list)
    by_period: dict[tuple[str, str, str], GroupStat] = field(default_factory=dict)
    by_elevation: dict[tuple[str, str, float], GroupStat] = field(default_factory=dict)
    excluded: list[tuple[str, str, str, float]] = field(default_factory=list)


def group_stat(values: Sequence[float], n_images: int = 0) -> GroupStat:
    """Mean with standard-error bars; single samples collapse to the mean."""
    n = len(values)
    if n == 0:
        raise EmptyStratumError("cannot aggregate an empty group")
    mean = float(sum(values) / n)
    if n == 1:
        se = 0.0
    else:
        sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
        se = sd / math.sqrt(n)
    return GroupStat(mean=mean, se=se, bar_low=mean - se, bar_high=mean + se,
                     n_samples=n, n_images=n_images)


def stratified_report(
    dets: Sequence[Detection],
    gts: Mapping[str, LabelFile],
    meta: Mapping[str, Stratum],
    iou_thresh: float = 0.5,
    categories: Iterable[int] | None = None,
) -> EvalReport:
    """mAP per stratum cell plus grouped mean/SE rows.

    Every image must appear in `meta`. Cells with zero ground truth across
    all categories are flagged and excluded from groups.
    """
    missing = [p for p in gts if p not in meta]
    if missing:
        raise ParseError(f"images without stratum metadata: {', '.join(sorted(missing)[:5])}")
    if categories is None:
        cats = sorted(
            {d.category_id for d in dets}
            | {r.category_id for lf in gts.values() for r in lf.records}
        )
    else:
        cats = sorted(set(categories))

    cell_images: dict[tuple[str, str, str, float], list[str]] = {}
    for pair_id in gts:
        stratum = meta[pair_id]
        key = (stratum.band, stratum.method, stratum.period, stratum.elevation_m)
        cell_images.setdefault(key, []).append(pair_id)
    dets_by_image: dict[str, list[Detection]] = {}
    for det in dets:
        dets_by_image.setdefault(det.pair_id, []).append(det)

    report = EvalReport(iou_thresh=iou_thresh)
    for key in sorted(cell_images):
        band, method, period, elevation = key
        images = cell_images[key]
        n_gt = sum(len(gts[p].records) for p in images)
        if n_gt == 0:
            report.excluded.append(key)
            continue
        aps: dict[int, float | None] = {}
        for cat in cats:
            cat_dets = {
                p: [d for d in dets_by_image.get(p, []) if d.category_id == cat]
                for p in images
            }
            cat_gts = {
                p: [r for r in gts[p].records if r.category_id == cat] for p in images
            }
            aps[cat] = pooled_category_ap(cat_dets, cat_gts, iou_thresh)
        report.cells.append(
            StratumScore(
                band=band, method=method, period=period, elevation_m=elevation,
                ap_per_category=aps, map_value=map_score(aps),
                n_images=len(images), n_gt=n_gt,
            )
        )

    by_period: dict[tuple[str, str, str], list[StratumScore]] = {}
    by_elev: dict[tuple[str, str, float], list[StratumScore]] = {}
    for cell in report.cells:
        by_period.setdefault((cell.band, cell.method, cell.period), []).append(cell)
        by_elev.setdefault((cell.band, cell.method, cell.elevation_m), []).append(cell)
    for key2, cells in sorted(by_period.items()):
        report.by_period[key2] = group_stat(
            [c.map_value for c in cells], n_images=sum(c.n_images for c in cells)
        )
    for key3, cells in sorted(by_elev.items()):
        report.by_elevation[key3] = group_stat(
            [c.map_value for c in cells], n_images=sum(c.n_images for c in cells)
        )
    return report


def map_sweep(
    dets: Sequence[Detection],
    gts: Mapping[str, LabelFile],
    categories: Iterable[int] | None = None,
    thresholds: Sequence[float] = tuple(np.arange(50, 100, 5) / 100.0),
) -> dict:
    """Overall mAP at each IoU threshold plus their mean (the .50:.95 style)."""
    if categories is None:
        cats = sorted(
            {d.category_id for d in dets}
            | {r.category_id for lf in gts.values() for r in lf.records}
        )
    else:
        cats = sorted(set(categories))
    dets_by_image: dict[str, list[Detection]] = {}
    for det in dets:
        dets_by_image.setdefault(det.pair_id, []).append(det)
    per_threshold = {}
    for thresh in thresholds:
        aps: dict[int, float | None] = {}
        for cat in cats:
            cat_dets = {
                p: [d for d in dets_by_image.get(p, []) if d.category_id == cat]
                for p in gts
            }
            cat_gts = {p: [r for r in gts[p].records if r.category_id == cat] for p in gts}
            aps[cat] = pooled_category_ap(cat_dets, cat_gts, thresh)
        per_threshold[round(thresh, 2)] = map_score(aps)
    return {
        "per_threshold": per_threshold,
        "mean": float(sum(per_threshold.values()) / len(per_threshold)),
    }


@dataclass
class DayNightSummary:
    day: dict[tuple[str, str], float] = field(default_factory=dict)
    night: dict[tuple[str, str], float] = field(default_factory=dict)
    delta_day: dict[str, float] = field(default_factory=dict)
    delta_night: dict[str, float] = field(default_factory=dict)
    partial: bool = False


def aggregate_daynight(report: EvalReport) -> DayNightSummary:
    """Collapse period groups into daytime/nighttime means per band+method.

    Delta rows are manual mean minus MATT mean (positive = manual wins).
    """
    summary = DayNightSummary()
    combos = {(band, method) for band, method, _ in report.by_period}
    for band, method in sorted(combos):
        present = {
            period: report.by_period[(band, method, period)].mean
            for period in PERIODS
            if (band, method, period) in report.by_period
        }
        missing = [p for p in PERIODS if p not in present]
        if missing:
            summary.partial = True
            warnings.warn(
                f"partial day/night aggregate for {band}/{method}: missing {missing}",
                stacklevel=2,
            )
        night_vals = [present[p] for p in NIGHT_PERIODS if p in present]
        day_vals = [present[p] for p in DAY_PERIODS if p in present]
        if night_vals:
            summary.night[(band, method)] = float(sum(night_vals) / len(night_vals))
        if day_vals:
            summary.day[(band, method)] = float(sum(day_vals) / len(day_vals))
    for band in sorted({band for band, _ in combos}):
        for bucket, delta in ((summary.day, summary.delta_day), (summary.night, summary.delta_night)):
            manual = bucket.get((band, "Manual"))
            matt = bucket.get((band, "MATT"))
            if manual is not None and matt is not None:
                delta[band] = manual - matt
    return summary


def load_predictions(pred_dir: str | Path) -> list[Detection]:
    """Read per-image prediction files: `<cat> <cx> <cy> <w> <h> <conf>`."""
    dets: list[Detection] = []
    for path in sorted(Path(pred_dir).glob("*.txt")):
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ParseError(
                    f"{path.name}: expected 6 fields, got {len(fields)}", line=lineno
                )
            try:
                cat = int(fields[0])
                values = [float(t) for t in fields[1:]]
            except ValueError as exc:
                raise ParseError(f"{path.name}: {exc}", line=lineno)
            bbox = BBoxNorm(cx=values[0], cy=values[1], w=values[2], h=values[3])
            bbox.validate(eps=1e-5)
            if not 0.0 <= values[4] <= 1.0:
                raise ParseError(f"{path.name}: confidence {values[4]} outside [0, 1]",
                                 line=lineno)
            dets.append(Detection(pair_id=path.stem, category_id=cat,
                                  bbox=bbox, confidence=values[4]))
    return dets


def load_strata(
    path: str | Path,
    default_band: str | None = None,
    default_method: str | None = None,
) -> dict[str, Stratum]:
    """JSON map pair_id -> {elevation_m, period, band?, method?}."""
    payload = json.loads(Path(path).read_text())
    strata = {}
    for pair_id, fields in payload.items():
        band = fields.get("band", default_band)
        method = fields.get("method", default_method)
        if band is None or method is None:
            raise ParseError(f"stratum for {pair_id!r} is missing band/method")
        period = str(fields["period"])
        canonical = {p.lower(): p for p in PERIODS}.get(period.lower())
        if canonical is None:
            raise ParseError(f"unknown period {period!r} for {pair_id!r}")
        strata[pair_id] = Stratum(
            elevation_m=float(fields["elevation_m"]),
            period=canonical,
            band=str(band),
            method=str(method),
        )
    return strata


def report_to_json(report: EvalReport) -> dict:
    return {
        "iou_thresh": report.iou_thresh,
        "cells": [
            {
                "band": c.band, "method": c.method, "period": c.period,
                "elevation_m": c.elevation_m,
                "ap_per_category": {str(k): v for k, v in c.ap_per_category.items()},
                "map": c.map_value, "n_images": c.n_images, "n_gt": c.n_gt,
            }
            for c in report.cells
        ],
        "by_period": {
            "|".join((b, m, p)): vars(stat) for (b, m, p), stat in report.by_period.items()
        },
        "by_elevation": {
            f"{b}|{m}|{e:g}": vars(stat) for (b, m, e), stat in report.by_elevation.items()
        },
        "excluded": [list(key) for key in report.excluded],
    }


def render_table(report: EvalReport) -> str:
    """Plain-text table of the period and elevation group rows."""
    lines = [f"mAP@{report.iou_thresh:g}  (mean +/- SE over strata)"]
    lines.append("")
    lines.append(f"{'band':<8} {'method':<8} {'period':<12} {'mAP':>7} {'SE':>7} {'n':>4}")
    for (band, method, period), stat in report.by_period.items():
        lines.append(
            f"{band:<8} {method:<8} {period:<12} {stat.mean:>7.3f} {stat.se:>7.3f} {stat.n_images:>4}"
        )
    lines.append("")
    lines.append(f"{'band':<8} {'method':<8} {'elev_m':<12} {'mAP':>7} {'SE':>7} {'n':>4}")
    for (band, method, elevation), stat in report.by_elevation.items():
        lines.append(
            f"{band:<8} {method:<8} {elevation:<12g} {stat.mean:>7.3f} {stat.se:>7.3f} {stat.n_images:>4}"
        )
    return "\n".join(lines) + "\n"


def render_csv(report: EvalReport) -> str:
    rows = ["group,band,method,key,mean,se,bar_low,bar_high,n_samples,n_images"]
    for (band, method, period), s in report.by_period.items():
        rows.append(f"period,{band},{method},{period},{s.mean},{s.se},{s.bar_low},{s.bar_high},{s.n_samples},{s.n_images}")
    for (band, method, elevation), s in report.by_elevation.items():
        rows.append(f"elevation,{band},{method},{elevation},{s.mean},{s.se},{s.bar_low},{s.bar_high},{s.n_samples},{s.n_images}")
    return "\n".join(rows) + "\n"
