"""Stage timing and the manual-vs-automated labeling time report.

Wall time comes from the monotonic clock and is reported to
milliseconds. The manual estimate is linear (images x seconds/image);
human breaks are excluded, with an optional working-day projection at 6
productive hours per day.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import InvalidParameterError, ParseError

DEFAULT_SEC_PER_IMAGE = 30.0
PRODUCTIVE_HOURS_PER_DAY = 6.0


@dataclass
class StageTiming:
    stage: str
    wall_seconds: float = 0.0
    items: int = 0

    def validate(self) -> None:
        if self.wall_seconds < 0:
            raise InvalidParameterError("wall_seconds must be >= 0")
        if self.items < 0:
            raise InvalidParameterError("items must be >= 0")


def estimate_manual(n_images: int, sec_per_image: float = DEFAULT_SEC_PER_IMAGE) -> float:
    """Hours to hand-label n_images at a fixed seconds-per-image rate."""
    if n_images < 0:
        raise InvalidParameterError(f"n_images must be >= 0, got {n_images}")
    if sec_per_image <= 0:
        raise InvalidParameterError(f"sec_per_image must be > 0, got {sec_per_image}")
    return n_images * sec_per_image / 3600.0


def report_reduction(manual_hours: float, matt_hours: float) -> float:
    """Percentage of manual labeling time saved by the automated run."""
    if manual_hours <= 0:
        raise InvalidParameterError(f"manual_hours must be > 0, got {manual_hours}")
    return 100.0 * (manual_hours - matt_hours) / manual_hours


@contextmanager
def time_stage(stage: str, items: int = 0) -> Iterator[StageTiming]:
    """Record wall time for a block; on error the partial timing is kept.

    The yielded StageTiming is finalized on exit; callers may update
    .items inside the block once the true count is known.
    """
    timing = StageTiming(stage=stage, items=items)
    start = time.monotonic()
    try:
        yield timing
    finally:
        timing.wall_seconds = round(time.monotonic() - start, 3)


@dataclass
class TimingReport:
    stages: list[StageTiming] = field(default_factory=list)
    manual_estimate_hours: float = 0.0
    matt_total_hours: float = 0.0
    reduction_pct: float = 0.0


def build_report(
    stages: list[StageTiming],
    n_images: int,
    sec_per_image: float = DEFAULT_SEC_PER_IMAGE,
    extra_hours: float = 0.0,
) -> TimingReport:
    """Combine measured stage timings with the manual-labeling estimate.

    extra_hours folds in time spent outside measured stages (e.g. a human
    verification pass measured by the review server).
    """
    for stage in stages:
        stage.validate()
    manual = estimate_manual(n_images, sec_per_image)
    matt_total = sum(s.wall_seconds for s in stages) / 3600.0 + extra_hours
    reduction = report_reduction(manual, matt_total) if manual > 0 else 0.0
    return TimingReport(
        stages=list(stages),
        manual_estimate_hours=manual,
        matt_total_hours=matt_total,
        reduction_pct=reduction,
    )


def render_table(report: TimingReport, working_day_projection: bool = True) -> str:
    """Text table comparing automated stage times with the manual estimate."""
    lines = [f"{'Task':<28} {'Time (hours)':>12}"]
    for stage in report.stages:
        hours = stage.wall_seconds / 3600.0
        label = f"MATT {stage.stage}"
        if stage.items:
            label += f" ({stage.items} items)"
        lines.append(f"{label:<28} {hours:>12.4f}")
    lines.append(f"{'MATT total':<28} {report.matt_total_hours:>12.4f}")
    lines.append(f"{'Manual labeling':<28} {report.manual_estimate_hours:>12.4f}")
    lines.append(f"{'Reduction':<28} {report.reduction_pct:>11.1f}%")
    if working_day_projection and report.manual_estimate_hours > 0:
        days = report.manual_estimate_hours / PRODUCTIVE_HOURS_PER_DAY
        lines.append(
            f"(manual projection at {PRODUCTIVE_HOURS_PER_DAY:g} productive h/day: {days:.1f} days)"
        )
    return "\n".join(lines) + "\n"


def report_to_json(report: TimingReport) -> dict:
    return {
        "stages": [vars(s) for s in report.stages],
        "manual_estimate_hours": report.manual_estimate_hours,
        "matt_total_hours": report.matt_total_hours,
        "reduction_pct": report.reduction_pct,
    }


def write_report(report: TimingReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_json(report), indent=2))


def read_sidecar(path: str | Path) -> StageTiming:
    """Parse a timing sidecar emitted by an external stage (e.g. matt-sam)."""
    payload = json.loads(Path(path).read_text())
    for key in ("stage", "wall_seconds"):
        if key not in payload:
            raise ParseError(f"timing sidecar missing key {key!r}")
    timing = StageTiming(
        stage=str(payload["stage"]),
        wall_seconds=float(payload["wall_seconds"]),
        items=int(payload.get("items", 0)),
    )
    timing.validate()
    return timing


def read_report(path: str | Path) -> TimingReport:
    payload = json.loads(Path(path).read_text())
    stages = [
        StageTiming(stage=str(s["stage"]), wall_seconds=float(s["wall_seconds"]),
                    items=int(s.get("items", 0)))
        for s in payload.get("stages", [])
    ]
    return TimingReport(
        stages=stages,
        manual_estimate_hours=float(payload.get("manual_estimate_hours", 0.0)),
        matt_total_hours=float(payload.get("matt_total_hours", 0.0)),
        reduction_pct=float(payload.get("reduction_pct", 0.0)),
    )
