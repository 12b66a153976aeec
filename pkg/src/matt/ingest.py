"""Frame extraction planning, band pairing, and capture metadata.

Frames land on disk as zero-padded 6-digit stems so pairing across band
directories is a plain lexicographic match on the shared file name.
Video decoding is delegated to an external decoder (ffmpeg by default,
override with MATT_FFMPEG); pre-extracted frame directories are accepted
as an alternative input.
"""

from __future__ import annotations

import json
import math
import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import InvalidParameterError, PairingError, ParseError, StageError, ValidationError
from .imageio import list_images

BANDS = ("rgb", "lwir", "fused")
PERIODS = ("PreSunrise", "PostSunrise", "Noon", "PreSunset", "PostSunset")
_PERIOD_TOKENS = {p.lower(): p for p in PERIODS}
_SENSOR_BANDS = ("RGB", "LWIR", "RGB_LWIR")


@dataclass(frozen=True)
class SensorProfile:
    name: str
    width_px: int
    height_px: int
    fov_deg: float
    band: str

    def validate(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValidationError("sensor dimensions must be positive")
        if not 0.0 < self.fov_deg < 360.0:
            raise ValidationError(f"fov_deg {self.fov_deg} outside (0, 360)")
        if self.band not in _SENSOR_BANDS:
            raise ValidationError(f"unknown sensor band {self.band!r}")


@dataclass(frozen=True)
class CaptureMeta:
    site: str
    elevation_m: float
    period: str
    frame_index: int

    def validate(self) -> None:
        if self.elevation_m < 0:
            raise ValidationError(f"elevation {self.elevation_m} must be >= 0")
        if self.period not in PERIODS:
            raise ValidationError(f"unknown period {self.period!r}")
        if self.frame_index < 0:
            raise ValidationError("frame_index must be >= 0")


@dataclass
class FramePair:
    """Co-aligned image references sharing one filename stem."""

    pair_id: str
    images: dict[str, Path]
    meta: CaptureMeta | None = None

    def validate(self) -> None:
        if "rgb" not in self.images:
            raise ValidationError(f"pair {self.pair_id} is missing the RGB band")


@dataclass(frozen=True)
class UnpairedEntry:
    pair_id: str
    missing_bands: tuple[str, ...]


def plan_fstride(frame_count: int, fstride: int) -> list[int]:
    """Indices kept when sampling every fstride-th frame, starting at 0."""
    if fstride < 1:
        raise InvalidParameterError(f"fstride must be >= 1, got {fstride}")
    if frame_count < 0:
        raise InvalidParameterError(f"frame_count must be >= 0, got {frame_count}")
    return list(range(0, frame_count, fstride))


def _decoder_executable(decoder: str | None) -> str:
    return decoder or os.environ.get("MATT_FFMPEG", "ffmpeg")


def extract_frames(
    video_ref: str | Path,
    fstride: int,
    out_dir: str | Path,
    decoder: str | None = None,
    extension: str = "png",
) -> int:
    """Decode every fstride-th frame of a video to numbered image files.

    Output files are named by original frame index ({idx:06d}.{ext}) so
    streams extracted with the same stride pair up by file name.
    """
    if fstride < 1:
        raise InvalidParameterError(f"fstride must be >= 1, got {fstride}")
    video_ref = Path(video_ref)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    executable = _decoder_executable(decoder)

    with tempfile.TemporaryDirectory(prefix="matt-extract-") as tmp:
        pattern = str(Path(tmp) / f"%06d.{extension}")
        cmd = [
            executable,
            "-v", "error",
            "-i", str(video_ref),
            "-vf", f"select=not(mod(n\\,{fstride}))",
            "-vsync", "0",
            pattern,
        ]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True)
        except FileNotFoundError:
            raise StageError("extract", f"external decoder not found ({executable})")
        if proc.returncode != 0:
            detail = proc.stderr.strip().splitlines()
            tail = detail[-1] if detail else f"exit code {proc.returncode}"
            raise StageError("extract", f"{executable} failed: {tail}")
        written = 0
        for seq, produced in enumerate(sorted(Path(tmp).iterdir())):
            frame_index = seq * fstride
            shutil.move(str(produced), out_dir / f"{frame_index:06d}{produced.suffix}")
            written += 1
    return written


def extract_frames_from_dir(
    frames_dir: str | Path,
    fstride: int,
    out_dir: str | Path,
) -> int:
    """Apply the stride plan to a directory of pre-extracted frames."""
    files = list_images(frames_dir)
    indices = plan_fstride(len(files), fstride)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for idx in indices:
        src = files[idx]
        shutil.copyfile(src, out_dir / f"{idx:06d}{src.suffix.lower()}")
    return len(indices)


def pair_frames(
    band_dirs: Mapping[str, str | Path],
    meta_overrides: Mapping[str, CaptureMeta] | None = None,
) -> tuple[list[FramePair], list[UnpairedEntry]]:
    """Pair frames across band directories by shared filename stem.

    Returns complete pairs (every requested band present) plus an
    unpaired report for RGB stems with missing counterparts. Metadata is
    parsed from the stem convention when possible, otherwise taken from
    the override map, otherwise left unset.
    """
    if "rgb" not in band_dirs:
        raise PairingError("an 'rgb' band directory is required")
    listings = {band: {p.stem: p for p in list_images(path)} for band, path in band_dirs.items()}
    if not listings["rgb"]:
        raise PairingError(f"RGB directory {band_dirs['rgb']} contains no images")
    overrides = dict(meta_overrides or {})

    pairs: list[FramePair] = []
    unpaired: list[UnpairedEntry] = []
    for stem in sorted(listings["rgb"]):
        images = {"rgb": listings["rgb"][stem]}
        missing = []
        for band, files in listings.items():
            if band == "rgb":
                continue
            if stem in files:
                images[band] = files[stem]
            else:
                missing.append(band)
        if missing:
            unpaired.append(UnpairedEntry(pair_id=stem, missing_bands=tuple(sorted(missing))))
            continue
        meta = overrides.get(stem)
        if meta is None:
            try:
                meta = parse_capture_meta(stem)
            except ParseError:
                meta = None
        pairs.append(FramePair(pair_id=stem, images=images, meta=meta))
    return pairs, unpaired


_STEM_RE = re.compile(
    r"^(?P<site>.+)_(?P<elev>\d+(?:\.\d+)?)m_(?P<period>[a-z]+)_(?P<frame>\d+)$"
)


def parse_capture_meta(filename_stem: str) -> CaptureMeta:
    """Parse the `{site}_{elev}m_{period}_{frame}` stem convention."""
    match = _STEM_RE.match(filename_stem)
    if not match:
        raise ParseError(
            f"stem {filename_stem!r} does not match '{{site}}_{{elev}}m_{{period}}_{{frame}}'",
            token=filename_stem,
        )
    period_token = match.group("period")
    period = _PERIOD_TOKENS.get(period_token)
    if period is None:
        raise ParseError(f"unknown period token {period_token!r}", token=period_token)
    meta = CaptureMeta(
        site=match.group("site"),
        elevation_m=float(match.group("elev")),
        period=period,
        frame_index=int(match.group("frame")),
    )
    meta.validate()
    return meta


def format_capture_meta(meta: CaptureMeta) -> str:
    """Inverse of parse_capture_meta for valid metadata."""
    meta.validate()
    elev = meta.elevation_m
    elev_str = str(int(elev)) if float(elev).is_integer() else repr(float(elev))
    return f"{meta.site}_{elev_str}m_{meta.period.lower()}_{meta.frame_index:06d}"


def load_meta_overrides(path: str | Path) -> dict[str, CaptureMeta]:
    """JSON map from filename stem to CaptureMeta fields."""
    payload = json.loads(Path(path).read_text())
    overrides = {}
    for stem, fields in payload.items():
        period = str(fields["period"])
        canonical = _PERIOD_TOKENS.get(period.lower())
        if canonical is None:
            raise ParseError(f"unknown period {period!r} for stem {stem!r}", token=period)
        meta = CaptureMeta(
            site=str(fields.get("site", "")),
            elevation_m=float(fields["elevation_m"]),
            period=canonical,
            frame_index=int(fields.get("frame_index", 0)),
        )
        meta.validate()
        overrides[stem] = meta
    return overrides


def expected_index_count(frame_count: int, fstride: int) -> int:
    """ceil(frame_count / fstride); kept next to plan_fstride for clarity."""
    return math.ceil(frame_count / fstride)
