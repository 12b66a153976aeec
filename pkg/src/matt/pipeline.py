"""Dataset assembly and the staged pipeline runner.

run_pipeline executes the configured stages in order, each wrapped in a
wall-clock timer, and emits a deterministic run manifest (counts, drops,
warnings; no timestamps) plus a separate timing report. A stage failure
halts the run with prior stages' artifacts intact on disk.
"""

from __future__ import annotations

import json
import os
import random
import shutil
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from . import __version__, imgproc, maskio, timing
from .config import config_hash
from .errors import ConfigError, MattError, StageError, ValidationError
from .imageio import list_images, read_image, write_image
from .ingest import (
    FramePair,
    extract_frames,
    extract_frames_from_dir,
    load_meta_overrides,
    pair_frames,
)
from .review.store import LOG_NAME, ReviewStore
from .transfer import load_calibration, transfer_batch

RUN_STAGES = ("extract", "pair", "ingest-masks", "transfer", "augment", "assemble", "train")


def worker_count() -> int:
    value = os.environ.get("MATT_WORKERS", "1")
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError(f"MATT_WORKERS must be an integer, got {value!r}")
    return max(1, workers)


def _map_ordered(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class DatasetManifest:
    ontology: list[str]
    splits: dict[str, dict[str, list[str]]]  # split -> band -> file names
    training_config: dict[str, Any]
    provenance: dict[str, str]

    def validate(self) -> None:
        seen: set[str] = set()
        for split, bands in self.splits.items():
            names = set()
            for listed in bands.values():
                names.update(listed)
            overlap = seen & names
            if overlap:
                raise ValidationError(f"split {split!r} reuses items: {sorted(overlap)[:5]}")
            seen |= names

    def to_json(self) -> dict:
        return {
            "ontology": self.ontology,
            "splits": self.splits,
            "training_config": self.training_config,
            "provenance": self.provenance,
        }


def split_counts(n: int, ratios: Sequence[float]) -> list[int]:
    """Floor each ratio share, then hand remainders to the largest fractions."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"split ratios must sum to 1, got {sum(ratios)}")
    if any(r < 0 for r in ratios):
        raise ValidationError("split ratios must be >= 0")
    exact = [n * r for r in ratios]
    counts = [int(e) for e in exact]
    remainder = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: exact[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def assemble(
    dataset_dir: str | Path,
    out_dir: str | Path,
    ratios: Sequence[float],
    ontology: Sequence[str],
    split_names: Sequence[str] = ("train", "val"),
    seed: int = 0,
    mode: str = "bbox",
    training_config: dict | None = None,
    provenance: dict | None = None,
) -> DatasetManifest:
    """Write the YOLO directory layout + data files from a transfer dataset.

    Honors the review log when present: rejected pairs are excluded and
    edited labels replace the originals. The split is deterministic for a
    given seed.
    """
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    if len(ratios) != len(split_names):
        raise ValidationError(
            f"{len(ratios)} ratios for {len(split_names)} split names"
        )
    images_root = dataset_dir / "images"
    if not images_root.is_dir():
        raise ValidationError(f"dataset has no images/ directory: {dataset_dir}")
    bands = sorted(d.name for d in images_root.iterdir() if d.is_dir())
    if not bands:
        raise ValidationError("dataset has no band directories")

    store: ReviewStore | None = None
    if (dataset_dir / LOG_NAME).exists():
        store = ReviewStore(dataset_dir, label_mode=mode)
    rejected = store.rejected_ids() if store else set()

    names_per_band = {band: {p.stem: p for p in list_images(images_root / band)} for band in bands}
    names = sorted(set.intersection(*(set(m) for m in names_per_band.values())) - rejected)
    missing_labels = [
        f"{band}/{name}"
        for band in bands
        for name in names
        if not (dataset_dir / "labels" / band / f"{name}.txt").exists()
        and not (store and name in _edited_names(store, band))
    ]
    if missing_labels:
        raise ValidationError(f"images without label files: {missing_labels[:8]}")

    rng = random.Random(seed)
    shuffled = list(names)
    rng.shuffle(shuffled)
    counts = split_counts(len(shuffled), ratios)
    manifest_splits: dict[str, dict[str, list[str]]] = {}
    cursor = 0
    for split, count in zip(split_names, counts):
        chunk = sorted(shuffled[cursor:cursor + count])
        cursor += count
        manifest_splits[split] = {}
        for band in bands:
            manifest_splits[split][band] = [f"{name}.png" for name in chunk]
            img_out = out_dir / band / "images" / split
            lbl_out = out_dir / band / "labels" / split
            img_out.mkdir(parents=True, exist_ok=True)
            lbl_out.mkdir(parents=True, exist_ok=True)
            for name in chunk:
                src_img = names_per_band[band][name]
                shutil.copyfile(src_img, img_out / f"{name}{src_img.suffix.lower()}")
                labels = _current_labels(dataset_dir, store, band, name, mode)
                maskio.write_label_file(labels, lbl_out / f"{name}.txt", mode)

    for band in bands:
        data_lines = [f"path: {band}", "names:"]
        data_lines += [f"  {i}: {name}" for i, name in enumerate(ontology)]
        for split in split_names:
            data_lines.append(f"{split}: images/{split}")
        (out_dir / band / "data.yaml").write_text("\n".join(data_lines) + "\n")

    manifest = DatasetManifest(
        ontology=list(ontology),
        splits=manifest_splits,
        training_config=training_config or {"epochs": 200, "model_tag": "yolov8s", "image_size": 640},
        provenance=provenance or {"tool_version": __version__, "config_hash": ""},
    )
    manifest.validate()
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n"
    )
    return manifest


def _edited_names(store: ReviewStore, band: str) -> set[str]:
    edited = set()
    for pair_id in store.pair_ids():
        entry = store.entry(pair_id)
        if entry.decision and entry.decision.action == "Edit" and entry.decision.band == band:
            edited.add(pair_id)
    return edited


def _current_labels(dataset_dir: Path, store: ReviewStore | None, band: str,
                    name: str, mode: str) -> maskio.LabelFile:
    if store is not None:
        return store.current_labels(name, band)
    path = dataset_dir / "labels" / band / f"{name}.txt"
    return maskio.read_label_file(path, mode)


@dataclass
class StageRecord:
    name: str
    items_in: int = 0
    items_out: int = 0
    drops: int = 0
    warnings: list[str] = field(default_factory=list)


@dataclass
class RunResult:
    manifest: dict
    timing_report: timing.TimingReport


def run_pipeline(config: dict, base_dir: str | Path) -> RunResult:
    """Execute configured stages in order; halt on the first failure."""
    base_dir = Path(base_dir)
    stages = list(config["run"]["stages"])
    for name in stages:
        if name not in RUN_STAGES:
            raise ConfigError(f"unknown stage {name!r}", key="run.stages")

    state: dict[str, Any] = {}
    records: list[StageRecord] = []
    timings: list[timing.StageTiming] = []
    for name in stages:
        record = StageRecord(name=name)
        try:
            with timing.time_stage(name) as stage_timing:
                _run_stage(name, config, base_dir, state, record)
                stage_timing.items = record.items_out
        except Exception as exc:
            timings.append(stage_timing)  # partial timing retained
            _write_outputs(config, base_dir, records, timings, state, partial=True)
            if isinstance(exc, MattError):
                raise
            raise StageError(name, str(exc)) from exc
        timings.append(stage_timing)
        records.append(record)

    manifest = _write_outputs(config, base_dir, records, timings, state, partial=False)
    report = timing.build_report(timings, n_images=state.get("n_images", 0))
    return RunResult(manifest=manifest, timing_report=report)


def _resolve(base_dir: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path


def _run_stage(name: str, config: dict, base_dir: Path, state: dict,
               record: StageRecord) -> None:
    if name == "extract":
        cfg = config["extract"]
        out = _resolve(base_dir, cfg["out"] or "frames")
        if cfg["frames"]:
            count = extract_frames_from_dir(_resolve(base_dir, cfg["frames"]), int(cfg["fstride"]), out)
        elif cfg["video"]:
            count = extract_frames(_resolve(base_dir, cfg["video"]), int(cfg["fstride"]), out)
        else:
            raise ConfigError("extract needs 'video' or 'frames'", key="extract")
        record.items_out = count

    elif name == "pair":
        cfg = config["pair"]
        band_dirs = {
            band: _resolve(base_dir, cfg[band])
            for band in ("rgb", "lwir", "fused")
            if cfg[band]
        }
        overrides = None
        if cfg["meta_overrides"]:
            overrides = load_meta_overrides(_resolve(base_dir, cfg["meta_overrides"]))
        pairs, unpaired = pair_frames(band_dirs, overrides)
        state["pairs"] = pairs
        record.items_in = len(pairs) + len(unpaired)
        record.items_out = len(pairs)
        record.drops = len(unpaired)
        record.warnings = [
            f"unpaired {u.pair_id}: missing {', '.join(u.missing_bands)}" for u in unpaired
        ]

    elif name == "ingest-masks":
        cfg = config["masks"]
        mask_dir = _resolve(base_dir, cfg["dir"])
        if not mask_dir.is_dir():
            raise StageError("ingest-masks", f"mask directory not found: {mask_dir}")
        paths = maskio.list_interchange_files(mask_dir)
        masksets = [maskio.read_maskset(p) for p in paths]
        state["masksets"] = masksets
        state["maskset_paths"] = {m.pair_id: p for m, p in zip(masksets, paths)}
        record.items_in = record.items_out = len(masksets)

    elif name == "transfer":
        cfg = config["transfer"]
        pairs: list[FramePair] = state.get("pairs", [])
        masksets = state.get("masksets", [])
        cals = {}
        for band in ("lwir", "fused"):
            if cfg[f"cal_{band}"]:
                cals[band] = load_calibration(_resolve(base_dir, cfg[f"cal_{band}"]))
        result = transfer_batch(
            pairs, masksets, mode=cfg["mode"], cals=cals,
            simplify_eps_px=float(cfg["simplify_eps_px"]),
        )
        dataset_dir = _resolve(base_dir, cfg["out"])
        _write_dataset(dataset_dir, pairs, masksets, result.by_band, cfg["mode"],
                       maskset_paths=state.get("maskset_paths"))
        state["dataset_dir"] = dataset_dir
        state["n_images"] = sum(len(files) for files in result.by_band.values())
        record.items_in = len(masksets)
        record.items_out = result.stats.transferred
        record.drops = result.stats.dropped
        state["transfer_stats"] = result.stats

    elif name == "augment":
        cfg = config["augment"]
        dataset_dir = state.get("dataset_dir")
        if dataset_dir is None:
            raise ConfigError("augment requires a prior transfer stage", key="run.stages")
        ops = imgproc.ops_from_names(cfg["ops"], params=cfg)
        count = _augment_dataset(Path(dataset_dir), ops, config["transfer"]["mode"])
        record.items_out = count
        state["n_images"] = count

    elif name == "assemble":
        cfg = config["assemble"]
        dataset_dir = state.get("dataset_dir") or _resolve(base_dir, config["transfer"]["out"])
        manifest = assemble(
            dataset_dir,
            _resolve(base_dir, cfg["out"]),
            ratios=[float(r) for r in cfg["ratios"]],
            ontology=cfg["ontology"],
            split_names=cfg["splits"],
            seed=int(cfg["seed"]),
            mode=cfg["mode"],
            training_config={
                "epochs": int(cfg["epochs"]),
                "model_tag": cfg["model_tag"],
                "image_size": int(cfg["image_size"]),
            },
            provenance={"tool_version": __version__, "config_hash": config_hash(config)},
        )
        state["dataset_manifest"] = manifest.to_json()
        state["dataset_manifest_path"] = _resolve(base_dir, cfg["out"]) / "manifest.json"
        record.items_out = sum(
            len(files) for bands in manifest.splits.values() for files in bands.values()
        )

    elif name == "train":
        cfg = config["train"]
        if not cfg["command"]:
            raise ConfigError("train stage needs a command", key="train.command")
        manifest_path = state.get("dataset_manifest_path", "")
        proc = subprocess.run(
            cfg["command"].split() + ([str(manifest_path)] if manifest_path else []),
            capture_output=True, text=True,
        )
        record.warnings.append(f"trainer exit code {proc.returncode}")
        if proc.returncode != 0:
            raise StageError("train", f"trainer exited with {proc.returncode}")


def _write_dataset(dataset_dir: Path, pairs: Sequence[FramePair],
                   masksets: Iterable[maskio.MaskSet],
                   by_band: dict[str, list[maskio.LabelFile]], mode: str,
                   maskset_paths: dict[str, Path] | None = None) -> None:
    masks_out = dataset_dir / "masks"
    masks_out.mkdir(parents=True, exist_ok=True)
    maskset_paths = maskset_paths or {}
    for maskset in masksets:
        dst = masks_out / f"{maskset.pair_id}.json"
        src = maskset_paths.get(maskset.pair_id)
        if src is not None:
            shutil.copyfile(src, dst)
        else:
            maskio.write_maskset(maskset, dst, width=1, height=1)
    pair_index = {p.pair_id: p for p in pairs}
    workers = worker_count()
    for band, label_files in by_band.items():
        (dataset_dir / "images" / band).mkdir(parents=True, exist_ok=True)
        (dataset_dir / "labels" / band).mkdir(parents=True, exist_ok=True)

        def write_one(labels: maskio.LabelFile, band: str = band) -> None:
            pair = pair_index[labels.pair_id]
            src = pair.images[band]
            shutil.copyfile(src, dataset_dir / "images" / band / f"{labels.pair_id}{src.suffix.lower()}")
            maskio.write_label_file(labels, dataset_dir / "labels" / band / f"{labels.pair_id}.txt", mode)

        _map_ordered(write_one, label_files, workers)


def _augment_dataset(dataset_dir: Path, ops: list[imgproc.AugmentOp], mode: str) -> int:
    total = 0
    for band_dir in sorted((dataset_dir / "images").iterdir()):
        band = band_dir.name
        originals = list_images(band_dir)
        total += len(originals)
        for src in originals:
            if "__" in src.stem:
                continue  # already an augmented variant
            image = read_image(src)
            labels = maskio.read_label_file(dataset_dir / "labels" / band / f"{src.stem}.txt", mode)
            for op in ops:
                variant = f"{src.stem}__{op.kind}"
                write_image(imgproc.apply_op(op, image), band_dir / f"{variant}{src.suffix}")
                out_labels = imgproc.apply_op_labels(op, labels)
                out_labels.pair_id = variant
                maskio.write_label_file(
                    out_labels, dataset_dir / "labels" / band / f"{variant}.txt", mode
                )
                total += 1
    return total


def _write_outputs(config: dict, base_dir: Path, records: list[StageRecord],
                   timings: list[timing.StageTiming], state: dict, partial: bool) -> dict:
    out_dir = _resolve(base_dir, config["run"]["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool_version": __version__,
        "config_hash": config_hash(config),
        "partial": partial,
        "stages": [
            {
                "name": r.name,
                "items_in": r.items_in,
                "items_out": r.items_out,
                "drops": r.drops,
                "warnings": r.warnings,
            }
            for r in records
        ],
        "dataset_manifest": state.get("dataset_manifest"),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    report = timing.build_report(timings, n_images=state.get("n_images", 0))
    timing.write_report(report, out_dir / "timing.json")
    return manifest
