"""Command-line entry point.

Subcommands mirror the pipeline stages: extract, pair, ingest-masks,
transfer, augment, assemble, review, eval, report, run. Exit codes:
0 success, 1 validation error, 2 stage failure. MATT_WORKERS overrides
within-stage parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, evaluate, imgproc, maskio, timing
from .config import load_config
from .errors import MattError, StageError, ValidationError
from .imageio import list_images, read_image, write_image
from .ingest import extract_frames, extract_frames_from_dir, load_meta_overrides, pair_frames
from .pipeline import assemble, run_pipeline
from .transfer import load_calibration, parse_mode, transfer_batch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"matt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract every Nth frame from drone footage")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--video", help="video file (decoded via external ffmpeg)")
    src.add_argument("--frames", help="directory of pre-extracted frames")
    p.add_argument("--fstride", type=int, default=100)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pair", help="pair frames across band directories by file name")
    p.add_argument("--rgb", required=True)
    p.add_argument("--lwir")
    p.add_argument("--fused")
    p.add_argument("--meta-overrides", help="JSON stem -> capture metadata map")
    p.add_argument("--out", help="write the pairing report JSON here")

    p = sub.add_parser("ingest-masks", help="validate mask interchange files")
    p.add_argument("--masks", required=True)

    p = sub.add_parser("transfer", help="convert masks to labels on every band")
    p.add_argument("--pairs", required=True, help="directory with per-band frame dirs")
    p.add_argument("--masks", required=True)
    p.add_argument("--mode", choices=("bbox", "polygon"), default="bbox")
    p.add_argument("--cal", help="affine calibration JSON applied to non-RGB bands")
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="grow a labeled image directory with filter variants")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--ops", default="", help="comma list: blur,fliph,flipblur,sobelxy,dog,gaussthresh")
    p.add_argument("--mode", choices=("bbox", "polygon"), default="bbox")
    p.add_argument("--out", required=True)

    p = sub.add_parser("assemble", help="write the YOLO training layout + manifest")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", default="0.8,0.2")
    p.add_argument("--splits", default="train,val")
    p.add_argument("--ontology", default="car,truck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("bbox", "polygon"), default="bbox")

    p = sub.add_parser("review", help="serve the human verification UI/API")
    p.add_argument("--dataset", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir")
    p.add_argument("--mode", choices=("bbox", "polygon"), default="bbox")

    p = sub.add_parser("eval", help="stratified mAP report from prediction files")
    p.add_argument("--preds", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--band", help="default band for meta entries missing one")
    p.add_argument("--method", help="default method for meta entries missing one")
    p.add_argument("--mode", choices=("bbox", "polygon"), default="bbox")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write the group rows as CSV")
    p.add_argument("--sweep", action="store_true",
                   help="add an overall mAP@[.50:.95] sweep to the report")

    p = sub.add_parser("report", help="render a timing report table")
    p.add_argument("--timings", required=True, help="timing JSON from a pipeline run")

    p = sub.add_parser("run", help="run configured pipeline stages in order")
    p.add_argument("--config", required=True)
    p.add_argument("--base-dir", default=".")
    return parser


def _cmd_extract(args) -> int:
    if args.video:
        count = extract_frames(args.video, args.fstride, args.out)
    else:
        count = extract_frames_from_dir(args.frames, args.fstride, args.out)
    print(f"wrote {count} frames to {args.out}")
    return 0


def _cmd_pair(args) -> int:
    band_dirs = {"rgb": args.rgb}
    if args.lwir:
        band_dirs["lwir"] = args.lwir
    if args.fused:
        band_dirs["fused"] = args.fused
    overrides = load_meta_overrides(args.meta_overrides) if args.meta_overrides else None
    pairs, unpaired = pair_frames(band_dirs, overrides)
    print(f"{len(pairs)} complete pairs, {len(unpaired)} unpaired")
    for entry in unpaired:
        print(f"  unpaired {entry.pair_id}: missing {', '.join(entry.missing_bands)}")
    if args.out:
        payload = {
            "pairs": [p.pair_id for p in pairs],
            "unpaired": [
                {"pair_id": u.pair_id, "missing": list(u.missing_bands)} for u in unpaired
            ],
        }
        Path(args.out).write_text(json.dumps(payload, indent=2))
    return 0


def _cmd_ingest_masks(args) -> int:
    paths = maskio.list_interchange_files(args.masks)
    for path in paths:
        maskio.read_maskset(path)
    print(f"validated {len(paths)} mask files")
    return 0


def _cmd_transfer(args) -> int:
    pairs_root = Path(args.pairs)
    band_dirs = {
        d.name: d for d in sorted(pairs_root.iterdir())
        if d.is_dir() and d.name in ("rgb", "lwir", "fused")
    }
    pairs, unpaired = pair_frames(band_dirs)
    masksets = [maskio.read_maskset(p) for p in maskio.list_interchange_files(args.masks)]
    cals = {}
    if args.cal:
        cal = load_calibration(args.cal)
        cals = {band: cal for band in band_dirs if band != "rgb"}
    result = transfer_batch(pairs, masksets, mode=parse_mode(args.mode), cals=cals)
    from .pipeline import _write_dataset  # shared writer

    _write_dataset(Path(args.out), pairs, masksets, result.by_band, args.mode)
    print(
        f"transferred {result.stats.transferred} labels across "
        f"{len(result.by_band)} bands ({result.stats.dropped} dropped)"
    )
    if unpaired:
        print(f"warning: {len(unpaired)} unpaired stems skipped")
    return 0


def _cmd_augment(args) -> int:
    ops = imgproc.ops_from_names([s for s in args.ops.split(",") if s.strip()])
    out_images = Path(args.out) / "images"
    out_labels = Path(args.out) / "labels"
    out_images.mkdir(parents=True, exist_ok=True)
    out_labels.mkdir(parents=True, exist_ok=True)
    count = 0
    for src in list_images(args.in_dir):
        image = read_image(src)
        labels = maskio.read_label_file(Path(args.labels) / f"{src.stem}.txt", args.mode)
        items = imgproc.expand_dataset(
            [imgproc.DatasetItem(name=src.stem, image=image, labels=labels)], ops
        )
        for item in items:
            write_image(item.image, out_images / f"{item.name}{src.suffix}")
            maskio.write_label_file(item.labels, out_labels / f"{item.name}.txt", args.mode)
            count += 1
    print(f"wrote {count} images to {args.out}")
    return 0


def _cmd_assemble(args) -> int:
    manifest = assemble(
        args.dataset,
        args.out,
        ratios=[float(r) for r in args.ratios.split(",")],
        ontology=[s.strip() for s in args.ontology.split(",") if s.strip()],
        split_names=[s.strip() for s in args.splits.split(",") if s.strip()],
        seed=args.seed,
        mode=args.mode,
    )
    total = sum(len(f) for bands in manifest.splits.values() for f in bands.values())
    print(f"assembled {total} images into {args.out}")
    return 0


def _cmd_review(args) -> int:
    from .review.server import serve

    serve(args.dataset, port=args.port, host=args.host, ui_dir=args.ui_dir,
          label_mode=args.mode)
    return 0


def _cmd_eval(args) -> int:
    dets = evaluate.load_predictions(args.preds)
    gts = {
        path.stem: maskio.read_label_file(path, args.mode)
        for path in sorted(Path(args.gt).glob("*.txt"))
    }
    if not gts:
        raise ValidationError(f"no ground-truth label files in {args.gt}")
    meta = evaluate.load_strata(args.meta, default_band=args.band, default_method=args.method)
    report = evaluate.stratified_report(dets, gts, meta, iou_thresh=args.iou)
    payload = evaluate.report_to_json(report)
    if args.sweep:
        payload["sweep"] = evaluate.map_sweep(dets, gts)
    Path(args.out).write_text(json.dumps(payload, indent=2))
    print(evaluate.render_table(report))
    if args.csv:
        Path(args.csv).write_text(evaluate.render_csv(report))
    return 0


def _cmd_report(args) -> int:
    report = timing.read_report(args.timings)
    print(timing.render_table(report))
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_pipeline(config, args.base_dir)
    for stage in result.manifest["stages"]:
        print(
            f"stage {stage['name']}: in={stage['items_in']} out={stage['items_out']} "
            f"drops={stage['drops']}"
        )
    print(timing.render_table(result.timing_report))
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "pair": _cmd_pair,
    "ingest-masks": _cmd_ingest_masks,
    "transfer": _cmd_transfer,
    "augment": _cmd_augment,
    "assemble": _cmd_assemble,
    "review": _cmd_review,
    "eval": _cmd_eval,
    "report": _cmd_report,
    "run": _cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MattError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
