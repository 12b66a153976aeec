"""matt-sam: segment RGB frames into mask interchange files."""

from __future__ import annotations

import argparse
import sys

from .adapter import segment_frames
from .backends import AdapterConfig


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="matt-sam", description=__doc__)
    parser.add_argument("--frames", required=True, help="directory of RGB frames")
    parser.add_argument("--out", required=True, help="output directory for interchange JSON")
    parser.add_argument("--ontology", default="car,truck",
                        help="comma-separated category names, in id order")
    parser.add_argument("--backend", choices=("sam", "threshold", "fixture"),
                        default="threshold")
    parser.add_argument("--checkpoint", default="", help="model checkpoint (sam backend)")
    parser.add_argument("--variant", default="vit_b", help="model variant tag (sam backend)")
    parser.add_argument("--device", choices=("cpu", "gpu"), default="cpu")
    parser.add_argument("--confidence-floor", type=float, default=0.0)
    parser.add_argument("--fixtures", default="", help="fixture dir (fixture backend)")
    args = parser.parse_args(argv)

    try:
        config = AdapterConfig(
            ontology=[s.strip() for s in args.ontology.split(",") if s.strip()],
            backend=args.backend,
            model_checkpoint=args.checkpoint,
            model_variant=args.variant,
            device=args.device,
            confidence_floor=args.confidence_floor,
            fixture_dir=args.fixtures,
        )
        result = segment_frames(args.frames, args.out, config)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.written} mask files to {args.out} "
          f"in {result.wall_seconds:.2f}s ({len(result.skipped)} skipped)")
    if result.skipped:
        return 3  # partial failure
    return 0


if __name__ == "__main__":
    sys.exit(main())
