"""Command line front end for the attribution exporter."""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import ExportJob, export_attributions, load_labels


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscar-export",
        description="Export Grad-CAM attribution bundles from torch checkpoints",
    )
    parser.add_argument("--ba", required=True, help="baseline model checkpoint")
    parser.add_argument("--ts", required=True, help="suspect model checkpoint")
    parser.add_argument("--sa", required=True, help="attribute model checkpoint")
    parser.add_argument("--data", required=True, help="directory of .npy images")
    parser.add_argument("--method", default="gradcam", choices=("gradcam",))
    parser.add_argument("--layer", required=True, help="target layer name")
    parser.add_argument("--out", required=True, help="output bundle directory")
    parser.add_argument(
        "--features",
        action="store_true",
        help="also export the suspect model's feature maps and linear head",
    )
    parser.add_argument(
        "--labels", help="optional JSON file: image id -> {y, a}"
    )
    parser.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(
            checkpoints={"BA": args.ba, "TS": args.ts, "SA": args.sa},
            data_dir=args.data,
            layer=args.layer,
            out_dir=args.out,
            method=args.method,
            with_features=args.features,
            batch_size=args.batch_size,
            labels=load_labels(args.labels) if args.labels else {},
        )
        manifest = export_attributions(job)
    except ExportError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return type(exc).exit_code
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
