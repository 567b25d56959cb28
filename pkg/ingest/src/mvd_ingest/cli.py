"""mvd-ingest: export an MVD1 dump from a compressed video file.

Prints the ingest report as JSON on stdout.  Exit codes: 0 success, 1 usage
error, 2 ingest or capability error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .adapter import ingest
from .toolchain import IngestError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvd-ingest",
                     description="Export motion vectors, luma, and residuals to an MVD1 dump")
    parser.add_argument("video", help="input video file")
    parser.add_argument("output", help="output .mvd1 path")
    parser.add_argument("--gop-cap", type=int, default=0,
                        help="force a new I-frame after N frames in a GOP (0 = codec GOPs)")
    parser.add_argument("--resize", default=None, help="rescale to WxH before export")
    parser.add_argument("--max-frames", type=int, default=0,
                        help="stop after N decoded frames (0 = all)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    resize = None
    if args.resize:
        try:
            w, h = args.resize.lower().split("x")
            resize = (int(w), int(h))
        except ValueError:
            print(f"mvd-ingest: bad --resize {args.resize!r}, expected WxH", file=sys.stderr)
            return 1
    try:
        report = ingest(args.video, args.output, gop_cap=args.gop_cap, resize=resize,
                        max_frames=args.max_frames)
    except IngestError as e:
        print(f"mvd-ingest: {e}", file=sys.stderr)
        return 2
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
