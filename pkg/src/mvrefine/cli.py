"""Command-line entry point: encode, refine, lk, eval, render, bench, synth.

Exit codes: 0 on success, 1 on usage errors, 2 on data or validation errors
(the message names the offending file, and byte offset where known).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dumpio, evalviz, flo, pnm, synth
from .codecsim import decode_gop, encode_gop
from .dumpio import DumpError
from .model import DumpHeader, FrameType
from .oforacle import LkConfig, lk_flow
from .refine import RefineConfig, refine_gop

REFINE_DEFAULTS = RefineConfig()
LK_DEFAULTS = LkConfig()


class CliError(Exception):
    """Data or validation failure; maps to exit status 2."""


class _Parser(argparse.ArgumentParser):
    # Usage problems exit 1; argparse's default of 2 is reserved for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _thread_count() -> int:
    raw = os.environ.get("MVREFINE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"MVREFINE_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise CliError(f"MVREFINE_THREADS must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def _load_frames(inputs: list[str], raw_size: str | None) -> np.ndarray:
    paths: list[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.iterdir()))
        else:
            paths.append(p)
    paths = [p for p in paths if p.is_file()]
    if not paths:
        raise CliError(f"no input frames found in {inputs}")
    frames = []
    for p in paths:
        if p.suffix.lower() == ".pgm":
            frames.append(pnm.read_pgm(p))
        else:
            if raw_size is None:
                raise CliError(f"{p}: headerless frame needs --raw-size WxH")
            w, h = _parse_size(raw_size)
            data = p.read_bytes()
            if len(data) != w * h:
                raise CliError(f"{p}: expected {w * h} bytes for {w}x{h}, got {len(data)}")
            frames.append(np.frombuffer(data, dtype=np.uint8).reshape(h, w).copy())
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise CliError(f"input frames disagree on size: {sorted(shapes)}")
    return np.stack(frames)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise CliError(f"bad size {text!r}, expected WxH")


def _refine_config(args) -> RefineConfig:
    return RefineConfig(
        median_window=REFINE_DEFAULTS.median_window,
        threshold_mode=args.threshold_mode,
        fixed_threshold=args.threshold,
        percentile_keep=args.keep,
        confidence_mode=args.confidence.replace("-", "_"),
        pooling=args.pooling,
        kernel=args.kernel,
    )


def cmd_encode(args) -> int:
    frames = _load_frames(args.inputs, args.raw_size)
    n, h, w = frames.shape
    gops = [
        encode_gop(frames[start : start + args.gop_size], args.search_range)
        for start in range(0, n, args.gop_size)
    ]
    records = dumpio.merge_gops(gops)
    header = DumpHeader(width=w, height=h, frame_count=len(records), gop_size=args.gop_size)
    with open(args.output, "wb") as fh:
        written = dumpio.write_dump(header, records, fh)
    print(f"wrote {args.output}: {n} frames, {len(gops)} GOPs, {written} bytes")
    return 0


def cmd_refine(args) -> int:
    config = _refine_config(args)
    with open(args.input, "rb") as fh:
        header, records = dumpio.read_dump(fh)
    gops = dumpio.split_gops(records)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    gop_start_index = []
    idx = 0
    for gop in gops:
        gop_start_index.append(idx)
        idx += gop.frame_count()

    threads = _thread_count()
    if threads > 1 and len(gops) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda g: refine_gop(g, config), gops))
    else:
        results = [refine_gop(g, config) for g in gops]

    count = 0
    for gi, fields in enumerate(results):
        for t, field in enumerate(fields):
            frame_idx = gop_start_index[gi] + 1 + t
            flo.write_flo(outdir / f"{frame_idx:04d}.flo", field)
            count += 1
    if args.save_confidence:
        from . import evalviz as ev
        from .refine import block_pool, iframe_confidence, median_filter, propagate_confidence
        from .refine import accumulate_trace

        for gi, gop in enumerate(gops):
            base = iframe_confidence(gop, config)
            for t in range(len(gop.pframes)):
                _, trace = accumulate_trace(gop, t)
                conf = base if config.confidence_mode == "iframe_static" else \
                    propagate_confidence(base, trace)
                conf = median_filter(conf, config.median_window)
                if config.pooling == "block":
                    conf = block_pool(conf, config.block)
                frame_idx = gop_start_index[gi] + 1 + t
                pnm.write_pgm(outdir / f"conf_{frame_idx:04d}.pgm", ev.render_confidence(conf))
    print(f"refined {count} P-frames from {args.input} into {outdir}")
    return 0


def cmd_lk(args) -> int:
    cfg = LkConfig(window=args.window, min_eigen=args.min_eigen,
                   pyramid_levels=args.pyramid_levels)
    first = Path(args.inputs[0])
    if first.suffix == ".mvd1":
        if len(args.inputs) != 1:
            raise CliError("dump mode takes exactly one .mvd1 input")
        with open(first, "rb") as fh:
            _, records = dumpio.read_dump(fh)
        gops = dumpio.split_gops(records)
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        idx = 0
        for gop in gops:
            decoded = decode_gop(gop)
            for t in range(1, decoded.shape[0]):
                field, _ = lk_flow(decoded[0], decoded[t], cfg)
                flo.write_flo(outdir / f"{idx + t:04d}.flo", field)
            idx += decoded.shape[0]
        print(f"LK flow for {idx} frames written to {outdir}")
        return 0
    if len(args.inputs) != 2:
        raise CliError("frame mode takes exactly two PGM inputs")
    a = pnm.read_pgm(args.inputs[0])
    b = pnm.read_pgm(args.inputs[1])
    field, _ = lk_flow(a, b, cfg)
    flo.write_flo(args.output, field)
    print(f"wrote {args.output}")
    return 0


def _flo_set(path: str) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.flo"))
        if not files:
            raise CliError(f"{p}: no .flo files")
        return files
    return [p]


def cmd_eval(args) -> int:
    set_a = _flo_set(args.set_a)
    set_b = _flo_set(args.set_b)
    by_name = {p.name: p for p in set_b}
    pairs = []
    if len(set_a) == 1 and len(set_b) == 1:
        pairs = [(set_a[0], set_b[0])]
    else:
        for p in set_a:
            if p.name in by_name:
                pairs.append((p, by_name[p.name]))
        if not pairs:
            raise CliError(f"no matching .flo names between {args.set_a} and {args.set_b}")
    per_pair = {}
    for pa, pb in pairs:
        stats = evalviz.endpoint_error(flo.read_flo(pa), flo.read_flo(pb))
        per_pair[pa.name] = stats.to_dict()
    agg = {
        key: float(np.mean([s[key] for s in per_pair.values()]))
        for key in next(iter(per_pair.values()))
    }
    report = {"pairs": per_pair, "mean": agg, "count": len(pairs)}
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def cmd_render(args) -> int:
    field = flo.read_flo(args.input)
    maxmag = None if args.max_magnitude == "auto" else float(args.max_magnitude)
    pnm.write_ppm(args.output, evalviz.render_flow(field, maxmag))
    print(f"wrote {args.output}")
    return 0


def cmd_bench(args) -> int:
    threads = _thread_count() if args.parallel else 1
    report = evalviz.benchmark_refine(args.input, repetitions=args.repetitions,
                                      config=_refine_config(args), threads=threads)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def cmd_synth(args) -> int:
    w, h = _parse_size(args.size)
    frames, gt = synth.generate(args.name, w, h, args.frames, seed=args.seed)
    outdir = Path(args.output)
    (outdir / "gt").mkdir(parents=True, exist_ok=True)
    for t in range(frames.shape[0]):
        pnm.write_pgm(outdir / f"{t:04d}.pgm", frames[t])
        if t % args.gop_size != 0:
            i0 = (t // args.gop_size) * args.gop_size
            flo.write_flo(outdir / "gt" / f"{t:04d}.flo", gt(i0, t))
    print(f"wrote {frames.shape[0]} frames and ground-truth flow to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvrefine",
                     description="Motion-vector refinement toolkit for compressed-video dumps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode PGM frames into an MVD1 dump")
    p.add_argument("inputs", nargs="+", help="PGM files, raw planes, or a directory")
    p.add_argument("-o", "--output", required=True, help="output .mvd1 path")
    p.add_argument("--gop-size", type=int, default=12)
    p.add_argument("--search-range", type=int, default=16)
    p.add_argument("--raw-size", default=None, help="WxH of headerless input planes")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("refine", help="refine an MVD1 dump into per-P-frame .flo fields")
    p.add_argument("input", help="input .mvd1 path")
    p.add_argument("-o", "--output", required=True, help="output directory")
    _add_refine_flags(p)
    p.add_argument("--save-confidence", action="store_true",
                   help="also write per-frame confidence PGMs")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("lk", help="dense Lucas-Kanade flow for two PGMs or a decoded dump")
    p.add_argument("inputs", nargs="+", help="two PGM files, or one .mvd1 dump")
    p.add_argument("-o", "--output", required=True, help=".flo path (or directory for dumps)")
    p.add_argument("--window", type=int, default=LK_DEFAULTS.window)
    p.add_argument("--min-eigen", type=float, default=LK_DEFAULTS.min_eigen)
    p.add_argument("--pyramid-levels", type=int, default=LK_DEFAULTS.pyramid_levels)
    p.set_defaults(func=cmd_lk)

    p = sub.add_parser("eval", help="endpoint-error statistics between two .flo sets")
    p.add_argument("set_a", help=".flo file or directory")
    p.add_argument("set_b", help=".flo file or directory")
    p.add_argument("-o", "--output", default=None, help="write the JSON report here too")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="render a .flo field as a color-wheel PPM")
    p.add_argument("input", help=".flo path")
    p.add_argument("-o", "--output", required=True, help="output .ppm path")
    p.add_argument("--max-magnitude", default="auto")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="refinement throughput benchmark over a dump")
    p.add_argument("input", help="input .mvd1 path")
    p.add_argument("-o", "--output", default=None, help="write the JSON report here too")
    p.add_argument("-r", "--repetitions", type=int, default=3)
    p.add_argument("--parallel", action="store_true",
                   help="time the concurrent per-GOP path (MVREFINE_THREADS)")
    _add_refine_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic sequence with ground-truth flow")
    p.add_argument("name", choices=synth.SEQUENCES)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--size", default="128x96", help="frame size WxH")
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--gop-size", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def _add_refine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=REFINE_DEFAULTS.fixed_threshold,
                   help="fixed confidence threshold")
    p.add_argument("--threshold-mode", choices=("fixed", "percentile"),
                   default=REFINE_DEFAULTS.threshold_mode)
    p.add_argument("--keep", type=float, default=REFINE_DEFAULTS.percentile_keep,
                   help="fraction kept in percentile mode")
    p.add_argument("--confidence", choices=("traced", "iframe-static"),
                   default=REFINE_DEFAULTS.confidence_mode.replace("_", "-"))
    p.add_argument("--pooling", choices=("block", "pixel"), default=REFINE_DEFAULTS.pooling)
    p.add_argument("--kernel", choices=("scharr", "sobel"), default=REFINE_DEFAULTS.kernel)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"mvrefine {args.command}: {e}", file=sys.stderr)
        return 2
    except DumpError as e:
        print(f"mvrefine {args.command}: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"mvrefine {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
