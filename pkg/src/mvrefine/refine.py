"""Refine block motion vectors into dense optical-flow-like fields.

Per P-frame: upsample the MV grid per-pixel, accumulate displacements back
to the GOP's I-frame, assign each pixel the edge confidence of the I-frame
pixel it traces to, median-filter, average per block, and zero out the flow
wherever confidence falls below threshold.  Retained vectors are never
altered, only masked.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import confidence as conf_mod
from .model import (
    MACROBLOCK,
    ConfidenceMap,
    FlowField,
    GopStream,
    MotionVectorField,
    TraceField,
    mv_grid_shape,
)

try:  # compiled kernels are optional; the numpy paths are bit-identical
    from ._speed import median3_kernel, walk_kernel

    _HAVE_KERNELS = True
except ImportError:  # pragma: no cover - depends on environment
    _HAVE_KERNELS = False


@dataclass(frozen=True)
class RefineConfig:
    block: int = 16
    median_window: int = 3
    threshold_mode: Literal["fixed", "percentile"] = "fixed"
    fixed_threshold: float = 0.0075
    percentile_keep: float = 0.80
    confidence_mode: Literal["traced", "iframe_static"] = "traced"
    pooling: Literal["block", "pixel"] = "block"
    kernel: Literal["scharr", "sobel"] = "scharr"

    def __post_init__(self):
        if self.block < 1:
            raise ValueError(f"block must be >= 1, got {self.block}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError(f"median_window must be odd >= 1, got {self.median_window}")
        if not 0.0 <= self.fixed_threshold <= 1.0:
            raise ValueError(f"fixed_threshold must be in [0, 1], got {self.fixed_threshold}")
        if not 0.0 <= self.percentile_keep <= 1.0:
            raise ValueError(f"percentile_keep must be in [0, 1], got {self.percentile_keep}")
        if self.threshold_mode not in ("fixed", "percentile"):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.confidence_mode not in ("traced", "iframe_static"):
            raise ValueError(f"unknown confidence_mode {self.confidence_mode!r}")
        if self.pooling not in ("block", "pixel"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.kernel not in conf_mod.KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")


def upsample_mv(mv: MotionVectorField, width: int, height: int) -> FlowField:
    """Broadcast each block's vector to its pixels, quarter-pel -> pixels."""
    expect = mv_grid_shape(width, height)
    if (mv.blocks_y, mv.blocks_x) != expect:
        raise ValueError(
            f"mv grid {mv.blocks_y}x{mv.blocks_x} inconsistent with "
            f"{width}x{height} (expected {expect[0]}x{expect[1]})"
        )
    px = mv.vectors.astype(np.float64) / 4.0
    u = np.repeat(np.repeat(px[:, :, 0], MACROBLOCK, axis=0), MACROBLOCK, axis=1)[:height, :width]
    v = np.repeat(np.repeat(px[:, :, 1], MACROBLOCK, axis=0), MACROBLOCK, axis=1)[:height, :width]
    return FlowField(u=u, v=v)


def accumulate_trace(gop: GopStream, target: int) -> tuple[FlowField, TraceField]:
    """Walk every pixel of P-frame ``target`` back to its I-frame source.

    At each step the current (real-valued) position is rounded to the
    nearest pel, half away from zero, clamped into the frame to select that
    frame's block vector; the vector is then subtracted from the unrounded
    position.  Returns the total displacement and the clamped I-frame
    source coordinates.
    """
    if not 0 <= target < len(gop.pframes):
        raise ValueError(f"target {target} out of range for {len(gop.pframes)} P-frames")
    h, w = gop.iframe.shape
    if _HAVE_KERNELS:
        stack = np.stack([mv.vectors for mv, _ in gop.pframes[: target + 1]])
        u, v, sx, sy = walk_kernel(stack, w, h, target)
        return FlowField(u=u, v=v), TraceField(src_x=sx, src_y=sy)

    mv_px = [
        (
            mv.vectors[:, :, 0].ravel().astype(np.float64) / 4.0,
            mv.vectors[:, :, 1].ravel().astype(np.float64) / 4.0,
        )
        for mv, _ in gop.pframes[: target + 1]
    ]
    bxn = gop.pframes[0][0].blocks_x
    cx, cy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    px = cx.copy()
    py = cy.copy()
    for t in range(target, -1, -1):
        # clip-then-floor(x + 0.5) equals round-half-away-then-clip on this range
        ix = (np.clip(cx, 0.0, w - 1.0) + 0.5).astype(np.intp) // MACROBLOCK
        iy = (np.clip(cy, 0.0, h - 1.0) + 0.5).astype(np.intp) // MACROBLOCK
        iy *= bxn
        iy += ix
        cx -= np.take(mv_px[t][0], iy)
        cy -= np.take(mv_px[t][1], iy)
    flow = FlowField(u=px - cx, v=py - cy)
    trace = TraceField(src_x=np.clip(cx, 0, w - 1), src_y=np.clip(cy, 0, h - 1))
    return flow, trace


def propagate_confidence(iframe_conf: ConfidenceMap, trace: TraceField) -> ConfidenceMap:
    """Sample the I-frame confidence at each pixel's traced source position."""
    if not iframe_conf.normalized:
        raise ValueError("I-frame confidence must be normalized before propagation")
    h, w = iframe_conf.shape
    # trace coordinates are already within bounds, so floor(x + 0.5) suffices
    ix = np.minimum((trace.src_x + 0.5).astype(np.intp), w - 1)
    iy = np.minimum((trace.src_y + 0.5).astype(np.intp), h - 1)
    iy *= w
    iy += ix
    return ConfidenceMap(values=np.take(iframe_conf.values.ravel(), iy), normalized=True)


def _median9(p: np.ndarray) -> np.ndarray:
    """Exact median of the 9 neighbors via a compare-exchange network."""
    w = [p[dy : dy + p.shape[0] - 2, dx : dx + p.shape[1] - 2].copy()
         for dy in range(3) for dx in range(3)]

    def cas(i, j):
        lo = np.minimum(w[i], w[j])
        np.maximum(w[i], w[j], out=w[j])
        w[i] = lo

    # Paeth's median-of-9 network.
    for i, j in (
        (1, 2), (4, 5), (7, 8), (0, 1), (3, 4), (6, 7), (1, 2), (4, 5),
        (7, 8), (0, 3), (5, 8), (4, 7), (3, 6), (1, 4), (2, 5), (4, 7),
        (4, 2), (6, 4), (4, 2),
    ):
        cas(i, j)
    return w[4]


def median_filter(conf: ConfidenceMap, window: int = 3) -> ConfidenceMap:
    """Per-pixel window median with edge-replicated borders."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd >= 1, got {window}")
    h, w = conf.shape
    if h < window or w < window:
        raise ValueError(f"map {h}x{w} smaller than {window}x{window} window")
    if window == 1:
        return ConfidenceMap(values=conf.values.copy(), normalized=conf.normalized)
    if window == 3 and _HAVE_KERNELS:
        return ConfidenceMap(
            values=median3_kernel(np.ascontiguousarray(conf.values, dtype=np.float64)),
            normalized=conf.normalized,
        )
    r = window // 2
    p = np.pad(conf.values, r, mode="edge")
    if window == 3:
        out = _median9(p)
    else:
        stack = np.stack(
            [p[dy : dy + h, dx : dx + w] for dy in range(window) for dx in range(window)]
        )
        out = np.median(stack, axis=0)
    return ConfidenceMap(values=out, normalized=conf.normalized)


def median3(conf: ConfidenceMap) -> ConfidenceMap:
    return median_filter(conf, 3)


def block_pool(conf: ConfidenceMap, block: int = 16) -> ConfidenceMap:
    """Replace every pixel with its block's mean; partial edge blocks average
    over their actual pixels."""
    if block < 1:
        raise ValueError(f"block must be >= 1, got {block}")
    h, w = conf.shape
    rb = np.arange(0, h, block)
    cb = np.arange(0, w, block)
    sums = np.add.reduceat(np.add.reduceat(conf.values, rb, axis=0), cb, axis=1)
    rows = np.minimum(rb + block, h) - rb
    cols = np.minimum(cb + block, w) - cb
    means = sums / np.outer(rows, cols)
    out = np.repeat(np.repeat(means, block, axis=0), block, axis=1)[:h, :w]
    return ConfidenceMap(values=out, normalized=conf.normalized)


def threshold_flow(flow: FlowField, conf: ConfidenceMap, config: RefineConfig) -> FlowField:
    """Zero the flow wherever confidence falls below the configured cut.

    Fixed mode removes pixels with confidence strictly below the threshold;
    percentile mode keeps the top ``percentile_keep`` fraction, with ties at
    the cut value kept.
    """
    if flow.shape != conf.shape:
        raise ValueError(f"flow {flow.shape} and confidence {conf.shape} shapes differ")
    if not conf.normalized:
        raise ValueError("confidence must be on the normalized scale")
    vals = conf.values
    if config.threshold_mode == "fixed":
        keep = vals >= config.fixed_threshold
    else:
        n = vals.size
        k = int(np.ceil(config.percentile_keep * n))
        if k <= 0:
            keep = np.zeros(vals.shape, dtype=bool)
        else:
            cut = np.partition(vals.ravel(), n - k)[n - k]
            keep = vals >= cut
    return FlowField(u=np.where(keep, flow.u, 0.0), v=np.where(keep, flow.v, 0.0))


def iframe_confidence(gop: GopStream, config: RefineConfig) -> ConfidenceMap:
    """Normalized edge-strength confidence of the GOP's I-frame."""
    grads = conf_mod.gradients(gop.iframe, config.kernel)
    return conf_mod.normalize(conf_mod.edge_strength(grads))


def refine_gop(
    gop: GopStream,
    config: RefineConfig = RefineConfig(),
    timings: dict[str, float] | None = None,
) -> list[FlowField]:
    """Run the full refinement pipeline; one refined FlowField per P-frame.

    ``timings`` optionally accumulates per-stage wall-clock seconds.
    """
    t0 = time.perf_counter()
    base = iframe_confidence(gop, config)
    static_conf: ConfidenceMap | None = None
    if config.confidence_mode == "iframe_static":
        # Untraced confidence is identical for every P-frame; filter it once.
        static_conf = median_filter(base, config.median_window)
        if config.pooling == "block":
            static_conf = block_pool(static_conf, config.block)
    if timings is not None:
        timings["confidence"] = timings.get("confidence", 0.0) + time.perf_counter() - t0

    def tick(key: str, since: float) -> float:
        now = time.perf_counter()
        if timings is not None:
            timings[key] = timings.get(key, 0.0) + now - since
        return now

    out: list[FlowField] = []
    for t in range(len(gop.pframes)):
        t0 = time.perf_counter()
        flow, trace = accumulate_trace(gop, t)
        t0 = tick("accumulate", t0)
        if static_conf is not None:
            conf = static_conf
        else:
            conf = propagate_confidence(base, trace)
            t0 = tick("propagate", t0)
            conf = median_filter(conf, config.median_window)
            t0 = tick("median", t0)
            if config.pooling == "block":
                conf = block_pool(conf, config.block)
                t0 = tick("pool", t0)
        out.append(threshold_flow(flow, conf, config))
        tick("threshold", t0)
    return out
