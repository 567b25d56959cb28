"""Turn exporter output into MVD1 dumps: resample vectors to the 16x16 grid,
re-express every inter frame against its presentation predecessor, and
recompute residuals so reconstruction is exact by construction."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .toolchain import (
    MV_EXPORT_CODECS,
    IngestCapabilityError,
    IngestError,
    ToolFrame,
    ToolOutput,
    run_exporter,
)

BLOCK = 16


@dataclass
class IngestReport:
    source: str
    frames_written: int = 0
    b_frames_remapped: int = 0
    mv_blocks_resampled: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "frames_written": self.frames_written,
            "b_frames_remapped": self.b_frames_remapped,
            "mv_blocks_resampled": self.mv_blocks_resampled,
            "warnings": list(self.warnings),
        }


def grid_shape(width: int, height: int) -> tuple[int, int]:
    return (-(-height // BLOCK), -(-width // BLOCK))


def resample_mvs(
    mvs: np.ndarray, width: int, height: int, scale: tuple[float, float] = (1.0, 1.0)
) -> tuple[np.ndarray, int, int]:
    """Area-weighted resampling of codec vectors onto the 16x16 quarter-pel grid.

    ``mvs`` rows are (source, w, h, dst_x, dst_y, motion_x, motion_y,
    motion_scale) with dst at the block center.  Only past-referenced
    (source < 0) vectors are used.  Returns (grid, resampled_count,
    dropped_future_count).
    """
    by, bx = grid_shape(width, height)
    acc = np.zeros((by, bx, 2), dtype=np.float64)
    cover = np.zeros((by, bx), dtype=np.float64)
    sx, sy = scale
    resampled = 0
    dropped = 0
    for source, bw, bh, dst_x, dst_y, motion_x, motion_y, motion_scale in mvs:
        if source >= 0:
            dropped += 1
            continue
        if motion_scale <= 0 or bw <= 0 or bh <= 0:
            continue
        # block extent in output coordinates
        x0 = (dst_x - bw / 2.0) * sx
        y0 = (dst_y - bh / 2.0) * sy
        x1 = min(x0 + bw * sx, float(width))
        y1 = min(y0 + bh * sy, float(height))
        x0 = max(x0, 0.0)
        y0 = max(y0, 0.0)
        if x1 <= x0 or y1 <= y0:
            continue
        # displacement of the current block relative to its reference,
        # quarter-pel, in output coordinates
        qx = -motion_x * 4.0 * sx / motion_scale
        qy = -motion_y * 4.0 * sy / motion_scale
        if not (bw == BLOCK and bh == BLOCK and sx == 1.0 and sy == 1.0
                and x0 % BLOCK == 0 and y0 % BLOCK == 0):
            resampled += 1
        for cy in range(int(y0) // BLOCK, min((int(np.ceil(y1)) - 1) // BLOCK, by - 1) + 1):
            oy = min(y1, (cy + 1) * BLOCK) - max(y0, cy * BLOCK)
            if oy <= 0:
                continue
            for cx in range(int(x0) // BLOCK, min((int(np.ceil(x1)) - 1) // BLOCK, bx - 1) + 1):
                ox = min(x1, (cx + 1) * BLOCK) - max(x0, cx * BLOCK)
                if ox <= 0:
                    continue
                area = ox * oy
                acc[cy, cx, 0] += area * qx
                acc[cy, cx, 1] += area * qy
                cover[cy, cx] += area
    grid = np.zeros((by, bx, 2), dtype=np.int16)
    covered = cover > 0
    if covered.any():
        mean = acc[covered] / cover[covered][:, None]
        bound = 4 * min(width, height)
        grid[covered] = np.clip(np.round(mean), -bound, bound).astype(np.int16)
    return grid, resampled, dropped


def motion_compensate(ref: np.ndarray, grid_qp: np.ndarray) -> np.ndarray:
    """MVD1 fetch rule: each pixel samples ref at its position minus its
    block's vector (nearest pel, half away from zero, clamped)."""
    h, w = ref.shape
    px = grid_qp.astype(np.float64) / 4.0
    mv_int = np.trunc(px + np.copysign(0.5, px)).astype(np.int64)
    dx = np.repeat(np.repeat(mv_int[:, :, 0], BLOCK, axis=0), BLOCK, axis=1)[:h, :w]
    dy = np.repeat(np.repeat(mv_int[:, :, 1], BLOCK, axis=0), BLOCK, axis=1)[:h, :w]
    xs = np.clip(np.arange(w)[None, :] - dx, 0, w - 1)
    ys = np.clip(np.arange(h)[:, None] - dy, 0, h - 1)
    return ref[ys, xs]


def resize_luma(luma: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize to (height, width)."""
    h, w = luma.shape
    if (h, w) == (height, width):
        return luma
    ys = np.linspace(0, h - 1, height)
    xs = np.linspace(0, w - 1, width)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ay = (ys - y0)[:, None]
    ax = (xs - x0)[None, :]
    f = luma.astype(np.float64)
    top = f[np.ix_(y0, x0)] * (1 - ax) + f[np.ix_(y0, x1)] * ax
    bot = f[np.ix_(y1, x0)] * (1 - ax) + f[np.ix_(y1, x1)] * ax
    return np.round(top * (1 - ay) + bot * ay).astype(np.uint8)


def _write_mvd1(path: Path, width: int, height: int, gop_size: int, frames: list) -> int:
    """Serialize (is_iframe, luma, grid, residual) records per the MVD1 layout."""
    by, bx = grid_shape(width, height)
    with open(path, "wb") as fh:
        n = fh.write(struct.pack("<4sIIIII", b"MVD1", 1, width, height, len(frames), gop_size))
        for is_iframe, luma, grid, residual in frames:
            if is_iframe:
                n += fh.write(struct.pack("<B", 0))
                n += fh.write(luma.tobytes())
            else:
                n += fh.write(struct.pack("<BHH", 1, bx, by))
                n += fh.write(grid.astype("<i2").tobytes())
                n += fh.write(residual.astype("<i2").tobytes())
    return n


def ingest(
    video_path: str | Path,
    out_path: str | Path,
    gop_cap: int = 0,
    resize: tuple[int, int] | None = None,
    max_frames: int = 0,
    tool_output: ToolOutput | None = None,
) -> IngestReport:
    """Demux/decode a video and write an MVD1 dump; returns the report.

    B-frames are re-expressed against the previous decoded frame (their
    future-referenced vectors are dropped); residuals are recomputed from
    decoded luma so the dump reconstructs exactly.  ``gop_cap`` forces a new
    I-frame after that many frames in a GOP; ``resize`` rescales frames and
    vectors to WxH.
    """
    report = IngestReport(source=str(video_path))
    tool = tool_output if tool_output is not None else run_exporter(video_path, max_frames)
    if tool.codec not in MV_EXPORT_CODECS:
        raise IngestCapabilityError(
            f"codec {tool.codec!r} does not support motion-vector export; "
            f"supported: {', '.join(sorted(MV_EXPORT_CODECS))}"
        )
    if gop_cap < 0:
        raise IngestError(f"gop_cap must be >= 0, got {gop_cap}")

    if resize is not None:
        width, height = resize
        if width < BLOCK or height < BLOCK:
            raise IngestError(f"resize target {width}x{height} is below one macroblock")
        scale = (width / tool.width, height / tool.height)
    else:
        width, height = tool.width, tool.height
        scale = (1.0, 1.0)

    out_frames = []
    prev_luma: np.ndarray | None = None
    gop_len = 0
    max_gop = 1
    dropped_future = 0
    clamp_warned = False
    for idx, fr in enumerate(tool.frames):
        luma = resize_luma(fr.luma, width, height) if resize else fr.luma
        starts_gop = fr.pict == "I" or fr.key or prev_luma is None
        if idx == 0 and not starts_gop:
            report.warnings.append("first frame was not intra-coded; stored as I-frame")
            starts_gop = True
        if gop_cap and gop_len >= gop_cap:
            starts_gop = True
        if starts_gop:
            out_frames.append((True, luma, None, None))
            gop_len = 1
        else:
            grid, resampled, dropped = resample_mvs(fr.mvs, width, height, scale)
            residual = luma.astype(np.int16) - motion_compensate(prev_luma, grid).astype(np.int16)
            out_frames.append((False, None, grid, residual))
            report.mv_blocks_resampled += resampled
            dropped_future += dropped
            if fr.pict == "B":
                report.b_frames_remapped += 1
            gop_len += 1
        max_gop = max(max_gop, gop_len)
        prev_luma = luma

    if dropped_future:
        report.warnings.append(
            f"dropped {dropped_future} future-referenced vectors from bidirectional frames"
        )
    if not clamp_warned and any(
        g is not None and np.abs(g).max() >= 4 * min(width, height) for _, _, g, _ in out_frames
    ):
        report.warnings.append("some vectors were clamped to the dump magnitude bound")

    _write_mvd1(Path(out_path), width, height, max_gop, out_frames)
    report.frames_written = len(out_frames)
    return report
