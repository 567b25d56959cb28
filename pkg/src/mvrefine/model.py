"""Shared data types for the motion-vector refinement pipeline.

Conventions used throughout the package:

* luma planes are ``uint8`` arrays of shape ``(h, w)``, row-major;
* motion vectors are stored in quarter-pel units on a 16x16 block grid,
  ``(dx, dy)`` with ``dx`` along x (columns) and ``dy`` along y (rows);
* a vector ``(dx, dy)`` on frame ``t`` means pixel ``p`` of frame ``t``
  references position ``p - (dx, dy)`` in frame ``t - 1``;
* flow fields are per-pixel displacements in pixel units, ``float64``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

MACROBLOCK = 16


class FrameType(IntEnum):
    I = 0
    P = 1


def mv_grid_shape(width: int, height: int, block: int = MACROBLOCK) -> tuple[int, int]:
    """(blocks_y, blocks_x) covering a width x height frame, ceiling division."""
    return (-(-height // block), -(-width // block))


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    """Round to nearest integer, halves away from zero (0.5 -> 1, -0.5 -> -1)."""
    x = np.asarray(x)
    return np.trunc(x + np.copysign(0.5, x))


@dataclass(frozen=True)
class DumpHeader:
    """Header of an MVD1 dump: frame geometry and nominal GOP size."""

    width: int
    height: int
    frame_count: int
    gop_size: int = 12
    version: int = 1

    def validate(self) -> None:
        if self.version != 1:
            raise ValueError(f"unsupported dump version {self.version}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid frame size {self.width}x{self.height}")
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.gop_size < 1:
            raise ValueError(f"gop_size must be >= 1, got {self.gop_size}")


@dataclass
class MotionVectorField:
    """Per-block displacements in quarter-pel units.

    ``vectors`` has shape ``(blocks_y, blocks_x, 2)`` and dtype ``int16``;
    ``vectors[by, bx]`` is ``(dx, dy)`` for the block at grid cell (bx, by).
    """

    vectors: np.ndarray

    @property
    def blocks_y(self) -> int:
        return self.vectors.shape[0]

    @property
    def blocks_x(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def zeros(cls, blocks_y: int, blocks_x: int) -> "MotionVectorField":
        return cls(np.zeros((blocks_y, blocks_x, 2), dtype=np.int16))

    def validate(self, width: int, height: int) -> None:
        if self.vectors.ndim != 3 or self.vectors.shape[2] != 2:
            raise ValueError(f"mv grid must be (by, bx, 2), got {self.vectors.shape}")
        expect = mv_grid_shape(width, height)
        if (self.blocks_y, self.blocks_x) != expect:
            raise ValueError(
                f"mv grid {self.blocks_y}x{self.blocks_x} does not match "
                f"expected {expect[0]}x{expect[1]} for {width}x{height}"
            )
        bound = 4 * min(width, height)
        peak = int(np.abs(self.vectors).max()) if self.vectors.size else 0
        if peak > bound:
            raise ValueError(f"motion vector magnitude {peak} exceeds bound {bound}")


@dataclass
class FrameRecord:
    """One decoded dump record: an I-frame plane or a P-frame (mv, residual) pair."""

    frame_type: FrameType
    luma: np.ndarray | None = None
    mv: MotionVectorField | None = None
    residual: np.ndarray | None = None

    def validate(self, width: int, height: int, index: int | None = None) -> None:
        where = "" if index is None else f" (frame {index})"
        if self.frame_type == FrameType.I:
            if self.luma is None or self.mv is not None or self.residual is not None:
                raise ValueError(f"I-frame must carry exactly a luma plane{where}")
            if self.luma.shape != (height, width) or self.luma.dtype != np.uint8:
                raise ValueError(f"bad luma plane {self.luma.shape} {self.luma.dtype}{where}")
        elif self.frame_type == FrameType.P:
            if self.luma is not None or self.mv is None or self.residual is None:
                raise ValueError(f"P-frame must carry exactly (mv, residual){where}")
            try:
                self.mv.validate(width, height)
            except ValueError as e:
                raise ValueError(f"{e}{where}") from None
            if self.residual.shape != (height, width) or self.residual.dtype != np.int16:
                raise ValueError(
                    f"bad residual plane {self.residual.shape} {self.residual.dtype}{where}"
                )
        else:
            raise ValueError(f"unknown frame type {self.frame_type}{where}")


@dataclass
class GopStream:
    """One group of pictures: an I-frame plus its dependent P-frames."""

    iframe: np.ndarray
    pframes: list[tuple[MotionVectorField, np.ndarray]] = field(default_factory=list)

    @property
    def height(self) -> int:
        return self.iframe.shape[0]

    @property
    def width(self) -> int:
        return self.iframe.shape[1]

    def frame_count(self) -> int:
        return 1 + len(self.pframes)


@dataclass
class FlowField:
    """Per-pixel displacement field; u along x, v along y, in pixels."""

    u: np.ndarray
    v: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    def copy(self) -> "FlowField":
        return FlowField(self.u.copy(), self.v.copy())

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


@dataclass
class TraceField:
    """Per-pixel source coordinates in the I-frame, clamped to frame bounds."""

    src_x: np.ndarray
    src_y: np.ndarray


@dataclass
class ConfidenceMap:
    """Per-pixel scalar confidence.

    ``normalized`` marks values on the per-frame-normalized [0, 1] scale
    (the output of :func:`mvrefine.confidence.normalize` or any stage that
    preserves that scale; later stages may lower the maximum below 1).
    """

    values: np.ndarray
    normalized: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape
