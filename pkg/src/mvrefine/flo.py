"""Middlebury-style .flo flow files: magic f32 202021.25, w i32, h i32,
then row-major interleaved (u, v) float32 pairs."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import FlowField

FLO_MAGIC = 202021.25


def write_flo(path: str | Path, flow: FlowField) -> None:
    h, w = flow.shape
    data = np.empty((h, w, 2), dtype="<f4")
    data[:, :, 0] = flow.u
    data[:, :, 1] = flow.v
    Path(path).write_bytes(struct.pack("<fii", FLO_MAGIC, w, h) + data.tobytes())


def read_flo(path: str | Path) -> FlowField:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ValueError(f"{path}: truncated .flo header")
    magic, w, h = struct.unpack("<fii", raw[:12])
    if magic != FLO_MAGIC:
        raise ValueError(f"{path}: bad .flo magic {magic}")
    count = w * h * 2
    data = np.frombuffer(raw[12:], dtype="<f4")
    if data.size != count:
        raise ValueError(f"{path}: expected {count} floats, got {data.size}")
    uv = data.reshape(h, w, 2).astype(np.float64)
    return FlowField(u=uv[:, :, 0], v=uv[:, :, 1])
