"""Minimal binary PGM (P5) / PPM (P6) readers and writers, 8-bit only."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # Skip whitespace and '#' comments between header tokens.
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("unexpected end of PNM header")
    return data[start:pos], pos


def _read_pnm(path: str | Path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    tok, pos = _read_token(data, 0)
    if tok != magic:
        raise ValueError(f"{path}: expected {magic.decode()} file, got {tok!r}")
    dims = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        dims.append(int(tok))
    width, height, maxval = dims
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PNM supported, maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    count = width * height * channels
    raster = data[pos : pos + count]
    if len(raster) != count:
        raise ValueError(f"{path}: truncated raster, expected {count} bytes")
    arr = np.frombuffer(raster, dtype=np.uint8).copy()
    shape = (height, width) if channels == 1 else (height, width, channels)
    return arr.reshape(shape)


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM into a (h, w) uint8 array."""
    return _read_pnm(path, b"P5", 1)


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM into a (h, w, 3) uint8 array."""
    return _read_pnm(path, b"P6", 3)


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"PGM needs a 2-D uint8 array, got {img.shape} {img.dtype}")
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"PPM needs a (h, w, 3) uint8 array, got {img.shape} {img.dtype}")
    h, w = img.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())
