"""MVD1 dump container: bit-exact serialization of frames, MV grids and residuals.

Layout (all integers little-endian):

    magic[4] = "MVD1"
    version  u32 (= 1)
    width    u32
    height   u32
    frame_count u32
    gop_size u32
    frame_count records:
        frame_type u8 (0 = I, 1 = P)
        I: width*height luma bytes, row-major
        P: blocks_x u16, blocks_y u16,
           blocks_x*blocks_y pairs (dx i16, dy i16), row-major, quarter-pel,
           width*height residual i16, row-major

The parser is strict: malformed input is rejected, never repaired, and
trailing bytes after the declared records are an error.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .model import DumpHeader, FrameRecord, FrameType, GopStream, MotionVectorField

MAGIC = b"MVD1"
HEADER_FMT = "<4sIIIII"
HEADER_SIZE = struct.calcsize(HEADER_FMT)


class DumpError(Exception):
    """Base class for dump container errors."""


class DumpFormatError(DumpError):
    """Bad magic, version, or container framing."""


class DumpTruncationError(DumpError):
    """Input ends before a declared payload; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class DumpValidationError(DumpError):
    """Structurally well-formed input violating a type invariant."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index


def _check_structure(header: DumpHeader, frames: Sequence[FrameRecord]) -> None:
    try:
        header.validate()
    except ValueError as e:
        raise DumpValidationError(str(e)) from None
    if len(frames) != header.frame_count:
        raise DumpValidationError(
            f"header declares {header.frame_count} frames, got {len(frames)}"
        )
    if frames[0].frame_type != FrameType.I:
        raise DumpValidationError("first frame must be an I-frame", frame_index=0)
    for i, fr in enumerate(frames):
        try:
            fr.validate(header.width, header.height, index=i)
        except ValueError as e:
            raise DumpValidationError(str(e), frame_index=i) from None


def write_dump(header: DumpHeader, frames: Sequence[FrameRecord], sink: BinaryIO) -> int:
    """Serialize a dump to ``sink``; returns the number of bytes written."""
    _check_structure(header, frames)
    n = sink.write(
        struct.pack(
            HEADER_FMT,
            MAGIC,
            header.version,
            header.width,
            header.height,
            header.frame_count,
            header.gop_size,
        )
    )
    for fr in frames:
        n += sink.write(struct.pack("<B", int(fr.frame_type)))
        if fr.frame_type == FrameType.I:
            n += sink.write(fr.luma.tobytes())
        else:
            mv = fr.mv
            n += sink.write(struct.pack("<HH", mv.blocks_x, mv.blocks_y))
            n += sink.write(mv.vectors.astype("<i2", copy=False).tobytes())
            n += sink.write(fr.residual.astype("<i2", copy=False).tobytes())
    return n


def dump_bytes(header: DumpHeader, frames: Sequence[FrameRecord]) -> bytes:
    import io

    buf = io.BytesIO()
    write_dump(header, frames, buf)
    return buf.getvalue()


class _Reader:
    """Offset-tracked reader over an in-memory buffer; never reads past the end."""

    def __init__(self, data: bytes):
        self.data = data
        self.view = memoryview(data)
        self.offset = 0

    def take(self, count: int, what: str) -> memoryview:
        if count < 0 or self.offset + count > len(self.data):
            raise DumpTruncationError(f"truncated {what}", offset=self.offset)
        out = self.view[self.offset : self.offset + count]
        self.offset += count
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        raw = self.take(count * itemsize, what)
        return np.frombuffer(raw, dtype=dtype, count=count).copy()


def read_dump(source: BinaryIO | bytes) -> tuple[DumpHeader, list[FrameRecord]]:
    """Parse an MVD1 dump from a byte buffer or readable binary stream."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    r = _Reader(bytes(data))

    magic, version, width, height, frame_count, gop_size = r.unpack(HEADER_FMT, "header")
    if magic != MAGIC:
        raise DumpFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != 1:
        raise DumpFormatError(f"unsupported version {version}")
    header = DumpHeader(width, height, frame_count, gop_size)
    try:
        header.validate()
    except ValueError as e:
        raise DumpValidationError(str(e)) from None

    frames: list[FrameRecord] = []
    for i in range(frame_count):
        (ftype,) = r.unpack("<B", f"frame {i} type")
        if ftype == FrameType.I:
            luma = r.array(np.uint8, width * height, f"frame {i} luma")
            frames.append(FrameRecord(FrameType.I, luma=luma.reshape(height, width)))
        elif ftype == FrameType.P:
            bx, by = r.unpack("<HH", f"frame {i} mv grid size")
            vecs = r.array("<i2", bx * by * 2, f"frame {i} motion vectors")
            mv = MotionVectorField(vecs.astype(np.int16).reshape(by, bx, 2))
            res = r.array("<i2", width * height, f"frame {i} residual")
            frames.append(
                FrameRecord(
                    FrameType.P,
                    mv=mv,
                    residual=res.astype(np.int16).reshape(height, width),
                )
            )
        else:
            raise DumpValidationError(f"unknown frame type {ftype} (frame {i})", frame_index=i)

    if r.offset != len(r.data):
        raise DumpFormatError(
            f"{len(r.data) - r.offset} trailing bytes after frame {frame_count - 1}"
        )
    _check_structure(header, frames)
    return header, frames


def split_gops(frames: Sequence[FrameRecord]) -> list[GopStream]:
    """Split a frame sequence at I-frames into GOPs (I plus following P-frames)."""
    if not frames:
        raise DumpValidationError("empty frame sequence")
    if frames[0].frame_type != FrameType.I:
        raise DumpValidationError("first frame must be an I-frame", frame_index=0)
    gops: list[GopStream] = []
    for fr in frames:
        if fr.frame_type == FrameType.I:
            gops.append(GopStream(iframe=fr.luma))
        else:
            gops[-1].pframes.append((fr.mv, fr.residual))
    return gops


def merge_gops(gops: Iterable[GopStream]) -> list[FrameRecord]:
    """Inverse of :func:`split_gops`: flatten GOPs back to a frame sequence."""
    frames: list[FrameRecord] = []
    for gop in gops:
        frames.append(FrameRecord(FrameType.I, luma=gop.iframe))
        for mv, residual in gop.pframes:
            frames.append(FrameRecord(FrameType.P, mv=mv, residual=residual))
    return frames
