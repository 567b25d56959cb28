"""Build and run the bundled libavcodec exporter, and parse its output."""

from __future__ import annotations

import hashlib
import os
import struct
import subprocess
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class IngestError(Exception):
    """Source cannot be ingested (unreadable, undecodable, tool failure)."""


class IngestCapabilityError(IngestError):
    """The toolchain cannot provide what ingestion needs (e.g. MV export)."""


# Codecs whose libavcodec decoders fill motion-vector side data.
MV_EXPORT_CODECS = frozenset(
    {
        "mpeg1video",
        "mpeg2video",
        "mpeg4",
        "msmpeg4v1",
        "msmpeg4v2",
        "msmpeg4v3",
        "h263",
        "h263p",
        "h264",
        "flv1",
        "wmv1",
        "wmv2",
        "svq1",
        "svq3",
        "rv10",
        "rv20",
        "vp3",
        "vp6",
        "snow",
    }
)


def _cache_dir() -> Path:
    base = os.environ.get("XDG_CACHE_HOME")
    root = Path(base) if base else Path.home() / ".cache"
    return root / "mvd-ingest"


def build_exporter(cache_dir: Path | None = None) -> Path:
    """Compile mvexport against system libav* (cached by source hash)."""
    source = resources.files("mvd_ingest").joinpath("mvexport.c").read_bytes()
    key = hashlib.sha256(source).hexdigest()[:16]
    out_dir = cache_dir or _cache_dir()
    binary = out_dir / f"mvexport-{key}"
    if binary.exists():
        return binary
    out_dir.mkdir(parents=True, exist_ok=True)
    src_path = out_dir / f"mvexport-{key}.c"
    src_path.write_bytes(source)
    try:
        flags = subprocess.run(
            ["pkg-config", "--cflags", "--libs", "libavformat", "libavcodec", "libavutil"],
            check=True,
            capture_output=True,
            text=True,
        ).stdout.split()
    except (OSError, subprocess.CalledProcessError) as e:
        raise IngestCapabilityError(
            f"libavcodec development libraries not found (pkg-config failed: {e})"
        ) from None
    cmd = ["cc", "-O2", str(src_path), "-o", str(binary), *flags]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise IngestCapabilityError(f"building mvexport failed:\n{proc.stderr}")
    return binary


@dataclass
class ToolFrame:
    pict: str  # 'I', 'P', 'B', or '?'
    key: bool
    luma: np.ndarray  # (h, w) uint8
    mvs: np.ndarray  # (n, 8) int32: source, w, h, dst_x, dst_y, motion_x, motion_y, motion_scale


@dataclass
class ToolOutput:
    codec: str
    width: int
    height: int
    frames: list[ToolFrame]


def run_exporter(video_path: str | Path, max_frames: int = 0,
                 cache_dir: Path | None = None) -> ToolOutput:
    """Decode a video through mvexport and parse its frame/MV stream."""
    binary = build_exporter(cache_dir)
    if not Path(video_path).exists():
        raise IngestError(f"{video_path}: no such file")
    cmd = [str(binary), str(video_path)]
    if max_frames:
        cmd.append(str(max_frames))
    proc = subprocess.run(cmd, capture_output=True)
    if proc.returncode != 0:
        detail = proc.stderr.decode(errors="replace").strip()
        raise IngestError(f"{video_path}: toolchain could not decode ({detail})")
    return parse_tool_stream(proc.stdout, str(video_path))


def parse_tool_stream(data: bytes, source: str = "<stream>") -> ToolOutput:
    if len(data) < 44 or data[:4] != b"MVX1":
        raise IngestError(f"{source}: exporter produced no usable output")
    codec = data[4:36].split(b"\x00", 1)[0].decode()
    width, height = struct.unpack_from("<ii", data, 36)
    if width <= 0 or height <= 0:
        raise IngestError(f"{source}: bad frame size {width}x{height}")
    pos = 44
    plane = width * height
    frames: list[ToolFrame] = []
    while pos < len(data):
        if pos + 8 > len(data):
            raise IngestError(f"{source}: truncated exporter stream at byte {pos}")
        pict = chr(data[pos])
        key = data[pos + 1] != 0
        (mv_count,) = struct.unpack_from("<i", data, pos + 4)
        pos += 8
        if mv_count < 0 or pos + plane + 32 * mv_count > len(data):
            raise IngestError(f"{source}: truncated exporter stream at byte {pos}")
        luma = np.frombuffer(data, dtype=np.uint8, count=plane, offset=pos).reshape(
            height, width
        ).copy()
        pos += plane
        mvs = (
            np.frombuffer(data, dtype="<i4", count=8 * mv_count, offset=pos)
            .reshape(mv_count, 8)
            .astype(np.int32)
        )
        pos += 32 * mv_count
        frames.append(ToolFrame(pict=pict, key=key, luma=luma, mvs=mvs))
    if not frames:
        raise IngestError(f"{source}: exporter produced no frames")
    return ToolOutput(codec=codec, width=width, height=height, frames=frames)
