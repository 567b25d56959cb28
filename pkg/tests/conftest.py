import numpy as np
import pytest

from mvrefine.model import (
    DumpHeader,
    FrameRecord,
    FrameType,
    GopStream,
    MotionVectorField,
    mv_grid_shape,
)


def random_stream(rng, width, height, gop_sizes):
    """Random structurally-valid dump content (not necessarily decodable-lossless)."""
    by, bx = mv_grid_shape(width, height)
    bound = 4 * min(width, height)
    frames = []
    for size in gop_sizes:
        frames.append(
            FrameRecord(
                FrameType.I,
                luma=rng.integers(0, 256, (height, width), dtype=np.uint8),
            )
        )
        for _ in range(size - 1):
            vectors = rng.integers(-bound, bound + 1, (by, bx, 2)).astype(np.int16)
            residual = rng.integers(-255, 256, (height, width)).astype(np.int16)
            frames.append(FrameRecord(FrameType.P, mv=MotionVectorField(vectors), residual=residual))
    header = DumpHeader(width, height, len(frames), gop_size=max(gop_sizes))
    return header, frames


def random_gop(rng, width, height, n_pframes, max_qp=8):
    """Random GOP with bounded quarter-pel vectors, for tracing tests."""
    by, bx = mv_grid_shape(width, height)
    gop = GopStream(iframe=rng.integers(0, 256, (height, width), dtype=np.uint8))
    for _ in range(n_pframes):
        vectors = rng.integers(-max_qp, max_qp + 1, (by, bx, 2)).astype(np.int16)
        residual = rng.integers(-32, 33, (height, width)).astype(np.int16)
        gop.pframes.append((MotionVectorField(vectors), residual))
    return gop


def frames_equal(a, b):
    if len(a) != len(b):
        return False
    for fa, fb in zip(a, b):
        if fa.frame_type != fb.frame_type:
            return False
        if fa.frame_type == FrameType.I:
            if not np.array_equal(fa.luma, fb.luma):
                return False
        else:
            if not np.array_equal(fa.mv.vectors, fb.mv.vectors):
                return False
            if not np.array_equal(fa.residual, fb.residual):
                return False
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
