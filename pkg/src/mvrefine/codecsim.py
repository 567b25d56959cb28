"""Block-matching encoder and exact decoder for desk-scale ground-truth streams.

The encoder does exhaustive integer-pel SAD search on 16x16 blocks against the
previous reconstructed frame and stores residuals losslessly, so that
``decode_gop(encode_gop(x)) == x`` bit-exactly.  Reconstruction follows the
compressed-domain model: pixel ``p`` of frame ``t`` is the previous frame
sampled at ``p - mv`` plus the residual, clamped to [0, 255].
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import (
    MACROBLOCK,
    GopStream,
    MotionVectorField,
    mv_grid_shape,
    round_half_away,
)


def _as_sequence(frames: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    arr = np.asarray(frames)
    if arr.ndim != 3:
        raise ValueError(f"expected a sequence of 2-D luma planes, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"luma planes must be uint8, got {arr.dtype}")
    if arr.shape[0] < 1:
        raise ValueError("need at least one frame")
    return arr


def _candidate_order(search_range: int) -> list[tuple[int, int]]:
    # Pre-sorted by the tie-break key so the first minimum wins the search.
    cands = [
        (dx, dy)
        for dy in range(-search_range, search_range + 1)
        for dx in range(-search_range, search_range + 1)
    ]
    cands.sort(key=lambda c: (abs(c[0]) + abs(c[1]), c[1], c[0]))
    return cands


def _block_mv_int(mv: MotionVectorField) -> tuple[np.ndarray, np.ndarray]:
    """Per-block integer-pel offsets, quarter-pel rounded half away from zero."""
    v = mv.vectors.astype(np.float64) / 4.0
    r = round_half_away(v).astype(np.int64)
    return r[:, :, 0], r[:, :, 1]


def motion_compensate(ref: np.ndarray, mv: MotionVectorField) -> np.ndarray:
    """Predict a frame from ``ref`` by fetching each pixel at its block's offset.

    Source positions are clamped to the frame, which matches edge replication
    of out-of-bounds reference pixels.
    """
    h, w = ref.shape
    dxi, dyi = _block_mv_int(mv)
    dx_full = np.repeat(np.repeat(dxi, MACROBLOCK, axis=0), MACROBLOCK, axis=1)[:h, :w]
    dy_full = np.repeat(np.repeat(dyi, MACROBLOCK, axis=0), MACROBLOCK, axis=1)[:h, :w]
    xs = np.clip(np.arange(w)[None, :] - dx_full, 0, w - 1)
    ys = np.clip(np.arange(h)[:, None] - dy_full, 0, h - 1)
    return ref[ys, xs]


def encode_gop(frames: Sequence[np.ndarray] | np.ndarray, search_range: int = 16) -> GopStream:
    """Encode a frame slice as one GOP: frame 0 intra, the rest predicted.

    Each 16x16 block gets the integer-pel displacement minimizing SAD over
    +-search_range against the previous reconstructed frame; ties go to the
    smallest |dx|+|dy|, then smallest dy, then smallest dx.  Vectors are
    stored in quarter-pel units and residuals are exact.
    """
    arr = _as_sequence(frames)
    if search_range < 0:
        raise ValueError(f"search_range must be >= 0, got {search_range}")
    n, h, w = arr.shape
    by, bx = mv_grid_shape(w, h)
    row_bounds = np.arange(0, h, MACROBLOCK)
    col_bounds = np.arange(0, w, MACROBLOCK)
    cands = _candidate_order(search_range)

    gop = GopStream(iframe=arr[0].copy())
    recon = arr[0]
    for t in range(1, n):
        cur = arr[t].astype(np.int32)
        padded = np.pad(recon, search_range, mode="edge").astype(np.int32)
        sr = search_range
        best_sad = None
        best_dx = np.zeros((by, bx), dtype=np.int16)
        best_dy = np.zeros((by, bx), dtype=np.int16)
        for dx, dy in cands:
            shifted = padded[sr - dy : sr - dy + h, sr - dx : sr - dx + w]
            diff = np.abs(cur - shifted)
            sad = np.add.reduceat(np.add.reduceat(diff, row_bounds, axis=0), col_bounds, axis=1)
            if best_sad is None:
                best_sad = sad
                best_dx.fill(dx)
                best_dy.fill(dy)
            else:
                better = sad < best_sad
                if better.any():
                    best_sad = np.where(better, sad, best_sad)
                    best_dx[better] = dx
                    best_dy[better] = dy
        vectors = np.stack([best_dx, best_dy], axis=-1).astype(np.int16) * 4
        mv = MotionVectorField(vectors)
        pred = motion_compensate(recon, mv)
        residual = arr[t].astype(np.int16) - pred.astype(np.int16)
        gop.pframes.append((mv, residual))
        recon = np.clip(pred.astype(np.int32) + residual, 0, 255).astype(np.uint8)
    return gop


def decode_gop(gop: GopStream) -> np.ndarray:
    """Reconstruct the full frame slice of a GOP; returns uint8 (n, h, w)."""
    frames = np.empty((gop.frame_count(), gop.height, gop.width), dtype=np.uint8)
    frames[0] = gop.iframe
    cur = gop.iframe
    for t, (mv, residual) in enumerate(gop.pframes, start=1):
        pred = motion_compensate(cur, mv)
        cur = np.clip(pred.astype(np.int32) + residual, 0, 255).astype(np.uint8)
        frames[t] = cur
    return frames


def inject_mv_noise(
    gop: GopStream,
    fraction: float,
    magnitude: int,
    seed: int,
    mask: np.ndarray | Sequence[np.ndarray] | None = None,
) -> GopStream:
    """Replace a fraction of the GOP's motion vectors with random ones.

    Replaced vectors get components drawn uniformly from
    [-magnitude, magnitude] quarter-pel.  Residuals are left untouched, so the
    stream becomes lossy, mimicking rate-distortion-driven vectors.  ``mask``
    optionally restricts eligible blocks: one boolean (blocks_y, blocks_x)
    grid shared by all P-frames, or one per P-frame.  Deterministic per seed.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be within [0, 1], got {fraction}")
    if magnitude < 0:
        raise ValueError(f"magnitude must be >= 0, got {magnitude}")

    n_p = len(gop.pframes)
    if mask is None:
        masks = [np.ones(gop.pframes[t][0].vectors.shape[:2], dtype=bool) for t in range(n_p)]
    elif isinstance(mask, np.ndarray):
        masks = [mask.astype(bool)] * n_p
    else:
        masks = [np.asarray(m, dtype=bool) for m in mask]
        if len(masks) != n_p:
            raise ValueError(f"expected {n_p} masks, got {len(masks)}")

    eligible = []  # (pframe index, flat block index)
    for t in range(n_p):
        flat = np.flatnonzero(masks[t].ravel())
        eligible.extend((t, int(i)) for i in flat)

    rng = np.random.default_rng(seed)
    k = int(round(fraction * len(eligible)))
    picked = rng.choice(len(eligible), size=k, replace=False) if k else np.empty(0, dtype=int)
    noise = rng.integers(-magnitude, magnitude + 1, size=(k, 2)).astype(np.int16)

    out = GopStream(iframe=gop.iframe.copy())
    vecs = [mv.vectors.copy() for mv, _ in gop.pframes]
    for j, idx in enumerate(picked):
        t, flat = eligible[idx]
        vecs[t].reshape(-1, 2)[flat] = noise[j]
    out.pframes = [
        (MotionVectorField(vecs[t]), residual.copy())
        for t, (_, residual) in enumerate(gop.pframes)
    ]
    return out
