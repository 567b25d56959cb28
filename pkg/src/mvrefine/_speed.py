"""Optional numba kernels for the refinement hot loops.

Importing this module requires numba; callers fall back to the numpy paths
when it is missing.  Both paths compute identical IEEE-double results.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BLOCK_SHIFT = 4  # log2 of the 16-px macroblock edge


@njit(cache=True)
def _walk(gx, gy, width, height, target, u, v, sx, sy):
    # Four interleaved pixel chains per iteration: each pixel's walk is a
    # serial dependency (position -> block lookup -> position), so
    # independent chains are what keeps the load ports busy.
    w1 = width - 1.0
    h1 = height - 1.0
    for y in range(height):
        fy = float(y)
        x = 0
        while x + 4 <= width:
            cx0 = float(x)
            cx1 = float(x + 1)
            cx2 = float(x + 2)
            cx3 = float(x + 3)
            cy0 = fy
            cy1 = fy
            cy2 = fy
            cy3 = fy
            for t in range(target, -1, -1):
                b0x = int(min(max(cx0, 0.0), w1) + 0.5) >> BLOCK_SHIFT
                b0y = int(min(max(cy0, 0.0), h1) + 0.5) >> BLOCK_SHIFT
                b1x = int(min(max(cx1, 0.0), w1) + 0.5) >> BLOCK_SHIFT
                b1y = int(min(max(cy1, 0.0), h1) + 0.5) >> BLOCK_SHIFT
                b2x = int(min(max(cx2, 0.0), w1) + 0.5) >> BLOCK_SHIFT
                b2y = int(min(max(cy2, 0.0), h1) + 0.5) >> BLOCK_SHIFT
                b3x = int(min(max(cx3, 0.0), w1) + 0.5) >> BLOCK_SHIFT
                b3y = int(min(max(cy3, 0.0), h1) + 0.5) >> BLOCK_SHIFT
                cx0 -= gx[t, b0y, b0x]
                cy0 -= gy[t, b0y, b0x]
                cx1 -= gx[t, b1y, b1x]
                cy1 -= gy[t, b1y, b1x]
                cx2 -= gx[t, b2y, b2x]
                cy2 -= gy[t, b2y, b2x]
                cx3 -= gx[t, b3y, b3x]
                cy3 -= gy[t, b3y, b3x]
            u[y, x] = x - cx0
            u[y, x + 1] = x + 1 - cx1
            u[y, x + 2] = x + 2 - cx2
            u[y, x + 3] = x + 3 - cx3
            v[y, x] = fy - cy0
            v[y, x + 1] = fy - cy1
            v[y, x + 2] = fy - cy2
            v[y, x + 3] = fy - cy3
            sx[y, x] = min(max(cx0, 0.0), w1)
            sx[y, x + 1] = min(max(cx1, 0.0), w1)
            sx[y, x + 2] = min(max(cx2, 0.0), w1)
            sx[y, x + 3] = min(max(cx3, 0.0), w1)
            sy[y, x] = min(max(cy0, 0.0), h1)
            sy[y, x + 1] = min(max(cy1, 0.0), h1)
            sy[y, x + 2] = min(max(cy2, 0.0), h1)
            sy[y, x + 3] = min(max(cy3, 0.0), h1)
            x += 4
        while x < width:
            cx = float(x)
            cy = fy
            for t in range(target, -1, -1):
                bx = int(min(max(cx, 0.0), w1) + 0.5) >> BLOCK_SHIFT
                by = int(min(max(cy, 0.0), h1) + 0.5) >> BLOCK_SHIFT
                cx -= gx[t, by, bx]
                cy -= gy[t, by, bx]
            u[y, x] = x - cx
            v[y, x] = fy - cy
            sx[y, x] = min(max(cx, 0.0), w1)
            sy[y, x] = min(max(cy, 0.0), h1)
            x += 1


def walk_kernel(grids: np.ndarray, width: int, height: int, target: int):
    """Per-pixel backward walk through quarter-pel MV grids.

    grids: int16 (n_pframes, blocks_y, blocks_x, 2).  Returns (u, v, sx, sy)
    where (u, v) is total displacement and (sx, sy) the clamped source.
    """
    gx = np.ascontiguousarray(grids[:, :, :, 0], dtype=np.float64) / 4.0
    gy = np.ascontiguousarray(grids[:, :, :, 1], dtype=np.float64) / 4.0
    u = np.empty((height, width), dtype=np.float64)
    v = np.empty((height, width), dtype=np.float64)
    sx = np.empty((height, width), dtype=np.float64)
    sy = np.empty((height, width), dtype=np.float64)
    _walk(gx, gy, width, height, target, u, v, sx, sy)
    return u, v, sx, sy


@njit(cache=True)
def median3_kernel(a):
    """3x3 median with edge replication via a branch-free exchange network."""
    h, w = a.shape
    out = np.empty_like(a)
    for y in range(h):
        y0 = y - 1 if y > 0 else 0
        y2 = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            x0 = x - 1 if x > 0 else 0
            x2 = x + 1 if x < w - 1 else w - 1
            p0 = a[y0, x0]
            p1 = a[y0, x]
            p2 = a[y0, x2]
            p3 = a[y, x0]
            p4 = a[y, x]
            p5 = a[y, x2]
            p6 = a[y2, x0]
            p7 = a[y2, x]
            p8 = a[y2, x2]
            # Paeth's median-of-9 network (19 compare-exchanges)
            p1, p2 = min(p1, p2), max(p1, p2)
            p4, p5 = min(p4, p5), max(p4, p5)
            p7, p8 = min(p7, p8), max(p7, p8)
            p0, p1 = min(p0, p1), max(p0, p1)
            p3, p4 = min(p3, p4), max(p3, p4)
            p6, p7 = min(p6, p7), max(p6, p7)
            p1, p2 = min(p1, p2), max(p1, p2)
            p4, p5 = min(p4, p5), max(p4, p5)
            p7, p8 = min(p7, p8), max(p7, p8)
            p0, p3 = min(p0, p3), max(p0, p3)
            p5, p8 = min(p5, p8), max(p5, p8)
            p4, p7 = min(p4, p7), max(p4, p7)
            p3, p6 = min(p3, p6), max(p3, p6)
            p1, p4 = min(p1, p4), max(p1, p4)
            p2, p5 = min(p2, p5), max(p2, p5)
            p4, p7 = min(p4, p7), max(p4, p7)
            p4, p2 = min(p4, p2), max(p4, p2)
            p6, p4 = min(p6, p4), max(p6, p4)
            p4, p2 = min(p4, p2), max(p4, p2)
            out[y, x] = p4
    return out
