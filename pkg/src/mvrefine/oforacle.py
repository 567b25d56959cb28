"""Dense windowed Lucas-Kanade flow, the comparison baseline for refined vectors.

Solves the brightness-constancy constraint per pixel by least squares over a
window, gated on the smaller structure-tensor eigenvalue: pixels where the
system is near-singular (the aperture problem) report zero flow with zero
confidence instead of noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .confidence import box_sum, central_gradients, tensor_eigenvalues
from .model import ConfidenceMap, FlowField


@dataclass(frozen=True)
class LkConfig:
    window: int = 5
    min_eigen: float = 1e-4
    pyramid_levels: int = 1

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd >= 3, got {self.window}")
        if self.pyramid_levels < 1:
            raise ValueError(f"pyramid_levels must be >= 1, got {self.pyramid_levels}")


def _solve(a: np.ndarray, b: np.ndarray, config: LkConfig) -> tuple[FlowField, ConfidenceMap]:
    # Spatial gradients from the frame average, temporal gradient b - a.
    fx, fy = central_gradients(0.5 * (a + b))
    ft = b - a
    w = config.window
    sxx = box_sum(fx * fx, w)
    sxy = box_sum(fx * fy, w)
    syy = box_sum(fy * fy, w)
    sxt = box_sum(fx * ft, w)
    syt = box_sum(fy * ft, w)

    _, lam2 = tensor_eigenvalues(sxx, sxy, syy)
    valid = lam2 >= config.min_eigen
    det = sxx * syy - sxy * sxy
    safe_det = np.where(valid, det, 1.0)
    u = np.where(valid, -(syy * sxt - sxy * syt) / safe_det, 0.0)
    v = np.where(valid, -(sxx * syt - sxy * sxt) / safe_det, 0.0)
    conf = np.where(valid, lam2, 0.0)
    return FlowField(u=u, v=v), ConfidenceMap(values=conf, normalized=False)


def _downsample(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    h2, w2 = h // 2, w // 2
    return a[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def _upsample_flow(flow: FlowField, height: int, width: int) -> FlowField:
    u = np.repeat(np.repeat(flow.u, 2, axis=0), 2, axis=1)[:height, :width] * 2.0
    v = np.repeat(np.repeat(flow.v, 2, axis=0), 2, axis=1)[:height, :width] * 2.0
    if u.shape != (height, width):
        u = np.pad(u, ((0, height - u.shape[0]), (0, width - u.shape[1])), mode="edge")
        v = np.pad(v, ((0, height - v.shape[0]), (0, width - v.shape[1])), mode="edge")
    return FlowField(u=u, v=v)


def _warp(img: np.ndarray, flow: FlowField) -> np.ndarray:
    """Bilinear sample of ``img`` at pixel positions displaced by ``flow``."""
    h, w = img.shape
    xs = np.clip(np.arange(w)[None, :] + flow.u, 0.0, w - 1.0)
    ys = np.clip(np.arange(h)[:, None] + flow.v, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = xs - x0
    ay = ys - y0
    top = img[y0, x0] * (1 - ax) + img[y0, x1] * ax
    bot = img[y1, x0] * (1 - ax) + img[y1, x1] * ax
    return top * (1 - ay) + bot * ay


def lk_flow(
    frame_a: np.ndarray,
    frame_b: np.ndarray,
    config: LkConfig = LkConfig(),
) -> tuple[FlowField, ConfidenceMap]:
    """Dense flow from frame_a to frame_b with per-pixel solvability confidence.

    Intensities are rescaled to [0, 1] internally; confidence is the smaller
    eigenvalue of the windowed structure tensor, zeroed with the flow where
    it falls below ``min_eigen``.  With ``pyramid_levels > 1`` the solve runs
    coarse-to-fine, warping frame_b by the upsampled estimate at each level.
    """
    a = np.asarray(frame_a, dtype=np.float64) / 255.0
    b = np.asarray(frame_b, dtype=np.float64) / 255.0
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"expected 2-D luma planes, got shape {a.shape}")

    pyr_a, pyr_b = [a], [b]
    for _ in range(config.pyramid_levels - 1):
        if min(pyr_a[-1].shape) // 2 < config.window:
            break
        pyr_a.append(_downsample(pyr_a[-1]))
        pyr_b.append(_downsample(pyr_b[-1]))

    flow = FlowField.zeros(*pyr_a[-1].shape)
    conf = ConfidenceMap(values=np.zeros(pyr_a[-1].shape), normalized=False)
    for level in range(len(pyr_a) - 1, -1, -1):
        la, lb = pyr_a[level], pyr_b[level]
        if flow.shape != la.shape:
            flow = _upsample_flow(flow, *la.shape)
        if level == len(pyr_a) - 1 and not flow.u.any():
            incr, conf = _solve(la, lb, config)
            flow = incr
        else:
            warped = _warp(lb, flow)
            incr, conf = _solve(la, warped, config)
            flow = FlowField(u=flow.u + incr.u, v=flow.v + incr.v)
    # Gating at the finest level wins: zero flow where confidence is zero.
    dead = conf.values == 0.0
    flow = FlowField(u=np.where(dead, 0.0, flow.u), v=np.where(dead, 0.0, flow.v))
    return flow, conf
