"""Per-pixel motion-confidence maps from I-frame intensity structure.

Two backends: gradient-magnitude edge strength (Scharr by default, Sobel
selectable) and the first eigenvalue of the windowed structure tensor.
Strong edges mean trackable motion; flat regions are where block vectors
go unreliable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfidenceMap

# 3x3 derivative kernels as (side, center) weights of the +-1 columns.
KERNELS = {"scharr": (3.0, 10.0), "sobel": (1.0, 2.0)}


@dataclass
class GradientField:
    """Spatial intensity derivatives, same shape as the source frame."""

    gx: np.ndarray
    gy: np.ndarray


def gradients(frame: np.ndarray, kernel: str = "scharr") -> GradientField:
    """3x3 derivative filtering with edge-replicated borders, no weight scaling.

    The x response at a pixel is the weighted sum of its right column minus
    its left column, e.g. Scharr: (3, 10, 3); the y kernel is the transpose.
    """
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}, expected one of {sorted(KERNELS)}")
    f = np.asarray(frame, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 3 or f.shape[1] < 3:
        raise ValueError(f"frame must be at least 3x3, got {f.shape}")
    side, center = KERNELS[kernel]
    p = np.pad(f, 1, mode="edge")
    gx = (
        side * (p[:-2, 2:] + p[2:, 2:])
        + center * p[1:-1, 2:]
        - side * (p[:-2, :-2] + p[2:, :-2])
        - center * p[1:-1, :-2]
    )
    gy = (
        side * (p[2:, :-2] + p[2:, 2:])
        + center * p[2:, 1:-1]
        - side * (p[:-2, :-2] + p[:-2, 2:])
        - center * p[:-2, 1:-1]
    )
    return GradientField(gx=gx, gy=gy)


def scharr_gradients(frame: np.ndarray) -> GradientField:
    return gradients(frame, "scharr")


def edge_strength(grads: GradientField) -> ConfidenceMap:
    """Gradient magnitude sqrt(gx^2 + gy^2); not yet normalized."""
    if grads.gx.shape != grads.gy.shape:
        raise ValueError("gradient planes must share shape")
    return ConfidenceMap(values=np.hypot(grads.gx, grads.gy), normalized=False)


def central_gradients(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference derivatives (one-sided at borders) of a float plane."""
    fy, fx = np.gradient(np.asarray(f, dtype=np.float64))
    return fx, fy


def box_sum(a: np.ndarray, window: int) -> np.ndarray:
    """Sum over the window x window neighborhood; outside-frame terms are zero."""
    if window == 1:
        return np.asarray(a, dtype=np.float64).copy()
    r = window // 2
    p = np.pad(np.asarray(a, dtype=np.float64), r)
    s = np.pad(p.cumsum(axis=0).cumsum(axis=1), ((1, 0), (1, 0)))
    return s[window:, window:] - s[:-window, window:] - s[window:, :-window] + s[:-window, :-window]


def tensor_eigenvalues(
    sxx: np.ndarray, sxy: np.ndarray, syy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (largest, smallest) of symmetric 2x2 fields [[sxx, sxy], [sxy, syy]].

    The structure tensor is positive semidefinite, so the smaller eigenvalue
    is clamped at zero to absorb rounding.
    """
    half_trace = 0.5 * (sxx + syy)
    disc = np.sqrt(np.maximum(half_trace * half_trace - (sxx * syy - sxy * sxy), 0.0))
    lam1 = half_trace + disc
    lam2 = np.maximum(half_trace - disc, 0.0)
    return lam1, lam2


def structure_tensor(frame: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Windowed sums (sxx, sxy, syy) of gradient outer products.

    Gradients are central differences on intensity rescaled to [0, 1].
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    f = np.asarray(frame, dtype=np.float64) / 255.0
    fx, fy = central_gradients(f)
    return box_sum(fx * fx, window), box_sum(fx * fy, window), box_sum(fy * fy, window)


def structure_tensor_confidence(frame: np.ndarray, window: int = 5) -> ConfidenceMap:
    """First (largest) structure-tensor eigenvalue per pixel; not normalized."""
    sxx, sxy, syy = structure_tensor(frame, window)
    lam1, _ = tensor_eigenvalues(sxx, sxy, syy)
    return ConfidenceMap(values=lam1, normalized=False)


def normalize(conf: ConfidenceMap) -> ConfidenceMap:
    """Scale by the per-frame maximum into [0, 1]; an all-zero map stays zero."""
    peak = float(conf.values.max()) if conf.values.size else 0.0
    if peak <= 0.0:
        return ConfidenceMap(values=np.zeros_like(conf.values, dtype=np.float64), normalized=True)
    return ConfidenceMap(values=np.asarray(conf.values, dtype=np.float64) / peak, normalized=True)
