"""Synthetic test sequences with analytic ground-truth flow.

Each generator returns ``(frames, gt_flow)`` where ``frames`` is a uint8
(n, h, w) stack and ``gt_flow(src, dst)`` gives the per-pixel displacement
of frame ``dst`` relative to frame ``src`` (what accumulated motion vectors
approximate when ``src`` is the GOP's I-frame).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .model import MACROBLOCK, FlowField, GopStream, mv_grid_shape

GtFlow = Callable[[int, int], FlowField]

SEQUENCES = ("translate", "rotate-sprite", "noise-flat")


def _bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = img.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = xs - x0
    ay = ys - y0
    top = img[y0, x0] * (1 - ax) + img[y0, x1] * ax
    bot = img[y1, x0] * (1 - ax) + img[y1, x1] * ax
    return top * (1 - ay) + bot * ay


def smooth_noise(height: int, width: int, rng: np.random.Generator, scale: int = 8) -> np.ndarray:
    """Band-limited random texture in [0, 255], float64."""
    ch = max(2, -(-height // scale) + 1)
    cw = max(2, -(-width // scale) + 1)
    coarse = rng.random((ch, cw))
    ys, xs = np.meshgrid(
        np.linspace(0, ch - 1, height), np.linspace(0, cw - 1, width), indexing="ij"
    )
    fine = _bilinear(coarse, xs, ys)
    lo, hi = fine.min(), fine.max()
    return (fine - lo) / (hi - lo + 1e-12) * 255.0


def translate_sequence(
    width: int,
    height: int,
    n_frames: int,
    velocity: tuple[float, float] = (2.0, 1.0),
    seed: int = 0,
) -> tuple[np.ndarray, GtFlow]:
    """Whole-frame translation of a textured canvas at constant velocity."""
    vx, vy = velocity
    rng = np.random.default_rng(seed)
    pad_x = int(np.ceil(abs(vx) * n_frames)) + 2
    pad_y = int(np.ceil(abs(vy) * n_frames)) + 2
    canvas = smooth_noise(height + 2 * pad_y, width + 2 * pad_x, rng)
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64),
                         indexing="ij")
    frames = np.empty((n_frames, height, width), dtype=np.uint8)
    for t in range(n_frames):
        # Content moves by +v per frame, so the sampling window moves by -v.
        ox = pad_x - vx * t
        oy = pad_y - vy * t
        frames[t] = np.round(_bilinear(canvas, xs + ox, ys + oy)).astype(np.uint8)

    def gt_flow(src: int, dst: int) -> FlowField:
        d = dst - src
        return FlowField(
            u=np.full((height, width), vx * d), v=np.full((height, width), vy * d)
        )

    return frames, gt_flow


def rotate_sprite_sequence(
    width: int,
    height: int,
    n_frames: int,
    omega_deg: float = 4.0,
    sprite_frac: float = 0.5,
    background: int = 96,
    seed: int = 0,
) -> tuple[np.ndarray, GtFlow]:
    """A textured square spinning about the frame center over a flat background."""
    rng = np.random.default_rng(seed)
    side = int(min(width, height) * sprite_frac)
    texture = smooth_noise(side, side, rng, scale=4)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64),
                         indexing="ij")
    rel_x = xs - cx
    rel_y = ys - cy

    def sprite_coords(theta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # Rotate pixel positions back into the sprite's own frame.
        c, s = np.cos(-theta), np.sin(-theta)
        sx = c * rel_x - s * rel_y + (side - 1) / 2.0
        sy = s * rel_x + c * rel_y + (side - 1) / 2.0
        inside = (sx >= 0) & (sx <= side - 1) & (sy >= 0) & (sy <= side - 1)
        return sx, sy, inside

    frames = np.empty((n_frames, height, width), dtype=np.uint8)
    for t in range(n_frames):
        theta = np.deg2rad(omega_deg) * t
        sx, sy, inside = sprite_coords(theta)
        plane = np.full((height, width), float(background))
        plane[inside] = _bilinear(texture, sx, sy)[inside]
        frames[t] = np.round(plane).astype(np.uint8)

    def gt_flow(src: int, dst: int) -> FlowField:
        delta = np.deg2rad(omega_deg) * (dst - src)
        _, _, inside = sprite_coords(np.deg2rad(omega_deg) * dst)
        c, s = np.cos(-delta), np.sin(-delta)
        src_x = c * rel_x - s * rel_y + cx
        src_y = s * rel_x + c * rel_y + cy
        u = np.where(inside, xs - src_x, 0.0)
        v = np.where(inside, ys - src_y, 0.0)
        return FlowField(u=u, v=v)

    return frames, gt_flow


def noise_flat_sequence(
    width: int,
    height: int,
    n_frames: int,
    velocity: tuple[int, int] = (2, 1),
    sprite_frac: float = 0.35,
    background: int = 128,
    seed: int = 0,
) -> tuple[np.ndarray, GtFlow]:
    """A textured square translating over a flat background.

    The flat region is where codec motion vectors carry no signal; pair with
    motion-vector noise injection to exercise confidence-based suppression.
    Integer velocity keeps the ground truth exactly block-representable.
    """
    vx, vy = int(velocity[0]), int(velocity[1])
    rng = np.random.default_rng(seed)
    side = int(min(width, height) * sprite_frac)
    texture = np.round(smooth_noise(side, side, rng, scale=4)).astype(np.uint8)
    x0 = max(0, (width - side) // 2 - (vx * n_frames) // 2)
    y0 = max(0, (height - side) // 2 - (vy * n_frames) // 2)

    def sprite_origin(t: int) -> tuple[int, int]:
        return x0 + vx * t, y0 + vy * t

    frames = np.full((n_frames, height, width), background, dtype=np.uint8)
    for t in range(n_frames):
        sx, sy = sprite_origin(t)
        fx0, fy0 = max(sx, 0), max(sy, 0)
        fx1, fy1 = min(sx + side, width), min(sy + side, height)
        if fx1 > fx0 and fy1 > fy0:
            frames[t, fy0:fy1, fx0:fx1] = texture[fy0 - sy : fy1 - sy, fx0 - sx : fx1 - sx]

    def gt_flow(src: int, dst: int) -> FlowField:
        sx, sy = sprite_origin(dst)
        u = np.zeros((height, width))
        v = np.zeros((height, width))
        fx0, fy0 = max(sx, 0), max(sy, 0)
        fx1, fy1 = min(sx + side, width), min(sy + side, height)
        d = dst - src
        u[fy0:fy1, fx0:fx1] = vx * d
        v[fy0:fy1, fx0:fx1] = vy * d
        return FlowField(u=u, v=v)

    return frames, gt_flow


def flat_block_masks(
    width: int, height: int, n_frames: int, sequence_kwargs: dict | None = None
) -> list[np.ndarray]:
    """Per-P-frame masks of blocks never touched by the noise-flat sprite.

    Mask ``t`` (for P-frame index t, i.e. frame t+1) marks blocks that stay
    flat in both that frame and its reference, so injected noise there is
    pure noise.
    """
    kw = dict(velocity=(2, 1), sprite_frac=0.35)
    if sequence_kwargs:
        kw.update({k: sequence_kwargs[k] for k in ("velocity", "sprite_frac") if k in sequence_kwargs})
    vx, vy = int(kw["velocity"][0]), int(kw["velocity"][1])
    side = int(min(width, height) * kw["sprite_frac"])
    x0 = max(0, (width - side) // 2 - (vx * n_frames) // 2)
    y0 = max(0, (height - side) // 2 - (vy * n_frames) // 2)
    by, bx = mv_grid_shape(width, height)
    masks = []
    for t in range(1, n_frames):
        flat = np.ones((by, bx), dtype=bool)
        for f in (t - 1, t):
            sx, sy = x0 + vx * f, y0 + vy * f
            bx0 = max(sx // MACROBLOCK, 0)
            by0 = max(sy // MACROBLOCK, 0)
            bx1 = min(-(-(sx + side) // MACROBLOCK), bx)
            by1 = min(-(-(sy + side) // MACROBLOCK), by)
            flat[by0:by1, bx0:bx1] = False
        masks.append(flat)
    return masks


def generate(name: str, width: int, height: int, n_frames: int, seed: int = 0,
             **kwargs) -> tuple[np.ndarray, GtFlow]:
    """Dispatch by sequence name: translate, rotate-sprite, or noise-flat."""
    if name == "translate":
        return translate_sequence(width, height, n_frames, seed=seed, **kwargs)
    if name == "rotate-sprite":
        return rotate_sprite_sequence(width, height, n_frames, seed=seed, **kwargs)
    if name == "noise-flat":
        return noise_flat_sequence(width, height, n_frames, seed=seed, **kwargs)
    raise ValueError(f"unknown sequence {name!r}, expected one of {SEQUENCES}")


def synthetic_dump_gops(
    frames: np.ndarray, gop_size: int, gt_flow: GtFlow | None = None
) -> list[GopStream]:
    """Build exact GOP streams from raw frames without a motion search.

    When ``gt_flow`` is given, block vectors come from the block-median of
    the ground-truth inter-frame motion (quantized to quarter-pel);
    otherwise all vectors are zero.  Residuals always make reconstruction
    exact, so the result is a valid lossless stream however crude the
    vectors are.
    """
    from .codecsim import motion_compensate
    from .model import MotionVectorField

    n, h, w = frames.shape
    by, bx = mv_grid_shape(w, h)
    gops: list[GopStream] = []
    for start in range(0, n, gop_size):
        gop = GopStream(iframe=frames[start].copy())
        end = min(start + gop_size, n)
        for t in range(start + 1, end):
            if gt_flow is None:
                vectors = np.zeros((by, bx, 2), dtype=np.int16)
            else:
                step = gt_flow(t - 1, t)
                vectors = np.zeros((by, bx, 2), dtype=np.int16)
                for b_y in range(by):
                    for b_x in range(bx):
                        sl = (
                            slice(b_y * MACROBLOCK, min((b_y + 1) * MACROBLOCK, h)),
                            slice(b_x * MACROBLOCK, min((b_x + 1) * MACROBLOCK, w)),
                        )
                        vectors[b_y, b_x, 0] = np.round(np.median(step.u[sl]) * 4)
                        vectors[b_y, b_x, 1] = np.round(np.median(step.v[sl]) * 4)
            mv = MotionVectorField(vectors)
            pred = motion_compensate(frames[t - 1], mv)
            residual = frames[t].astype(np.int16) - pred.astype(np.int16)
            gop.pframes.append((mv, residual))
        gops.append(gop)
    return gops
