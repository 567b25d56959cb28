"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest -s`` to see them live)."""

import struct
import time

import numpy as np
import pytest

from mvrefine import dumpio, synth
from mvrefine.codecsim import decode_gop, encode_gop, inject_mv_noise
from mvrefine.confidence import (
    edge_strength,
    normalize,
    scharr_gradients,
    structure_tensor,
    tensor_eigenvalues,
)
from mvrefine.dumpio import DumpError, dump_bytes, read_dump
from mvrefine.evalviz import benchmark_refine, endpoint_error
from mvrefine.model import ConfidenceMap, DumpHeader, FlowField
from mvrefine.oforacle import lk_flow
from mvrefine.refine import RefineConfig, accumulate_trace, refine_gop, threshold_flow

from conftest import random_gop, random_stream


def report(name: str, ok: bool, detail: str):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_eq1_round_trip_200_sequences():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(200):
        w = int(rng.integers(16, 129))
        h = int(rng.integers(16, 97))
        frames = rng.integers(0, 256, (12, h, w), dtype=np.uint8)
        gop = encode_gop(frames, search_range=4)
        if not np.array_equal(decode_gop(gop), frames):
            failures += 1
    elapsed = time.perf_counter() - start
    report(
        "eq1-round-trip",
        failures == 0 and elapsed < 60.0,
        f"200 sequences, {failures} mismatches, {elapsed:.1f}s (limit 60s)",
    )


def _oracle_best_mv(padded, cur, sr, by0, bx0, bh, bw):
    # Independent search: full SAD per candidate block window, explicit
    # lexicographic minimum over (sad, |dx|+|dy|, dy, dx).
    block = cur[by0 : by0 + bh, bx0 : bx0 + bw].astype(np.int64)
    best = None
    for dy in range(-sr, sr + 1):
        for dx in range(-sr, sr + 1):
            win = padded[
                sr + by0 - dy : sr + by0 - dy + bh,
                sr + bx0 - dx : sr + bx0 - dx + bw,
            ].astype(np.int64)
            sad = int(np.abs(block - win).sum())
            key = (sad, abs(dx) + abs(dy), dy, dx)
            if best is None or key < best:
                best = key
    return best[2], best[3]  # dy, dx


def test_encoder_optimality_brute_force():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(50):
        frames = rng.integers(0, 256, (2, 48, 48), dtype=np.uint8)
        gop = encode_gop(frames, search_range=4)
        mv = gop.pframes[0][0].vectors
        padded = np.pad(frames[0], 4, mode="edge")
        for by in range(3):
            for bx in range(3):
                dy, dx = _oracle_best_mv(padded, frames[1], 4, by * 16, bx * 16, 16, 16)
                if mv[by, bx, 0] != dx * 4 or mv[by, bx, 1] != dy * 4:
                    bad += 1
    elapsed = time.perf_counter() - start
    report(
        "encoder-optimality",
        bad == 0 and elapsed < 30.0,
        f"50 pairs x 9 blocks, {bad} suboptimal vectors, {elapsed:.1f}s (limit 30s)",
    )


def _python_walker(grids, w, h, target):
    # Pure-Python per-pixel stepping; same IEEE doubles, independent control flow.
    src = []
    for y in range(h):
        row = []
        for x in range(w):
            cx, cy = float(x), float(y)
            for t in range(target, -1, -1):
                rx = int(cx + 0.5) if cx >= 0 else -int(-cx + 0.5)
                ry = int(cy + 0.5) if cy >= 0 else -int(-cy + 0.5)
                rx = 0 if rx < 0 else (w - 1 if rx > w - 1 else rx)
                ry = 0 if ry < 0 else (h - 1 if ry > h - 1 else ry)
                dxq, dyq = grids[t][ry // 16][rx // 16]
                cx -= dxq / 4.0
                cy -= dyq / 4.0
            row.append((cx, cy))
        src.append(row)
    return src


def test_accumulation_matches_step_walker():
    rng = np.random.default_rng(31)
    mismatches = 0
    for _ in range(50):
        gop = random_gop(rng, 64, 64, 3, max_qp=10)
        grids = [
            [[(int(v[0]), int(v[1])) for v in row] for row in mv.vectors]
            for mv, _ in gop.pframes
        ]
        for target in range(3):
            flow, trace = accumulate_trace(gop, target)
            src = _python_walker(grids, 64, 64, target)
            for y in range(64):
                for x in range(64):
                    cx, cy = src[y][x]
                    if flow.u[y, x] != x - cx or flow.v[y, x] != y - cy:
                        mismatches += 1
                    if trace.src_x[y, x] != min(max(cx, 0.0), 63.0):
                        mismatches += 1
                    if trace.src_y[y, x] != min(max(cy, 0.0), 63.0):
                        mismatches += 1
    report(
        "accumulation-oracle",
        mismatches == 0,
        f"50 GOPs x 3 targets x 64x64 px, {mismatches} mismatching pixels",
    )


def test_noise_suppression_beats_raw_accumulation():
    rng = np.random.default_rng(99)
    n_streams = 20
    improved = 0
    regressions = 0
    for s in range(n_streams):
        frames, gt = synth.noise_flat_sequence(
            96, 96, 6, velocity=(2, 1), seed=int(rng.integers(0, 10000))
        )
        gop = encode_gop(frames, search_range=4)
        masks = synth.flat_block_masks(96, 96, 6, {"velocity": (2, 1)})
        noisy = inject_mv_noise(gop, 0.3, 32, seed=s, mask=masks)
        refined = refine_gop(noisy)
        raw_epe = []
        ref_epe = []
        for t in range(len(noisy.pframes)):
            truth = gt(0, t + 1)
            raw, _ = accumulate_trace(noisy, t)
            raw_epe.append(endpoint_error(raw, truth).mean_epe)
            ref_epe.append(endpoint_error(refined[t], truth).mean_epe)
        raw_mean = float(np.mean(raw_epe))
        ref_mean = float(np.mean(ref_epe))
        if ref_mean > raw_mean + 1e-12:
            regressions += 1
        if ref_mean < raw_mean - 1e-12:
            improved += 1
    report(
        "noise-suppression",
        regressions == 0 and improved >= 18,
        f"{n_streams} streams: refined <= raw on {n_streams - regressions}, "
        f"strictly better on {improved} (need all, >= 18)",
    )


def test_threshold_monotonicity_and_mask_subset():
    rng = np.random.default_rng(5)
    violations = 0
    for _ in range(100):
        h, w = int(rng.integers(8, 40)), int(rng.integers(8, 40))
        flow = FlowField(u=rng.normal(size=(h, w)), v=rng.normal(size=(h, w)))
        conf = ConfidenceMap(values=rng.random((h, w)), normalized=True)
        prev_count = None
        for thr in np.linspace(0.0, 1.0, 9):
            out = threshold_flow(flow, conf, RefineConfig(fixed_threshold=float(thr)))
            kept = (out.u != 0) | (out.v != 0)
            count = int(kept.sum())
            if prev_count is not None and count > prev_count:
                violations += 1
            prev_count = count
            if not (
                np.array_equal(out.u[kept], flow.u[kept])
                and np.array_equal(out.v[kept], flow.v[kept])
            ):
                violations += 1
    report(
        "threshold-properties",
        violations == 0,
        f"100 random (flow, confidence) pairs x 9 thresholds, {violations} violations",
    )


def test_lk_oracle_sanity():
    ys, xs = np.meshgrid(np.arange(64, dtype=float), np.arange(64, dtype=float), indexing="ij")

    def blob(cx):
        g = 200.0 * np.exp(-(((xs - cx) ** 2) + (ys - 32.0) ** 2) / (2 * 5.0**2))
        return np.round(g).astype(np.uint8)

    a, b = blob(31.0), blob(32.0)
    flow, conf = lk_flow(a, b)
    strong = conf.values >= 0.25 * conf.values.max()
    epe = float(np.hypot(flow.u - 1.0, flow.v)[strong].mean())

    static_flow, _ = lk_flow(a, a)
    static_zero = not static_flow.u.any() and not static_flow.v.any()
    report(
        "lk-oracle",
        epe < 0.2 and static_zero,
        f"translating Gaussian mean EPE {epe:.3f} px (< 0.2), "
        f"static flow exactly zero: {static_zero}",
    )


def test_confidence_invariants():
    rng = np.random.default_rng(17)
    bad_eigen = 0
    for _ in range(50):
        frame = rng.integers(0, 256, (int(rng.integers(8, 64)), int(rng.integers(8, 64))),
                             dtype=np.uint8)
        lam1, lam2 = tensor_eigenvalues(*structure_tensor(frame, 5))
        if not ((lam1 >= lam2).all() and (lam2 >= 0).all()):
            bad_eigen += 1

    values = rng.random((32, 32)) * 123.0
    once = normalize(ConfidenceMap(values=values))
    twice = normalize(once)
    idempotent = np.array_equal(once.values, twice.values)

    frame = rng.integers(0, 256, (48, 48), dtype=np.uint8)
    grads = scharr_gradients(frame)
    from mvrefine.confidence import GradientField

    base = normalize(edge_strength(grads)).values
    worst = 0.0
    for scale in (0.003, 7.5, 4096.0):
        scaled = normalize(
            edge_strength(GradientField(gx=grads.gx * scale, gy=grads.gy * scale))
        ).values
        worst = max(worst, float(np.abs(base - scaled).max()))

    report(
        "confidence-invariants",
        bad_eigen == 0 and idempotent and worst < 1e-9,
        f"eigen order violations {bad_eigen}/50, normalize idempotent {idempotent}, "
        f"scale-invariance max |delta| {worst:.2e} (< 1e-9)",
    )


def test_format_fuzz_10000_buffers():
    rng = np.random.default_rng(4242)
    seeds = []
    for _ in range(6):
        w = int(rng.integers(16, 49))
        h = int(rng.integers(16, 49))
        header, frames = random_stream(rng, w, h, [int(rng.integers(1, 5)) for _ in range(2)])
        seeds.append(bytearray(dump_bytes(header, frames)))

    crashes = 0
    accepted_invalid = 0
    parsed_ok = 0
    for i in range(10000):
        data = bytearray(seeds[i % len(seeds)])
        op = i % 4
        if op == 0:
            data = data[: int(rng.integers(0, len(data) + 1))]
        elif op == 1:
            for _ in range(int(rng.integers(1, 12))):
                if data:
                    data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
        elif op == 2:
            field = int(rng.integers(0, 6)) * 4
            if len(data) >= field + 4:
                struct.pack_into("<I", data, field, int(rng.integers(0, 2**32)))
        else:
            cut = int(rng.integers(0, len(data) + 1))
            data = data[:cut] + bytes(rng.integers(0, 256, size=int(rng.integers(1, 64)),
                                                   dtype=np.uint8)) + data[cut:]
        try:
            h, fr = read_dump(bytes(data))
            parsed_ok += 1
            if dump_bytes(h, fr) != bytes(data):
                accepted_invalid += 1
        except DumpError:
            pass
        except Exception:
            crashes += 1
    report(
        "format-fuzz",
        crashes == 0 and accepted_invalid == 0,
        f"10000 buffers: {crashes} crashes, {accepted_invalid} accepted-invalid, "
        f"{parsed_ok} parsed clean",
    )


def test_refine_throughput(tmp_path):
    frames, gt = synth.translate_sequence(320, 240, 120, velocity=(2.0, 1.0), seed=3)
    gops = synth.synthetic_dump_gops(frames, 12, gt)
    records = dumpio.merge_gops(gops)
    header = DumpHeader(320, 240, len(records), 12)
    path = tmp_path / "bench.mvd1"
    with open(path, "wb") as fh:
        dumpio.write_dump(header, records, fh)

    reps = 3
    result = benchmark_refine(path, repetitions=reps)
    fps = result["fps"]
    stage_summary = ", ".join(f"{k} {v:.0f}ms" for k, v in result["stage_ms"].items())
    report(
        "refine-throughput",
        fps >= 100.0,
        f"{result['frames']} P-frames at {fps:.0f} frames/s single-threaded "
        f"(target 250, hard floor 100; stages: {stage_summary})",
    )
