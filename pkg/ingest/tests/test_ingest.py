import json

import numpy as np
import pytest

cv2 = pytest.importorskip("cv2")

import mvrefine
from mvrefine.codecsim import decode_gop

from mvd_ingest import (
    IngestCapabilityError,
    IngestError,
    ingest,
    motion_compensate,
    resample_mvs,
    run_exporter,
)
from mvd_ingest.cli import main


def write_clip(path, frames, fps=25):
    h, w = frames[0].shape
    vw = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"mp4v"), fps, (w, h), False)
    assert vw.isOpened(), "OpenCV cannot write mp4v video"
    for f in frames:
        vw.write(f)
    vw.release()


def moving_texture_frames(width, height, n, seed=7):
    rng = np.random.default_rng(seed)
    coarse = (rng.random((height // 8 + 10, width // 8 + 10)) * 255).astype(np.uint8)
    canvas = cv2.resize(
        coarse, ((width // 8 + 10) * 8, (height // 8 + 10) * 8), interpolation=cv2.INTER_CUBIC
    )
    return [
        canvas[4 + t // 2 : 4 + t // 2 + height, 2 + t : 2 + t + width].copy() for t in range(n)
    ]


@pytest.fixture(scope="module")
def clip(tmp_path_factory):
    # 2 seconds at 25 fps
    path = tmp_path_factory.mktemp("clips") / "clip.mp4"
    write_clip(path, moving_texture_frames(160, 128, 50))
    return path


@pytest.fixture(scope="module")
def ingested(clip, tmp_path_factory):
    out = tmp_path_factory.mktemp("dumps") / "clip.mvd1"
    report = ingest(clip, out)
    return clip, out, report


def test_emitted_dump_passes_primary_validation(ingested):
    _, out, report = ingested
    with open(out, "rb") as fh:
        header, frames = mvrefine.read_dump(fh)
    assert header.width == 160 and header.height == 128
    assert header.frame_count == 50 == report.frames_written
    assert not report.warnings


def test_gop_structure_matches_codec(ingested):
    _, out, _ = ingested
    with open(out, "rb") as fh:
        header, frames = mvrefine.read_dump(fh)
    gops = mvrefine.split_gops(frames)
    # mpeg4 default GOP of 12: I-frames at 0, 12, 24, 36, 48
    assert [g.frame_count() for g in gops] == [12, 12, 12, 12, 2]
    assert header.gop_size == 12
    full = gops[:4]
    assert all(len(g.pframes) == 11 for g in full)


def test_decode_matches_toolchain_luma(ingested):
    clip_path, out, _ = ingested
    tool = run_exporter(clip_path)
    with open(out, "rb") as fh:
        _, frames = mvrefine.read_dump(fh)
    gops = mvrefine.split_gops(frames)
    decoded = np.concatenate([decode_gop(g) for g in gops])
    reference = np.stack([f.luma for f in tool.frames])
    assert decoded.shape == reference.shape
    close = (np.abs(decoded.astype(np.int16) - reference.astype(np.int16)) <= 1).mean()
    assert close >= 0.995
    # residuals are recomputed from decoded luma: reconstruction is exact
    assert close == 1.0


def test_nonzero_motion_recovered(ingested):
    _, out, _ = ingested
    with open(out, "rb") as fh:
        _, frames = mvrefine.read_dump(fh)
    gops = mvrefine.split_gops(frames)
    mv, _ = gops[0].pframes[0]
    # content slides one pixel left per frame
    assert np.median(mv.vectors[:, :, 0]) == -4.0


def test_still_video_has_near_zero_motion(tmp_path):
    frame = moving_texture_frames(96, 96, 1)[0]
    path = tmp_path / "still.mp4"
    write_clip(path, [frame] * 30)
    out = tmp_path / "still.mvd1"
    ingest(path, out)
    with open(out, "rb") as fh:
        _, frames = mvrefine.read_dump(fh)
    for gop in mvrefine.split_gops(frames):
        for mv, residual in gop.pframes:
            assert np.abs(mv.vectors).max() <= 4
            assert np.abs(residual).mean() < 2.0


def test_gop_cap_limits_gop_length(clip, tmp_path):
    out = tmp_path / "capped.mvd1"
    report = ingest(clip, out, gop_cap=6)
    assert report.frames_written == 50
    with open(out, "rb") as fh:
        _, frames = mvrefine.read_dump(fh)
    gops = mvrefine.split_gops(frames)
    assert max(g.frame_count() for g in gops) <= 6


def test_resize_rescales_frames_and_vectors(clip, tmp_path):
    out = tmp_path / "small.mvd1"
    report = ingest(clip, out, resize=(80, 64))
    assert report.frames_written == 50
    with open(out, "rb") as fh:
        header, frames = mvrefine.read_dump(fh)
    assert (header.width, header.height) == (80, 64)
    gops = mvrefine.split_gops(frames)
    decoded = np.concatenate([decode_gop(g) for g in gops])
    tool = run_exporter(clip)
    from mvd_ingest.adapter import resize_luma

    reference = np.stack([resize_luma(f.luma, 80, 64) for f in tool.frames])
    assert (np.abs(decoded.astype(np.int16) - reference.astype(np.int16)) <= 1).all()
    # content motion is halved in x by the 2x downscale
    mv, _ = gops[0].pframes[0]
    assert np.median(mv.vectors[:, :, 0]) == -2.0


def test_unsupported_codec_raises_capability_error(clip, monkeypatch):
    import mvd_ingest.adapter as adapter_mod

    monkeypatch.setattr(adapter_mod, "MV_EXPORT_CODECS", frozenset({"h264"}))
    with pytest.raises(IngestCapabilityError) as exc:
        ingest(clip, "/tmp/never.mvd1")
    assert "mpeg4" in str(exc.value)


def test_undecodable_source_raises_ingest_error(tmp_path):
    bogus = tmp_path / "bogus.mp4"
    bogus.write_bytes(bytes(range(256)) * 64)
    with pytest.raises(IngestError):
        ingest(bogus, tmp_path / "x.mvd1")


def test_missing_source_raises_ingest_error(tmp_path):
    with pytest.raises(IngestError):
        ingest(tmp_path / "absent.mp4", tmp_path / "x.mvd1")


def test_resample_aligned_block_pass_through():
    # one 16x16 block at cell (1, 0), motion -3/2 px in x
    mvs = np.array([[-1, 16, 16, 8, 24, 3, 0, 2]], dtype=np.int32)
    grid, resampled, dropped = resample_mvs(mvs, 64, 48)
    assert grid[1, 0, 0] == -6 and grid[1, 0, 1] == 0
    assert not grid[0].any() and not grid[2].any()
    assert resampled == 0 and dropped == 0


def test_resample_area_weighting_oracle():
    # 8x8 block straddling two cells equally in x
    mvs = np.array(
        [
            [-1, 8, 8, 16, 4, -8, 0, 2],  # spans x in [12, 20): 4 px in cell 0, 4 in cell 1
        ],
        dtype=np.int32,
    )
    grid, resampled, _ = resample_mvs(mvs, 48, 16)
    assert resampled == 1
    assert grid[0, 0, 0] == grid[0, 1, 0] == 16  # -(-8)*4/2
    assert not grid[0, 2].any()


def test_resample_drops_future_references():
    mvs = np.array(
        [
            [1, 16, 16, 8, 8, 4, 0, 2],  # future-referenced: dropped
            [-1, 16, 16, 8, 8, 4, 0, 2],
        ],
        dtype=np.int32,
    )
    grid, _, dropped = resample_mvs(mvs, 32, 32)
    assert dropped == 1
    assert grid[0, 0, 0] == -8


def test_motion_compensate_fetch_rule():
    ref = np.tile(np.arange(32, dtype=np.uint8), (32, 1))
    grid = np.zeros((2, 2, 2), dtype=np.int16)
    grid[:, :, 0] = 4  # 1 px: out[x] = ref[x-1]
    pred = motion_compensate(ref, grid)
    assert np.array_equal(pred[:, 1:], ref[:, :-1])
    assert np.array_equal(pred[:, 0], ref[:, 0])


def test_cli_end_to_end(clip, tmp_path, capsys):
    out = tmp_path / "cli.mvd1"
    assert main([str(clip), str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["frames_written"] == 50
    assert report["b_frames_remapped"] == 0
    assert out.exists()


def test_cli_bad_input_exit_codes(tmp_path, capsys):
    assert main([str(tmp_path / "nope.mp4"), str(tmp_path / "o.mvd1")]) == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
