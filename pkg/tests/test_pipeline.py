import json

import numpy as np
import pytest
import torch

from vqdiag.errors import ArgumentError
from vqdiag.frames import FrameSequence
from vqdiag.model import QualityModel, score_clip
from vqdiag.pipeline import (
    ClipScore,
    VideoReport,
    score_video,
    segment_clips,
    threshold_diagnostics,
)

from conftest import random_sequence, tiny_model_config

torch.set_num_threads(1)


# ---------------------------------------------------------------------------
# segmentation


def test_segment_exact_multiple(rng):
    video = random_sequence(rng, t=36, h=32, w=32)
    clips = segment_clips(video, 12)
    assert len(clips) == 3
    for i, clip in enumerate(clips):
        assert clip.t == 12
        assert np.array_equal(clip.frames, video.frames[i * 12 : (i + 1) * 12])


def test_segment_drops_trailing_remainder(rng):
    video = random_sequence(rng, t=30, h=32, w=32)
    clips = segment_clips(video, 12)
    assert len(clips) == 2
    assert np.array_equal(clips[1].frames, video.frames[12:24])


def test_segment_pads_short_video_by_repeating_last_frame(rng):
    video = random_sequence(rng, t=7, h=32, w=32)
    clips = segment_clips(video, 12)
    assert len(clips) == 1
    clip = clips[0]
    assert clip.t == 12
    assert np.array_equal(clip.frames[:7], video.frames)
    for t in range(7, 12):
        assert np.array_equal(clip.frames[t], video.frames[6])


def test_segment_rejects_tiny_clip_len(rng):
    with pytest.raises(ArgumentError):
        segment_clips(random_sequence(rng), 1)


def test_segmentation_covers_frames_without_overlap(rng):
    video = random_sequence(rng, t=29, h=32, w=32)
    clips = segment_clips(video, 4)
    spans = [(i * 4, (i + 1) * 4) for i in range(len(clips))]
    assert spans[0][0] == 0
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        assert a1 == b0
    assert spans[-1][1] == 28  # frame 28 dropped


# ---------------------------------------------------------------------------
# video scoring


@pytest.fixture(scope="module")
def fr_model():
    torch.manual_seed(11)
    model = QualityModel(tiny_model_config())
    # nonzero adapters and heads so scores vary across clips
    for adapter in model.experts.values():
        torch.nn.init.normal_(adapter.up.weight, std=0.05)
    return model.eval()


def test_q_video_is_mean_of_clip_scores(rng, fr_model):
    dist = random_sequence(rng, t=12, h=32, w=32)  # 3 clips of clip_len 4
    ref = random_sequence(rng, t=12, h=32, w=32)
    report = score_video(fr_model, dist, ref, timestamp=False)
    qs = [c.q_clip for c in report.clip_scores]
    assert len(qs) == 3
    assert report.q_video == pytest.approx(float(np.mean(qs)), abs=1e-9)
    assert report.diagnostic_map.shape == (3, fr_model.cfg.artifact_dim)


def test_identical_clips_give_identical_rows(rng, fr_model):
    clip = random_sequence(rng, t=4, h=32, w=32)
    ref_clip = random_sequence(rng, t=4, h=32, w=32)
    video = clip.with_frames(np.concatenate([clip.frames] * 3))
    ref = ref_clip.with_frames(np.concatenate([ref_clip.frames] * 3))
    report = score_video(fr_model, video, ref, timestamp=False)
    qs = [c.q_clip for c in report.clip_scores]
    assert qs[0] == qs[1] == qs[2]
    assert report.q_video == pytest.approx(qs[0], abs=1e-12)
    assert np.array_equal(report.diagnostic_map[0], report.diagnostic_map[1])


def test_permuting_clips_permutes_rows_and_keeps_mean(rng, fr_model):
    a = random_sequence(rng, t=4, h=32, w=32)
    b = random_sequence(rng, t=4, h=32, w=32)
    ra = random_sequence(rng, t=4, h=32, w=32)
    rb = random_sequence(rng, t=4, h=32, w=32)
    video_ab = a.with_frames(np.concatenate([a.frames, b.frames]))
    video_ba = a.with_frames(np.concatenate([b.frames, a.frames]))
    ref_ab = a.with_frames(np.concatenate([ra.frames, rb.frames]))
    ref_ba = a.with_frames(np.concatenate([rb.frames, ra.frames]))
    rep_ab = score_video(fr_model, video_ab, ref_ab, timestamp=False)
    rep_ba = score_video(fr_model, video_ba, ref_ba, timestamp=False)
    assert rep_ab.clip_scores[0].q_clip == rep_ba.clip_scores[1].q_clip
    assert rep_ab.clip_scores[1].q_clip == rep_ba.clip_scores[0].q_clip
    assert rep_ab.q_video == pytest.approx(rep_ba.q_video, abs=1e-12)
    assert np.array_equal(rep_ab.diagnostic_map, rep_ba.diagnostic_map[::-1])


def test_score_video_matches_individually_scored_clips(rng, fr_model):
    dist = random_sequence(rng, t=8, h=32, w=32)
    ref = random_sequence(rng, t=8, h=32, w=32)
    report = score_video(fr_model, dist, ref, timestamp=False)
    for i, clips in enumerate(zip(segment_clips(dist, 4), segment_clips(ref, 4))):
        q, a = score_clip(fr_model, clips[0], clips[1])
        assert report.clip_scores[i].q_clip == q
        assert np.array_equal(report.clip_scores[i].a_clip, a)


def test_fr_mode_contracts(rng, fr_model):
    dist = random_sequence(rng, t=8, h=32, w=32)
    with pytest.raises(ArgumentError):
        score_video(fr_model, dist, None)
    with pytest.raises(ArgumentError):
        score_video(fr_model, dist, random_sequence(rng, t=4, h=32, w=32))


def test_nr_mode_rejects_reference(rng):
    torch.manual_seed(0)
    model = QualityModel(tiny_model_config(mode="NR")).eval()
    dist = random_sequence(rng, t=8, h=32, w=32)
    with pytest.raises(ArgumentError):
        score_video(model, dist, dist)
    report = score_video(model, dist, None, timestamp=False)
    assert len(report.clip_scores) == 2


def test_center_crop_to_patch_multiple(rng, fr_model):
    dist = random_sequence(rng, t=4, h=40, w=56)
    ref = random_sequence(rng, t=4, h=40, w=56)
    report = score_video(fr_model, dist, ref, timestamp=False)
    assert len(report.clip_scores) == 1  # cropped to 32x48, still one clip


def test_report_json_round_trip_and_determinism(rng, fr_model, tmp_path):
    dist = random_sequence(rng, t=8, h=32, w=32)
    ref = random_sequence(rng, t=8, h=32, w=32)
    r1 = score_video(fr_model, dist, ref, model_id="abc", timestamp=False)
    r2 = score_video(fr_model, dist, ref, model_id="abc", timestamp=False)
    assert r1.to_json_dict() == r2.to_json_dict()
    stamped = score_video(fr_model, dist, ref, model_id="abc")
    d1, d2 = r1.to_json_dict(), stamped.to_json_dict()
    d1.pop("created_at"), d2.pop("created_at")
    assert d1 == d2
    path = r1.save(tmp_path / "report.json")
    loaded = json.loads(path.read_text())
    assert loaded["q_video"] == r1.q_video
    assert loaded["mode"] == "FR"
    assert loaded["model_id"] == "abc"
    assert set(loaded["input_digests"]) == {"dist", "ref"}
    assert len(loaded["diagnostic_map"]) == len(loaded["clip_scores"])


# ---------------------------------------------------------------------------
# diagnostics thresholding


def fabricated_report(diag: np.ndarray) -> VideoReport:
    clips = [
        ClipScore(i, 0.0, diag[i], (i * 12, (i + 1) * 12)) for i in range(diag.shape[0])
    ]
    return VideoReport(
        q_video=0.0,
        clip_scores=clips,
        diagnostic_map=diag,
        artifact_summary={},
        mode="FR",
        model_id="",
        input_digests={},
    )


def test_threshold_uses_max_pooling_over_clips():
    diag = np.full((3, 10), 0.1)
    diag[1, 7] = 0.9  # one clip lights up the banding bit
    flags = threshold_diagnostics(fabricated_report(diag), 0.5)
    assert flags["banding"] is True
    assert sum(flags.values()) == 1


def test_no_flags_for_low_probabilities():
    diag = np.full((2, 10), 0.01)
    flags = threshold_diagnostics(fabricated_report(diag), 0.5)
    assert not any(flags.values())


def test_flags_monotone_in_threshold():
    rng = np.random.Generator(np.random.PCG64(3))
    diag = rng.random((4, 10))
    report = fabricated_report(diag)
    previous = None
    for threshold in (0.1, 0.3, 0.5, 0.7, 0.9):
        flags = threshold_diagnostics(report, threshold)
        count = sum(flags.values())
        if previous is not None:
            assert count <= previous
        previous = count
    with pytest.raises(ArgumentError):
        threshold_diagnostics(report, 1.5)
