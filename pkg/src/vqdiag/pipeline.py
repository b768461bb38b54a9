"""Full-video inference: clip segmentation, per-clip scoring, temporal
aggregation, and the video-wide diagnostic map."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .distortions import ARTIFACT_KINDS
from .errors import ArgumentError
from .frames import FrameSequence, center_crop_multiple
from .model import QualityModel, score_clip


def segment_clips(video: FrameSequence, clip_len: int) -> list[FrameSequence]:
    """Non-overlapping clips of ``clip_len`` frames.

    A trailing partial clip is dropped; a video shorter than one clip yields
    a single clip padded by repeating its final frame.
    """
    if clip_len < 2:
        raise ArgumentError(f"clip_len must be >= 2, got {clip_len}")
    if video.t < clip_len:
        pad = np.repeat(video.frames[-1:], clip_len - video.t, axis=0)
        return [video.with_frames(np.concatenate([video.frames, pad], axis=0))]
    count = video.t // clip_len
    return [
        video.with_frames(video.frames[i * clip_len : (i + 1) * clip_len].copy())
        for i in range(count)
    ]


@dataclass(frozen=True)
class ClipScore:
    clip_index: int
    q_clip: float
    a_clip: np.ndarray
    frame_span: tuple[int, int]


@dataclass
class VideoReport:
    q_video: float
    clip_scores: list[ClipScore]
    diagnostic_map: np.ndarray  # (clip_count, artifact_dim)
    artifact_summary: dict[str, dict[str, float]]  # per artifact: max and mean
    mode: str
    model_id: str
    input_digests: dict[str, str]
    created_at: str = ""

    def to_json_dict(self) -> dict:
        return {
            "q_video": self.q_video,
            "mode": self.mode,
            "model_id": self.model_id,
            "input_digests": self.input_digests,
            "created_at": self.created_at,
            "clip_scores": [
                {
                    "clip_index": c.clip_index,
                    "q_clip": c.q_clip,
                    "frame_span": list(c.frame_span),
                    "a_clip": [float(v) for v in c.a_clip],
                }
                for c in self.clip_scores
            ],
            "diagnostic_map": [[float(v) for v in row] for row in self.diagnostic_map],
            "artifact_summary": self.artifact_summary,
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n")
        return path


def _digest(seq: FrameSequence) -> str:
    return hashlib.sha256(seq.frames.tobytes()).hexdigest()


def _artifact_names(dim: int) -> list[str]:
    names = [k.value for k in ARTIFACT_KINDS]
    if dim <= len(names):
        return names[:dim]
    return names + [f"artifact_{i}" for i in range(len(names), dim)]


def score_video(
    model: QualityModel,
    dist: FrameSequence,
    ref: FrameSequence | None = None,
    model_id: str = "",
    timestamp: bool = True,
) -> VideoReport:
    """Score every clip of a video and aggregate.

    The video score is the arithmetic mean of the clip scores; the diagnostic
    map stacks the per-clip artifact vectors row by row. Frames are
    center-cropped to the nearest patch-size multiple first. Clips are scored
    one at a time, so scoring a pre-segmented clip individually reproduces
    its row exactly.
    """
    cfg = model.cfg
    if cfg.mode == "FR":
        if ref is None:
            raise ArgumentError("FR scoring requires a reference video")
        if ref.t != dist.t:
            raise ArgumentError(f"FR length mismatch: dist has {dist.t} frames, ref {ref.t}")
    elif ref is not None:
        raise ArgumentError("NR scoring takes no reference")

    dist_c = center_crop_multiple(dist, cfg.patch_size)
    ref_c = center_crop_multiple(ref, cfg.patch_size) if ref is not None else None
    clips = segment_clips(dist_c, cfg.clip_len)
    ref_clips = segment_clips(ref_c, cfg.clip_len) if ref_c is not None else [None] * len(clips)

    scores: list[ClipScore] = []
    for i, (clip, ref_clip) in enumerate(zip(clips, ref_clips)):
        q, a = score_clip(model, clip, ref_clip)
        span = (i * cfg.clip_len, min((i + 1) * cfg.clip_len, dist_c.t))
        scores.append(ClipScore(i, q, a, span))

    diag = np.stack([c.a_clip for c in scores])
    names = _artifact_names(diag.shape[1])
    summary = {
        name: {"max": float(diag[:, j].max()), "mean": float(diag[:, j].mean())}
        for j, name in enumerate(names)
    }
    digests = {"dist": _digest(dist)}
    if ref is not None:
        digests["ref"] = _digest(ref)
    return VideoReport(
        q_video=float(np.mean([c.q_clip for c in scores], dtype=np.float64)),
        clip_scores=scores,
        diagnostic_map=diag,
        artifact_summary=summary,
        mode=cfg.mode,
        model_id=model_id,
        input_digests=digests,
        created_at=datetime.now(timezone.utc).isoformat() if timestamp else "",
    )


def threshold_diagnostics(report: VideoReport, threshold: float = 0.5) -> dict[str, bool]:
    """Video-level artifact verdicts: flag artifact i iff its per-clip maximum
    reaches the threshold (transient artifacts live in single clips)."""
    if not 0.0 < threshold < 1.0:
        raise ArgumentError(f"threshold must be in (0, 1), got {threshold}")
    names = _artifact_names(report.diagnostic_map.shape[1])
    col_max = report.diagnostic_map.max(axis=0)
    return {name: bool(col_max[j] >= threshold) for j, name in enumerate(names)}
