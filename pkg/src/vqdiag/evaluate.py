"""Evaluation harness: correlation tables for quality, detection tables for
artifacts, rendered as JSON and aligned text."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .corpus import ArtifactCorpus, VideoCorpus
from .distortions import ARTIFACT_KINDS
from .errors import DegenerateInputError
from .frames import Domain
from .metrics import f1_accuracy_auc, plcc, srocc
from .model import QualityModel
from .training import _fused_representation, _video_clip_scores


@dataclass
class EvalReport:
    quality: dict[str, dict[str, float]] = field(default_factory=dict)
    artifacts: dict[str, dict[str, float]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"quality": self.quality, "artifacts": self.artifacts, "meta": self.meta}

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n")
        return path


def evaluate_quality(
    model: QualityModel, corpus: VideoCorpus, split_name: str = "all", by_domain: bool = True
) -> dict[str, dict[str, float]]:
    """SROCC/PLCC of predicted video scores against the corpus scores,
    overall and per perceptual domain."""
    if len(corpus) == 0:
        raise DegenerateInputError(f"split {split_name!r} is empty")
    predicted = _video_clip_scores(model, corpus, model.cfg.clip_len)
    mos = np.asarray([e["mos"]["score"] for e in corpus.entries])
    out = {split_name: _corr_row(predicted, mos)}
    if by_domain:
        domains = np.asarray([e["domain"] for e in corpus.entries])
        for d in Domain:
            mask = domains == d.value
            if mask.sum() >= 2:
                out[f"{split_name}/{d.value}"] = _corr_row(predicted[mask], mos[mask])
    return out


def _corr_row(predicted: np.ndarray, mos: np.ndarray) -> dict[str, float]:
    return {"srocc": srocc(predicted, mos), "plcc": plcc(predicted, mos), "n": int(len(mos))}


def evaluate_artifacts(
    model: QualityModel, corpus: ArtifactCorpus, threshold: float = 0.5
) -> dict[str, dict[str, float]]:
    """Per-artifact F1 / accuracy / AUC of the diagnostic head on a weak-label
    corpus. AUC is NaN for single-class columns."""
    if len(corpus) == 0:
        raise DegenerateInputError("artifact corpus is empty")
    z, labels = _fused_representation(model, corpus)
    model.head_a.eval()
    with torch.no_grad():
        preds = torch.sigmoid(model.head_a(z)).numpy()
    y = labels.numpy()
    table = {}
    for j, kind in enumerate(ARTIFACT_KINDS[: preds.shape[1]]):
        f1, acc, auc_value = f1_accuracy_auc(preds[:, j], y[:, j], threshold)
        table[kind.value] = {
            "f1": f1,
            "accuracy": acc,
            "auc": auc_value,
            "n_pos": int(y[:, j].sum()),
        }
    return table


def render_quality_table(quality: dict[str, dict[str, float]]) -> str:
    lines = [f"{'split':<24}{'SROCC':>10}{'PLCC':>10}{'n':>8}"]
    for split in sorted(quality):
        row = quality[split]
        lines.append(
            f"{split:<24}{row['srocc']:>10.4f}{row['plcc']:>10.4f}{row['n']:>8d}"
        )
    return "\n".join(lines)


def render_artifact_table(artifacts: dict[str, dict[str, float]]) -> str:
    lines = [f"{'artifact':<26}{'F1':>8}{'Acc':>8}{'AUC':>8}{'pos':>6}"]
    for name in sorted(artifacts):
        row = artifacts[name]
        auc_str = f"{row['auc']:.4f}" if np.isfinite(row["auc"]) else "   nan"
        lines.append(
            f"{name:<26}{row['f1']:>8.4f}{row['accuracy']:>8.4f}{auc_str:>8}{row['n_pos']:>6d}"
        )
    return "\n".join(lines)
