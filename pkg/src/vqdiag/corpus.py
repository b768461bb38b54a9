"""On-disk corpus layout: raw clips plus JSON manifests and provenance.

A corpus directory is self-describing: ``manifest.json`` at its root lists
every entry (file stems, domain tags, labels, proxy scores, provenance) and
each clip's own header sidecar repeats the distortion provenance. Manifests
are written with sorted keys and no timestamps, so regeneration with the
same seed is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .distortions import DistortionSpec
from .errors import ArgumentError
from .frames import Domain, FrameSequence, load_raw, save_raw
from .synthesis import ArtifactPatch, PatchPair, ScoredVideo, SyntheticMOS

MANIFEST = "manifest.json"


def _write_manifest(directory: Path, payload: dict) -> Path:
    path = directory / MANIFEST
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def _specs_to_json(specs) -> list[dict]:
    return [s.to_dict() for s in specs]


def write_pair_corpus(
    directory: str | Path, pairs: list[PatchPair], meta: dict | None = None
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    domains = {p.domain for p in pairs}
    if len(domains) != 1:
        raise ArgumentError(f"a pair corpus holds exactly one domain, got {domains}")
    for p in pairs:
        save_raw(p.patch_a, directory / f"{p.pair_id}-a", [p.spec_a.to_dict()])
        save_raw(p.patch_b, directory / f"{p.pair_id}-b", [p.spec_b.to_dict()])
        save_raw(p.reference, directory / f"{p.pair_id}-ref", [])
        entries.append(
            {
                "pair_id": p.pair_id,
                "files": {
                    "a": f"{p.pair_id}-a",
                    "b": f"{p.pair_id}-b",
                    "ref": f"{p.pair_id}-ref",
                },
                "rank_label": p.rank_label,
                "proxy": {"a": p.proxy_a, "b": p.proxy_b},
                "specs": {"a": p.spec_a.to_dict(), "b": p.spec_b.to_dict()},
                "crop_box": p.crop_box,
                "format_tag": p.format_tag,
            }
        )
    payload = {
        "corpus_type": "ranking_pairs",
        "domain": pairs[0].domain.value,
        "meta": meta or {},
        "entries": entries,
    }
    return _write_manifest(directory, payload)


def write_artifact_corpus(
    directory: str | Path, patches: list[ArtifactPatch], meta: dict | None = None
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for p in patches:
        save_raw(p.patch, directory / p.patch_id, _specs_to_json(p.specs))
        save_raw(p.reference, directory / f"{p.patch_id}-ref", [])
        entries.append(
            {
                "patch_id": p.patch_id,
                "files": {"patch": p.patch_id, "ref": f"{p.patch_id}-ref"},
                "labels": [int(b) for b in p.labels],
                "specs": _specs_to_json(p.specs),
                "crop_box": p.crop_box,
            }
        )
    payload = {"corpus_type": "artifact_patches", "meta": meta or {}, "entries": entries}
    return _write_manifest(directory, payload)


def write_video_corpus(
    directory: str | Path, videos: list[ScoredVideo], meta: dict | None = None
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for v in videos:
        save_raw(v.dist, directory / f"{v.video_id}-dist", _specs_to_json(v.specs))
        save_raw(v.reference, directory / f"{v.video_id}-ref", [])
        entries.append(
            {
                "video_id": v.video_id,
                "files": {"dist": f"{v.video_id}-dist", "ref": f"{v.video_id}-ref"},
                "mos": {
                    "score": v.mos.score,
                    "severity_source": v.mos.severity_source,
                    "noise_seed": v.mos.noise_seed,
                },
                "labels": [int(b) for b in v.labels],
                "specs": _specs_to_json(v.specs),
                "domain": v.domain.value,
            }
        )
    payload = {"corpus_type": "scored_videos", "meta": meta or {}, "entries": entries}
    return _write_manifest(directory, payload)


class _Corpus:
    expected_type = ""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        manifest_path = self.directory / MANIFEST
        if not manifest_path.exists():
            raise ArgumentError(f"no {MANIFEST} in {self.directory}")
        self.manifest = json.loads(manifest_path.read_text())
        if self.manifest.get("corpus_type") != self.expected_type:
            raise ArgumentError(
                f"{self.directory} holds {self.manifest.get('corpus_type')!r}, "
                f"expected {self.expected_type!r}"
            )
        self.entries = self.manifest["entries"]

    def __len__(self) -> int:
        return len(self.entries)

    def _load(self, stem: str) -> FrameSequence:
        return load_raw(self.directory / stem)


class PairCorpus(_Corpus):
    expected_type = "ranking_pairs"

    @property
    def domain(self) -> Domain:
        return Domain(self.manifest["domain"])

    def load_pair(self, i: int) -> tuple[FrameSequence, FrameSequence, FrameSequence, int]:
        e = self.entries[i]
        return (
            self._load(e["files"]["a"]),
            self._load(e["files"]["b"]),
            self._load(e["files"]["ref"]),
            int(e["rank_label"]),
        )

    def specs(self, i: int) -> tuple[DistortionSpec, DistortionSpec]:
        e = self.entries[i]
        return (
            DistortionSpec.from_dict(e["specs"]["a"]),
            DistortionSpec.from_dict(e["specs"]["b"]),
        )


class ArtifactCorpus(_Corpus):
    expected_type = "artifact_patches"

    def load_patch(self, i: int) -> tuple[FrameSequence, FrameSequence, np.ndarray]:
        e = self.entries[i]
        labels = np.asarray(e["labels"], dtype=np.int64)
        return self._load(e["files"]["patch"]), self._load(e["files"]["ref"]), labels

    def specs(self, i: int) -> list[DistortionSpec]:
        return [DistortionSpec.from_dict(d) for d in self.entries[i]["specs"]]


class VideoCorpus(_Corpus):
    expected_type = "scored_videos"

    def load_video(self, i: int) -> tuple[FrameSequence, FrameSequence, float, np.ndarray]:
        e = self.entries[i]
        labels = np.asarray(e["labels"], dtype=np.int64)
        return (
            self._load(e["files"]["dist"]),
            self._load(e["files"]["ref"]),
            float(e["mos"]["score"]),
            labels,
        )

    def mos(self, i: int) -> SyntheticMOS:
        m = self.entries[i]["mos"]
        return SyntheticMOS(m["score"], m["severity_source"], m["noise_seed"])

    def domain(self, i: int) -> Domain:
        return Domain(self.entries[i]["domain"])


def open_corpus(directory: str | Path):
    """Open any corpus directory by sniffing its manifest type."""
    manifest_path = Path(directory) / MANIFEST
    if not manifest_path.exists():
        raise ArgumentError(f"no {MANIFEST} in {directory}")
    ctype = json.loads(manifest_path.read_text()).get("corpus_type")
    for cls in (PairCorpus, ArtifactCorpus, VideoCorpus):
        if cls.expected_type == ctype:
            return cls(directory)
    raise ArgumentError(f"unknown corpus type {ctype!r} in {directory}")
