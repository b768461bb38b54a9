"""Synthetic source content and the three training corpora generators.

Everything here is a pure function of (inputs, seed). Per-item seeds come
from a documented splittable scheme -- ``item_seed(master, index, tag)``
hashes the three together -- so parallel and serial generation produce
identical corpora.

Patch id scheme (stable keys for external proxy-score files):

* ranking pairs:     ``<domain>-<index:06d>-a`` / ``...-b``
* artifact patches:  ``art-<index:06d>``
* scored videos:     ``vid-<index:06d>``

An optional id prefix namespaces splits (``val-spatial-000001-a``).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .distortions import (
    ARTIFACT_BIT,
    ARTIFACT_KINDS,
    DOMAIN_KINDS,
    MIN_TEMPORAL_FRAMES,
    SEVERITIES,
    DistortionKind,
    DistortionSpec,
    apply_chain,
    apply_distortion,
)
from .errors import ArgumentError, ConfigurationError, GenerationError
from .frames import Domain, FrameSequence, RangeTag, crop, from_float
from .proxies import BUILTIN_PROXIES, ExternalScoreTable, ProxyMetricRef, compute_proxy

UNIFORM_SEVERITY = (0.2, 0.2, 0.2, 0.2, 0.2)

MOS_CEILING = 100.0
MOS_SEVERITY_SLOPE = 18.0
MOS_JITTER = 4.0

KIND_MIN_FRAMES = {
    DistortionKind.FRAME_DROP_JUDDER: MIN_TEMPORAL_FRAMES,
    DistortionKind.GHOST_BLEND: MIN_TEMPORAL_FRAMES,
    DistortionKind.TEMPORAL_JITTER: MIN_TEMPORAL_FRAMES,
    DistortionKind.BLACK_FRAME: MIN_TEMPORAL_FRAMES,
}


def item_seed(master_seed: int, index: int, tag: str = "") -> int:
    """Splittable per-item seed: 64-bit hash of (master seed, tag, index)."""
    digest = hashlib.blake2b(
        f"{master_seed}:{tag}:{index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _gen(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# Procedural source content


@dataclass(frozen=True)
class SourceClip:
    seq: FrameSequence
    source_id: str
    format_tag: str  # "hd" or "uhd" (desk-scale stand-ins for resolution tiers)


def make_source(
    seed: int,
    frames: int = 12,
    height: int = 128,
    width: int = 128,
    bit_depth: int = 8,
    frame_rate: float = 30.0,
    range_tag: RangeTag = RangeTag.SDR,
) -> FrameSequence:
    """Procedural clip with guaranteed texture, color variety, and motion.

    Two drifting sinusoidal plaids, a handful of moving colored blobs, and a
    static fine texture; global drift keeps frame-to-frame differences
    informative for the temporal proxy.
    """
    rng = _gen(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    out = np.zeros((frames, height, width, 3))

    n_plaids = 2
    plaids = []
    for _ in range(n_plaids):
        freq = rng.uniform(0.02, 0.11, size=2)
        vel = rng.uniform(0.7, 2.5, size=2) * rng.choice([-1.0, 1.0], size=2)
        phase = rng.uniform(0.0, 2 * np.pi, size=3)
        amp = rng.uniform(0.08, 0.18, size=3)
        plaids.append((freq, vel, phase, amp))

    # Blobs drift without wrap-around: a modulo teleport would put a huge
    # single-frame spike into the motion signal and poison the temporal proxy.
    n_blobs = int(rng.integers(3, 6))
    blobs = []
    for _ in range(n_blobs):
        center = rng.uniform([0.2 * height, 0.2 * width], [0.8 * height, 0.8 * width])
        vel = rng.uniform(0.8, 2.2, size=2) * rng.choice([-1.0, 1.0], size=2)
        radius = rng.uniform(min(height, width) * 0.08, min(height, width) * 0.25)
        color = rng.uniform(-0.35, 0.35, size=3)
        blobs.append((center, vel, radius, color))

    texture = gaussian_filter(rng.standard_normal((height, width, 3)), (0.7, 0.7, 0.0))
    texture *= 0.05
    base = rng.uniform(0.35, 0.6, size=3)

    for t in range(frames):
        frame = np.broadcast_to(base, (height, width, 3)).copy()
        frame += texture
        for freq, vel, phase, amp in plaids:
            arg = 2 * np.pi * (freq[0] * (xx - vel[0] * t) + freq[1] * (yy - vel[1] * t))
            frame += amp * np.sin(arg[..., None] + phase)
        for center, vel, radius, color in blobs:
            cy = center[0] + vel[0] * t
            cx = center[1] + vel[1] * t
            d2 = (yy - cy) ** 2 + (xx - cx) ** 2
            frame += np.exp(-d2 / (2 * radius**2))[..., None] * color
        out[t] = frame

    out = 0.5 + (out - 0.5) * 0.92  # keep headroom so noise kernels rarely clip
    if range_tag is RangeTag.HDR_LIKE:
        out = np.power(np.clip(out, 0.0, 1.0), 1.0 / 2.4)
    return from_float(np.clip(out, 0.0, 1.0), bit_depth, frame_rate, range_tag)


def make_sources(
    count: int,
    seed: int,
    frames: int = 12,
    height: int = 128,
    width: int = 128,
    hdr_fraction: float = 0.0,
    tag: str = "src",
) -> list[SourceClip]:
    """A deterministic bank of source clips; ids carry the bank tag.

    ``hdr_fraction`` of the clips are emitted as 10-bit HDR-like content;
    format tags alternate hd/uhd as a desk-scale resolution-tier stand-in.
    """
    sources = []
    n_hdr = int(round(hdr_fraction * count))
    for i in range(count):
        hdr = i < n_hdr
        seq = make_source(
            item_seed(seed, i, f"{tag}-source"),
            frames=frames,
            height=height,
            width=width,
            bit_depth=10 if hdr else 8,
            range_tag=RangeTag.HDR_LIKE if hdr else RangeTag.SDR,
        )
        sources.append(SourceClip(seq, f"{tag}-{i:04d}", "hd" if i % 2 == 0 else "uhd"))
    return sources


def _random_crop(rng, source: SourceClip, height, width, clip_len) -> tuple[FrameSequence, dict]:
    seq = source.seq
    if seq.height < height or seq.width < width or seq.t < clip_len:
        raise ArgumentError(
            f"source {source.source_id} ({seq.t}x{seq.height}x{seq.width}) "
            f"smaller than requested {clip_len}x{height}x{width} patch"
        )
    top = int(rng.integers(0, seq.height - height + 1))
    left = int(rng.integers(0, seq.width - width + 1))
    t0 = int(rng.integers(0, seq.t - clip_len + 1))
    patch = crop(seq, top, left, height, width)
    patch = patch.with_frames(patch.frames[t0 : t0 + clip_len].copy())
    box = {"top": top, "left": left, "t0": t0, "source_id": source.source_id}
    return patch, box


# ---------------------------------------------------------------------------
# Stage-1 ranking pairs


@dataclass(frozen=True)
class PatchPair:
    """Two distortions of one reference crop plus the binary proxy verdict.

    ``rank_label`` is 1 iff ``patch_a`` scores higher under the domain proxy.
    """

    pair_id: str
    patch_a: FrameSequence
    patch_b: FrameSequence
    reference: FrameSequence
    domain: Domain
    rank_label: int
    spec_a: DistortionSpec
    spec_b: DistortionSpec
    proxy_a: float
    proxy_b: float
    crop_box: dict
    format_tag: str


def _draw_spec(rng, kinds, severity_weights) -> DistortionSpec:
    kind = kinds[int(rng.integers(0, len(kinds)))]
    severity = int(rng.choice(SEVERITIES, p=severity_weights))
    return DistortionSpec(kind, severity, int(rng.integers(0, 2**63)))


def generate_patch_pairs(
    sources: list[SourceClip],
    domain: Domain,
    count: int,
    seed: int,
    patch_height: int = 64,
    patch_width: int = 64,
    clip_len: int = 12,
    severity_weights: tuple[float, ...] = UNIFORM_SEVERITY,
    proxy: ProxyMetricRef | None = None,
    external_scores: ExternalScoreTable | None = None,
    id_prefix: str = "",
    retry_budget: int = 20,
) -> list[PatchPair]:
    """Stage-1 training units: proxy-labeled pairs from one domain's kinds.

    Pairs whose proxy scores tie exactly are discarded and regenerated from
    the same per-item stream; exceeding ``retry_budget`` retries for one item
    aborts with diagnostics.
    """
    if count < 1:
        raise ArgumentError("count must be >= 1")
    if not sources:
        raise ArgumentError("need at least one source clip")
    domain = Domain(domain)
    kinds = DOMAIN_KINDS[domain]
    if clip_len < MIN_TEMPORAL_FRAMES:
        kinds = tuple(k for k in kinds if KIND_MIN_FRAMES.get(k, 1) <= clip_len)
        if not kinds:
            raise ConfigurationError(
                f"no {domain.value} distortion fits clips of {clip_len} frames"
            )
    builtin = proxy or BUILTIN_PROXIES[domain]
    pairs = []
    for i in range(count):
        rng = _gen(item_seed(seed, i, f"{id_prefix}pairs-{domain.value}"))
        pair_id = f"{id_prefix}{domain.value}-{i:06d}"
        pair = None
        for _ in range(retry_budget):
            source = sources[int(rng.integers(0, len(sources)))]
            reference, box = _random_crop(rng, source, patch_height, patch_width, clip_len)
            spec_a = _draw_spec(rng, kinds, severity_weights)
            spec_b = _draw_spec(rng, kinds, severity_weights)
            patch_a = apply_distortion(reference, spec_a)
            patch_b = apply_distortion(reference, spec_b)
            if external_scores is not None:
                try:
                    score_a = external_scores[pair_id + "-a"]
                    score_b = external_scores[pair_id + "-b"]
                except KeyError as missing:
                    raise GenerationError(
                        f"external proxy table has no score for patch {missing}"
                    ) from None
            else:
                score_a = compute_proxy(reference, patch_a, builtin, domain)
                score_b = compute_proxy(reference, patch_b, builtin, domain)
            if score_a == score_b:
                continue  # exact proxy tie: the binary label is undefined
            pair = PatchPair(
                pair_id=pair_id,
                patch_a=patch_a,
                patch_b=patch_b,
                reference=reference,
                domain=domain,
                rank_label=int(score_a > score_b),
                spec_a=spec_a,
                spec_b=spec_b,
                proxy_a=score_a,
                proxy_b=score_b,
                crop_box=box,
                format_tag=source.format_tag,
            )
            break
        if pair is None:
            raise GenerationError(
                f"could not draw an untied {domain.value} pair for item {i} "
                f"within {retry_budget} retries (proxy {builtin.name}, seed {seed})"
            )
        pairs.append(pair)
    return pairs


# ---------------------------------------------------------------------------
# Stage-2 weak-label patches


@dataclass(frozen=True)
class ArtifactPatch:
    patch_id: str
    patch: FrameSequence
    reference: FrameSequence
    labels: np.ndarray  # (len(ARTIFACT_KINDS),) of {0,1}
    specs: tuple[DistortionSpec, ...]
    crop_box: dict


def weak_label_vector(specs) -> np.ndarray:
    """Label bit i is set iff artifact i was actually injected."""
    labels = np.zeros(len(ARTIFACT_KINDS), dtype=np.int64)
    for spec in specs:
        bit = ARTIFACT_BIT.get(spec.kind)
        if bit is None:
            raise ArgumentError(f"{spec.kind.value} has no artifact label bit")
        labels[bit] = 1
    return labels


def generate_artifact_patches(
    sources: list[SourceClip],
    count: int,
    seed: int,
    patch_height: int = 64,
    patch_width: int = 64,
    clip_len: int = 12,
    pristine_fraction: float = 0.2,
    max_artifacts: int = 3,
    severity_weights: tuple[float, ...] = UNIFORM_SEVERITY,
    id_prefix: str = "",
) -> list[ArtifactPatch]:
    """Stage-2 training units: patches with construction-known artifact bits.

    Each patch carries 0-3 artifacts drawn without replacement from the
    ten-type taxonomy; a configured fraction stays pristine (all-zero label).
    Combinations needing more frames than the clip offers are re-drawn.
    """
    if count < 1:
        raise ArgumentError("count must be >= 1")
    if not sources:
        raise ArgumentError("need at least one source clip")
    patches = []
    for i in range(count):
        rng = _gen(item_seed(seed, i, f"{id_prefix}artifacts"))
        patch_id = f"{id_prefix}art-{i:06d}"
        source = sources[int(rng.integers(0, len(sources)))]
        reference, box = _random_crop(rng, source, patch_height, patch_width, clip_len)
        if rng.random() < pristine_fraction:
            specs: tuple[DistortionSpec, ...] = ()
            patch = reference
        else:
            while True:
                n = int(rng.integers(1, max_artifacts + 1))
                chosen = rng.choice(len(ARTIFACT_KINDS), size=n, replace=False)
                kinds = [ARTIFACT_KINDS[j] for j in sorted(int(c) for c in chosen)]
                if all(KIND_MIN_FRAMES.get(k, 1) <= clip_len for k in kinds):
                    break
            specs = tuple(
                DistortionSpec(
                    kind,
                    int(rng.choice(SEVERITIES, p=severity_weights)),
                    int(rng.integers(0, 2**63)),
                )
                for kind in kinds
            )
            patch = apply_chain(reference, list(specs))
        patches.append(
            ArtifactPatch(
                patch_id=patch_id,
                patch=patch,
                reference=reference,
                labels=weak_label_vector(specs),
                specs=specs,
                crop_box=box,
            )
        )
    return patches


# ---------------------------------------------------------------------------
# Stage-3 scored videos


@dataclass(frozen=True)
class SyntheticMOS:
    score: float
    severity_source: int
    noise_seed: int


@dataclass(frozen=True)
class ScoredVideo:
    video_id: str
    dist: FrameSequence
    reference: FrameSequence
    mos: SyntheticMOS
    labels: np.ndarray
    specs: tuple[DistortionSpec, ...]
    domain: Domain


def synthetic_mos(severity: int, jitter: float) -> float:
    """Score model: ceiling minus a fixed per-severity drop plus jitter."""
    if severity not in SEVERITIES:
        raise ArgumentError(f"severity must be 1..5, got {severity}")
    return float(np.clip(MOS_CEILING - MOS_SEVERITY_SLOPE * severity + jitter, 0.0, 100.0))


def _content_jitter(frames: np.ndarray, salt: int) -> tuple[float, int]:
    digest = hashlib.blake2b(frames.tobytes(), digest_size=8, salt=salt.to_bytes(8, "little"))
    noise_seed = int.from_bytes(digest.digest(), "little")
    jitter = float(_gen(noise_seed).uniform(-MOS_JITTER, MOS_JITTER))
    return jitter, noise_seed


def generate_mos_dataset(
    sources: list[SourceClip],
    count: int,
    seed: int,
    frames: int = 24,
    height: int = 64,
    width: int = 64,
    severity_weights: tuple[float, ...] = UNIFORM_SEVERITY,
    id_prefix: str = "",
) -> list[ScoredVideo]:
    """Stage-3 stand-in for subjectively scored sequences.

    Full-length clips (>= 24 frames) distorted with one artifact from any
    domain; the synthetic opinion score decreases strictly in severity in
    expectation, with content-hash jitter inside +/- 4 points.
    """
    if count < 2:
        raise ArgumentError("a scored dataset needs at least 2 videos")
    if frames < 24:
        raise ArgumentError(f"scored videos must have >= 24 frames, got {frames}")
    if not sources:
        raise ArgumentError("need at least one source clip")
    videos = []
    for i in range(count):
        rng = _gen(item_seed(seed, i, f"{id_prefix}mos"))
        source = sources[int(rng.integers(0, len(sources)))]
        reference, _ = _random_crop(rng, source, height, width, frames)
        kind = ARTIFACT_KINDS[int(rng.integers(0, len(ARTIFACT_KINDS)))]
        spec = DistortionSpec(
            kind,
            int(rng.choice(SEVERITIES, p=severity_weights)),
            int(rng.integers(0, 2**63)),
        )
        dist = apply_distortion(reference, spec)
        jitter, noise_seed = _content_jitter(dist.frames, item_seed(seed, i, "mos-jitter"))
        videos.append(
            ScoredVideo(
                video_id=f"{id_prefix}vid-{i:06d}",
                dist=dist,
                reference=reference,
                mos=SyntheticMOS(synthetic_mos(spec.severity, jitter), spec.severity, noise_seed),
                labels=weak_label_vector([spec]),
                specs=(spec,),
                domain=spec.domain,
            )
        )
    return videos
