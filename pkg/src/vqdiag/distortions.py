"""Procedural distortion kernels with a monotone five-level severity ladder.

Every kind belongs to exactly one perceptual domain and is a pure function of
(source, spec): reapplying the same spec reproduces the output byte for byte.
Severity tables are chosen so the matching domain proxy degrades strictly
as severity climbs; kinds with a random element (grain, block loss, jitter,
black frame) draw their randomness once from the spec seed, independent of
severity, so higher levels corrupt strict supersets.

Kind -> domain -> artifact-bit table:

    kind                    domain    artifact bit
    ------------------------------------------------
    blockiness              spatial   3  block
    gaussian_blur           spatial   4  spatial blur
    grain_noise             spatial   2  grain
    aliasing                spatial   6  aliasing
    transmission_block_loss spatial   8  transmission
    banding                 color     7  banding
    tone_error              color     -
    chroma_gain_error       color     -
    dark_scene              color     1  dark scene
    frame_drop_judder       temporal  5  dropped frames
    ghost_blend             temporal  -
    temporal_jitter         temporal  -
    black_frame             temporal  9  black frame
    motion_blur             temporal  0  motion blur

Kinds without an artifact bit appear only in ranking corpora, never in the
weak-label corpora.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import gaussian_filter

from .errors import ArgumentError
from .frames import Domain, FrameSequence, from_float

SEVERITIES = (1, 2, 3, 4, 5)
MIN_TEMPORAL_FRAMES = 4


class DistortionKind(str, Enum):
    BLOCKINESS = "blockiness"
    GAUSSIAN_BLUR = "gaussian_blur"
    GRAIN_NOISE = "grain_noise"
    ALIASING = "aliasing"
    TRANSMISSION_BLOCK_LOSS = "transmission_block_loss"
    BANDING = "banding"
    TONE_ERROR = "tone_error"
    CHROMA_GAIN_ERROR = "chroma_gain_error"
    DARK_SCENE = "dark_scene"
    FRAME_DROP_JUDDER = "frame_drop_judder"
    GHOST_BLEND = "ghost_blend"
    TEMPORAL_JITTER = "temporal_jitter"
    BLACK_FRAME = "black_frame"
    MOTION_BLUR = "motion_blur"


KIND_DOMAIN: dict[DistortionKind, Domain] = {
    DistortionKind.BLOCKINESS: Domain.SPATIAL,
    DistortionKind.GAUSSIAN_BLUR: Domain.SPATIAL,
    DistortionKind.GRAIN_NOISE: Domain.SPATIAL,
    DistortionKind.ALIASING: Domain.SPATIAL,
    DistortionKind.TRANSMISSION_BLOCK_LOSS: Domain.SPATIAL,
    DistortionKind.BANDING: Domain.COLOR,
    DistortionKind.TONE_ERROR: Domain.COLOR,
    DistortionKind.CHROMA_GAIN_ERROR: Domain.COLOR,
    DistortionKind.DARK_SCENE: Domain.COLOR,
    DistortionKind.FRAME_DROP_JUDDER: Domain.TEMPORAL,
    DistortionKind.GHOST_BLEND: Domain.TEMPORAL,
    DistortionKind.TEMPORAL_JITTER: Domain.TEMPORAL,
    DistortionKind.BLACK_FRAME: Domain.TEMPORAL,
    DistortionKind.MOTION_BLUR: Domain.TEMPORAL,
}

DOMAIN_KINDS: dict[Domain, tuple[DistortionKind, ...]] = {
    d: tuple(k for k, kd in KIND_DOMAIN.items() if kd is d) for d in Domain
}

# The ten diagnosable artifact types, in label-bit order.
ARTIFACT_KINDS: tuple[DistortionKind, ...] = (
    DistortionKind.MOTION_BLUR,
    DistortionKind.DARK_SCENE,
    DistortionKind.GRAIN_NOISE,
    DistortionKind.BLOCKINESS,
    DistortionKind.GAUSSIAN_BLUR,
    DistortionKind.FRAME_DROP_JUDDER,
    DistortionKind.ALIASING,
    DistortionKind.BANDING,
    DistortionKind.TRANSMISSION_BLOCK_LOSS,
    DistortionKind.BLACK_FRAME,
)

ARTIFACT_BIT: dict[DistortionKind, int] = {k: i for i, k in enumerate(ARTIFACT_KINDS)}

# Kinds needing at least MIN_TEMPORAL_FRAMES frames to be meaningful.
_NEEDS_FRAMES = {
    DistortionKind.FRAME_DROP_JUDDER,
    DistortionKind.GHOST_BLEND,
    DistortionKind.TEMPORAL_JITTER,
    DistortionKind.BLACK_FRAME,
}


@dataclass(frozen=True)
class DistortionSpec:
    """One distortion to apply: kind, severity 1..5, and a 64-bit seed.

    ``params`` overrides individual kernel knobs (e.g. the blockiness
    quantization step) and is recorded in provenance alongside the rest.
    """

    kind: DistortionKind
    severity: int
    seed: int = 0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise ArgumentError(f"severity must be 1..5, got {self.severity}")
        kind = DistortionKind(self.kind)
        if kind is not self.kind:
            object.__setattr__(self, "kind", kind)

    @property
    def domain(self) -> Domain:
        return KIND_DOMAIN[self.kind]

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "severity": self.severity, "seed": self.seed}
        if self.params:
            d["params"] = dict(self.params)
        return d

    @staticmethod
    def from_dict(d: dict) -> "DistortionSpec":
        return DistortionSpec(
            DistortionKind(d["kind"]), d["severity"], d.get("seed", 0), d.get("params", {})
        )


def _rng(spec: DistortionSpec) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(spec.seed))


# ---------------------------------------------------------------------------
# Kernels. Each takes normalized float64 frames (T, H, W, 3) in [0, 1] and
# returns the same shape; re-quantization happens once in apply_distortion.

_BLOCK = 8
_BLOCKINESS_STEP = {1: 4.0, 2: 8.0, 3: 16.0, 4: 32.0, 5: 64.0}  # 8-bit units


def quantize_dct_blocks(x: np.ndarray, step: float) -> np.ndarray:
    """Quantize 8x8 DCT coefficients with a uniform step (8-bit pixel units).

    step <= 1 is the identity by definition. Trailing rows/columns that do
    not fill a block pass through unchanged.
    """
    if step <= 1.0:
        return x.copy()
    t, h, w, c = x.shape
    hb, wb = h // _BLOCK, w // _BLOCK
    out = x.copy()
    region = x[:, : hb * _BLOCK, : wb * _BLOCK] * 255.0
    blocks = region.reshape(t, hb, _BLOCK, wb, _BLOCK, c).transpose(0, 1, 3, 5, 2, 4)
    coeffs = dctn(blocks, axes=(-2, -1), norm="ortho")
    coeffs = np.rint(coeffs / step) * step
    blocks = idctn(coeffs, axes=(-2, -1), norm="ortho")
    region = blocks.transpose(0, 1, 4, 2, 5, 3).reshape(t, hb * _BLOCK, wb * _BLOCK, c)
    out[:, : hb * _BLOCK, : wb * _BLOCK] = region / 255.0
    return out


_BLUR_SIGMA = {1: 0.6, 2: 1.0, 3: 1.6, 4: 2.4, 5: 3.5}


def _gaussian_blur(x, spec):
    s = spec.params.get("sigma", _BLUR_SIGMA[spec.severity])
    return gaussian_filter(x, sigma=(0.0, s, s, 0.0), mode="nearest")


_GRAIN_SIGMA = {1: 2.0, 2: 4.0, 3: 8.0, 4: 14.0, 5: 22.0}  # 8-bit units


def _grain_noise(x, spec):
    sigma = spec.params.get("sigma", _GRAIN_SIGMA[spec.severity]) / 255.0
    noise = _rng(spec).standard_normal(x.shape)
    return x + sigma * noise


# Severity blends toward one fixed unfiltered decimation, so the error norm
# is exactly proportional to the blend weight: strictly monotone regardless
# of content structure.
_ALIAS_FACTOR = 4
_ALIAS_BLEND = {1: 0.2, 2: 0.4, 3: 0.6, 4: 0.8, 5: 1.0}


def _aliasing(x, spec):
    f = int(spec.params.get("factor", _ALIAS_FACTOR))
    beta = spec.params.get("blend", _ALIAS_BLEND[spec.severity])
    t, h, w, c = x.shape
    rows = (np.arange(h) // f) * f
    cols = (np.arange(w) // f) * f
    jagged = x[:, rows][:, :, cols]
    return (1.0 - beta) * x + beta * jagged


_LOSS_BLOCK = 16
_LOSS_FRACTION = {1: 0.02, 2: 0.05, 3: 0.10, 4: 0.20, 5: 0.35}


def _transmission_block_loss(x, spec):
    # Corrupted blocks are a seed-determined permutation prefix, so higher
    # severities corrupt strict supersets; inversion changes every sample.
    frac = spec.params.get("fraction", _LOSS_FRACTION[spec.severity])
    t, h, w, c = x.shape
    hb, wb = max(h // _LOSS_BLOCK, 1), max(w // _LOSS_BLOCK, 1)
    total = t * hb * wb
    order = _rng(spec).permutation(total)
    count = min(total, math.ceil(frac * total))
    out = x.copy()
    for flat in order[:count]:
        ti, rest = divmod(int(flat), hb * wb)
        bi, bj = divmod(rest, wb)
        ys = slice(bi * _LOSS_BLOCK, min((bi + 1) * _LOSS_BLOCK, h))
        xs = slice(bj * _LOSS_BLOCK, min((bj + 1) * _LOSS_BLOCK, w))
        out[ti, ys, xs] = 1.0 - out[ti, ys, xs]
    return out


_BANDING_BITS = {1: 7, 2: 6, 3: 5, 4: 4, 5: 3}


def _banding(x, spec):
    bits = int(spec.params.get("bits", _BANDING_BITS[spec.severity]))
    levels = (1 << bits) - 1
    return np.rint(x * levels) / levels


_TONE_GAMMA = {1: 1.15, 2: 1.35, 3: 1.6, 4: 1.95, 5: 2.4}


def _tone_error(x, spec):
    gamma = spec.params.get("gamma", _TONE_GAMMA[spec.severity])
    return np.power(np.clip(x, 0.0, 1.0), gamma)


_CHROMA_GAIN = {1: 0.85, 2: 0.7, 3: 0.55, 4: 0.4, 5: 0.25}


def rgb_to_ycbcr(x: np.ndarray) -> np.ndarray:
    r, g, b = x[..., 0], x[..., 1], x[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = (b - y) / 1.772 + 0.5
    cr = (r - y) / 1.402 + 0.5
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb(x: np.ndarray) -> np.ndarray:
    y, cb, cr = x[..., 0], x[..., 1], x[..., 2]
    r = y + 1.402 * (cr - 0.5)
    b = y + 1.772 * (cb - 0.5)
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.stack([r, g, b], axis=-1)


def _chroma_gain_error(x, spec):
    gain = spec.params.get("gain", _CHROMA_GAIN[spec.severity])
    ycc = rgb_to_ycbcr(x)
    ycc[..., 1:] = 0.5 + gain * (ycc[..., 1:] - 0.5)
    return ycbcr_to_rgb(ycc)


_DARK_SCALE = {1: 0.75, 2: 0.6, 3: 0.45, 4: 0.32, 5: 0.2}


def _dark_scene(x, spec):
    return x * spec.params.get("scale", _DARK_SCALE[spec.severity])


def _frame_drop_judder(x, spec):
    # Severity counts dropped-and-held frames at isolated interior even
    # positions, drawn as a seed-determined permutation prefix. Isolation
    # keeps each drop's error contribution disjoint, so every level degrades
    # a strict superset of the one below.
    count = int(spec.params.get("count", spec.severity))
    t = x.shape[0]
    candidates = np.arange(2, t - 1, 2)
    order = _rng(spec).permutation(len(candidates))
    idx = np.arange(t)
    for k in order[: min(count, len(candidates))]:
        p = candidates[k]
        idx[p] = p - 1
    return x[idx]


_GHOST_ALPHA = {1: 0.12, 2: 0.2, 3: 0.3, 4: 0.42, 5: 0.55}
_GHOST_LAG = 2


def _ghost_blend(x, spec):
    alpha = spec.params.get("alpha", _GHOST_ALPHA[spec.severity])
    t = x.shape[0]
    lagged = x[np.maximum(np.arange(t) - _GHOST_LAG, 0)]
    return (1.0 - alpha) * x + alpha * lagged


_JITTER_FRACTION = {1: 0.17, 2: 0.34, 3: 0.51, 4: 0.75, 5: 1.0}


def _temporal_jitter(x, spec):
    # Swap adjacent frame pairs; swapped pairs are a seed-determined
    # permutation prefix with a forced strictly growing count, so levels
    # nest. Strict growth needs T >= 10; below that top levels saturate.
    frac = spec.params.get("fraction", _JITTER_FRACTION[spec.severity])
    t = x.shape[0]
    n_pairs = t // 2
    order = _rng(spec).permutation(n_pairs)
    base = math.ceil(frac * n_pairs)
    count = min(n_pairs, max(base, spec.severity))
    idx = np.arange(t)
    for p in order[:count]:
        idx[2 * p], idx[2 * p + 1] = idx[2 * p + 1], idx[2 * p]
    return x[idx]


def _black_frame(x, spec):
    # Severity counts isolated dropped-to-black frames at interior odd
    # positions; the positions are a seed-determined permutation prefix, so
    # each level blacks out a strict superset of the one below.
    count = int(spec.params.get("count", spec.severity))
    t = x.shape[0]
    candidates = np.arange(1, t - 1, 2)
    order = _rng(spec).permutation(len(candidates))
    out = x.copy()
    for k in order[: min(count, len(candidates))]:
        out[candidates[k]] = 0.0
    return out


# Severity blends toward one fixed directional shift-average, so the error
# norm scales exactly with the blend weight (see _aliasing).
_MOTION_TAPS = 8
_MOTION_BLEND = {1: 0.2, 2: 0.4, 3: 0.6, 4: 0.8, 5: 1.0}


def _motion_blur(x, spec):
    taps = int(spec.params.get("taps", _MOTION_TAPS))
    beta = spec.params.get("blend", _MOTION_BLEND[spec.severity])
    w = x.shape[2]
    acc = np.zeros_like(x)
    for j in range(taps):
        cols = np.maximum(np.arange(w) - j, 0)
        acc += x[:, :, cols]
    return (1.0 - beta) * x + beta * (acc / taps)


_KERNELS = {
    DistortionKind.BLOCKINESS: lambda x, s: quantize_dct_blocks(
        x, s.params.get("step", _BLOCKINESS_STEP[s.severity])
    ),
    DistortionKind.GAUSSIAN_BLUR: _gaussian_blur,
    DistortionKind.GRAIN_NOISE: _grain_noise,
    DistortionKind.ALIASING: _aliasing,
    DistortionKind.TRANSMISSION_BLOCK_LOSS: _transmission_block_loss,
    DistortionKind.BANDING: _banding,
    DistortionKind.TONE_ERROR: _tone_error,
    DistortionKind.CHROMA_GAIN_ERROR: _chroma_gain_error,
    DistortionKind.DARK_SCENE: _dark_scene,
    DistortionKind.FRAME_DROP_JUDDER: _frame_drop_judder,
    DistortionKind.GHOST_BLEND: _ghost_blend,
    DistortionKind.TEMPORAL_JITTER: _temporal_jitter,
    DistortionKind.BLACK_FRAME: _black_frame,
    DistortionKind.MOTION_BLUR: _motion_blur,
}


def apply_distortion(src: FrameSequence, spec: DistortionSpec) -> FrameSequence:
    """Apply one distortion; output keeps the source geometry and bit depth."""
    if spec.kind in _NEEDS_FRAMES and src.t < MIN_TEMPORAL_FRAMES:
        raise ArgumentError(
            f"{spec.kind.value} needs at least {MIN_TEMPORAL_FRAMES} frames, got {src.t}"
        )
    x = src.as_float()
    y = _KERNELS[spec.kind](x, spec)
    out = from_float(y, src.bit_depth, src.frame_rate, src.range_tag)
    return out


def apply_chain(src: FrameSequence, specs: list[DistortionSpec]) -> FrameSequence:
    """Apply several distortions in the canonical order (artifact-bit order,
    unknown-bit kinds in between, black_frame always last so it is not
    painted over)."""
    ordered = sorted(specs, key=_canonical_rank)
    out = src
    for spec in ordered:
        out = apply_distortion(out, spec)
    return out


def _canonical_rank(spec: DistortionSpec) -> tuple[int, int]:
    if spec.kind is DistortionKind.BLACK_FRAME:
        return (2, 0)
    return (0, ARTIFACT_BIT.get(spec.kind, len(ARTIFACT_KINDS)))
