"""Domain-matched proxy oracles used to label ranking pairs.

Each perceptual domain has one built-in analytic proxy (higher is better):

* spatial  -- luma PSNR
* color    -- negated chroma-weighted MSE after a gamma-like transfer,
              weights 0.2 / 0.4 / 0.4 on the Y / Cb / Cr planes
* temporal -- negated MSE between the successive-frame difference signals
              of reference and distorted luma

Externally computed scores can replace the built-ins through a score table
keyed by patch id (see :mod:`vqdiag.synthesis`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distortions import rgb_to_ycbcr
from .errors import ArgumentError, ConfigurationError
from .frames import Domain, FrameSequence
from .metrics import luma

_TRANSFER_GAMMA = 1.0 / 2.2
_COLOR_WEIGHTS = (0.2, 0.4, 0.4)


@dataclass(frozen=True)
class ProxyMetricRef:
    """Identifies the active proxy for a domain; direction is always
    higher-is-better."""

    name: str
    domain: Domain
    direction: str = "higher_is_better"


BUILTIN_PROXIES = {
    Domain.SPATIAL: ProxyMetricRef("luma_psnr", Domain.SPATIAL),
    Domain.COLOR: ProxyMetricRef("neg_chroma_weighted_mse", Domain.COLOR),
    Domain.TEMPORAL: ProxyMetricRef("neg_temporal_diff_mse", Domain.TEMPORAL),
}


def _check_geometry(ref: FrameSequence, dist: FrameSequence):
    if not ref.same_geometry(dist) or ref.bit_depth != dist.bit_depth:
        raise ArgumentError("proxy inputs must share geometry and bit depth")


def luma_psnr(ref: FrameSequence, dist: FrameSequence) -> float:
    """PSNR over normalized luma; identical inputs give the +inf sentinel."""
    _check_geometry(ref, dist)
    a = luma(ref.as_float())
    b = luma(dist.as_float())
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def neg_chroma_weighted_mse(ref: FrameSequence, dist: FrameSequence) -> float:
    _check_geometry(ref, dist)
    a = rgb_to_ycbcr(np.power(ref.as_float(), _TRANSFER_GAMMA))
    b = rgb_to_ycbcr(np.power(dist.as_float(), _TRANSFER_GAMMA))
    score = 0.0
    for plane, weight in enumerate(_COLOR_WEIGHTS):
        score += weight * float(np.mean((a[..., plane] - b[..., plane]) ** 2))
    return -score


def neg_temporal_diff_mse(ref: FrameSequence, dist: FrameSequence) -> float:
    """Blind to any static spatial error: only frame-to-frame change counts.

    Differencing happens on the integer frames (luma is linear, so the order
    is immaterial mathematically) to keep the blindness exact: a constant
    per-frame shift cancels bit for bit.
    """
    _check_geometry(ref, dist)
    if ref.t < 2:
        raise ArgumentError("temporal proxy needs at least 2 frames")
    scale = float(ref.max_value)
    da = luma(np.diff(ref.frames.astype(np.int64), axis=0)) / scale
    db = luma(np.diff(dist.frames.astype(np.int64), axis=0)) / scale
    return -float(np.mean((da - db) ** 2))


_PROXY_FUNCTIONS = {
    "luma_psnr": luma_psnr,
    "neg_chroma_weighted_mse": neg_chroma_weighted_mse,
    "neg_temporal_diff_mse": neg_temporal_diff_mse,
}


def compute_proxy(
    ref: FrameSequence,
    dist: FrameSequence,
    proxy: ProxyMetricRef,
    expected_domain: Domain | None = None,
) -> float:
    """Score one distorted clip against its reference; higher means better."""
    if expected_domain is not None and proxy.domain is not Domain(expected_domain):
        raise ConfigurationError(
            f"proxy {proxy.name} serves domain {proxy.domain.value}, "
            f"declared usage is {Domain(expected_domain).value}"
        )
    try:
        fn = _PROXY_FUNCTIONS[proxy.name]
    except KeyError:
        raise ConfigurationError(f"unknown proxy {proxy.name!r}") from None
    return fn(ref, dist)


class ExternalScoreTable:
    """Externally computed proxy scores keyed by patch id.

    The file is a JSON object mapping patch id to score; the id scheme is
    documented in :mod:`vqdiag.synthesis`. Missing ids raise KeyError so the
    generator can surface a diagnostic.
    """

    def __init__(self, scores: dict[str, float]):
        self.scores = {str(k): float(v) for k, v in scores.items()}

    @staticmethod
    def load(path: str | Path) -> "ExternalScoreTable":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: proxy score file must be a JSON object")
        return ExternalScoreTable(data)

    def __getitem__(self, patch_id: str) -> float:
        return self.scores[patch_id]

    def __contains__(self, patch_id: str) -> bool:
        return patch_id in self.scores
