"""Rank statistics, classification metrics, and baseline fidelity metrics.

These are the pure numerical routines every evaluation path is built on.
All functions reject NaN/Inf inputs and raise :class:`DegenerateInputError`
for statistically empty cases rather than returning silent NaNs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from .errors import ArgumentError, DegenerateInputError
from .frames import FrameSequence


def _as_score_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ArgumentError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return arr


def _paired(x, y) -> tuple[np.ndarray, np.ndarray]:
    xa = _as_score_vector(x, "x")
    ya = _as_score_vector(y, "y")
    if xa.size != ya.size:
        raise ArgumentError(f"length mismatch: {xa.size} vs {ya.size}")
    if xa.size < 2:
        raise ArgumentError("correlation needs at least 2 points")
    return xa, ya


def plcc(x, y) -> float:
    """Pearson linear correlation coefficient."""
    xa, ya = _paired(x, y)
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    denom = math.sqrt(float(xd @ xd)) * math.sqrt(float(yd @ yd))
    if denom == 0.0:
        raise DegenerateInputError("zero variance input to plcc")
    return float(xd @ yd) / denom


def srocc(x, y) -> float:
    """Spearman rank-order correlation; ties receive average (fractional) ranks."""
    xa, ya = _paired(x, y)
    rx = rankdata(xa, method="average")
    ry = rankdata(ya, method="average")
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise DegenerateInputError("zero rank variance input to srocc")
    return plcc(rx, ry)


def _as_outcomes(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=np.float64)
    l = np.asarray(labels)
    if p.ndim != 1 or l.ndim != 1 or p.size != l.size or p.size < 1:
        raise ArgumentError(f"predictions/labels must be equal-length 1-D, got {p.shape}/{l.shape}")
    if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ArgumentError("predictions must lie in [0, 1]")
    if not np.all(np.isin(l, (0, 1))):
        raise ArgumentError("labels must be 0 or 1")
    return p, l.astype(np.int64)


def auc(predictions, labels) -> float:
    """Probability a random positive outranks a random negative; ties count 0.5.

    Computed via the rank-sum identity, which is exactly the pairwise
    definition with average ranks absorbing the 0.5 tie credit.
    """
    p, l = _as_outcomes(predictions, labels)
    n_pos = int(l.sum())
    n_neg = l.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("AUC needs at least one positive and one negative label")
    ranks = rankdata(p, method="average")
    return float((ranks[l == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def f1_accuracy_auc(
    predictions, labels, threshold: float = 0.5, strict_auc: bool = False
) -> tuple[float, float, float]:
    """F1, accuracy, and AUC for probabilistic binary predictions.

    Predictions >= ``threshold`` count as positive. With single-class labels
    the AUC is undefined: ``strict_auc=True`` raises, otherwise F1/accuracy
    are still returned with ``auc`` set to NaN.
    """
    p, l = _as_outcomes(predictions, labels)
    if not 0.0 < threshold < 1.0:
        raise ArgumentError(f"threshold must be in (0, 1), got {threshold}")
    hard = (p >= threshold).astype(np.int64)
    tp = int(np.sum((hard == 1) & (l == 1)))
    fp = int(np.sum((hard == 1) & (l == 0)))
    fn = int(np.sum((hard == 0) & (l == 1)))
    accuracy = float(np.mean(hard == l))
    f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0
    try:
        auc_value = auc(p, l)
    except DegenerateInputError:
        if strict_auc:
            raise
        auc_value = float("nan")
    return f1, accuracy, auc_value


def psnr(ref: FrameSequence, dist: FrameSequence) -> float:
    """Peak signal-to-noise ratio in dB over all samples.

    Identical inputs return the +inf sentinel (never a large finite stand-in)
    so downstream comparisons stay unambiguous.
    """
    if not ref.same_geometry(dist) or ref.bit_depth != dist.bit_depth:
        raise ArgumentError("psnr requires identical geometry and bit depth")
    a = ref.frames.astype(np.float64)
    b = dist.frames.astype(np.float64)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(ref.max_value**2 / mse)


_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

SSIM_WINDOW = 8
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def luma(frames: np.ndarray) -> np.ndarray:
    """BT.601 luma from an (..., 3) RGB array (any scale)."""
    return frames.astype(np.float64) @ _LUMA_WEIGHTS


def ssim_baseline(ref: FrameSequence, dist: FrameSequence, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over non-overlapping luma windows with standard constants.

    A comparison baseline, not a perceptual model: plain block statistics
    keep it trivially recomputable by hand. Edge rows/columns that do not
    fill a window are ignored.
    """
    if not ref.same_geometry(dist) or ref.bit_depth != dist.bit_depth:
        raise ArgumentError("ssim requires identical geometry and bit depth")
    w = window
    if ref.height < w or ref.width < w:
        raise ArgumentError(f"frame smaller than the {w}x{w} ssim window")
    peak = float(ref.max_value)
    c1 = (_SSIM_K1 * peak) ** 2
    c2 = (_SSIM_K2 * peak) ** 2

    def blocks(seq: FrameSequence) -> np.ndarray:
        y = luma(seq.frames)
        t, h, wd = y.shape
        hb, wb = h // w, wd // w
        y = y[:, : hb * w, : wb * w]
        return y.reshape(t, hb, w, wb, w).transpose(0, 1, 3, 2, 4).reshape(-1, w * w)

    x = blocks(ref)
    y = blocks(dist)
    mx = x.mean(axis=1)
    my = y.mean(axis=1)
    vx = x.var(axis=1)
    vy = y.var(axis=1)
    cov = ((x - mx[:, None]) * (y - my[:, None])).mean(axis=1)
    ssim_map = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
    return float(ssim_map.mean())


def normalize_scores(x, lo: float = 0.0, hi: float = 100.0) -> np.ndarray:
    """Affine min-max map of scores onto [lo, hi]; order-preserving."""
    arr = _as_score_vector(x, "scores")
    if hi <= lo:
        raise ArgumentError(f"need hi > lo, got [{lo}, {hi}]")
    span = float(arr.max() - arr.min())
    if span == 0.0:
        raise DegenerateInputError("constant scores cannot be range-normalized")
    return lo + (arr - arr.min()) * (hi - lo) / span
