"""The four training losses.

All functions accept scalars or batched tensors and reduce to a scalar mean;
computation stays in the input dtype, so float64 inputs give float64-exact
values for oracle comparisons. Probabilities entering a log are clamped
symmetrically to [eps, 1 - eps].
"""

from __future__ import annotations

import torch

from .errors import ArgumentError

BCE_EPSILON = 1e-7


def _tensor(x) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.float64)


def rank_loss(q_a, q_b, rank_label, eps: float = BCE_EPSILON) -> torch.Tensor:
    """Binary cross-entropy on p = sigmoid(q_a - q_b) against the pair label."""
    q_a, q_b, v = _tensor(q_a), _tensor(q_b), _tensor(rank_label)
    p = torch.sigmoid(q_a - q_b).clamp(eps, 1.0 - eps)
    return (-v * torch.log(p) - (1.0 - v) * torch.log(1.0 - p)).mean()


def artifact_loss(pred, target, eps: float = BCE_EPSILON) -> torch.Tensor:
    """Mean binary cross-entropy between predicted artifact probabilities and
    the weak label bits."""
    pred, target = _tensor(pred), _tensor(target)
    if pred.shape != target.shape:
        raise ArgumentError(f"artifact dims differ: {tuple(pred.shape)} vs {tuple(target.shape)}")
    p = pred.clamp(eps, 1.0 - eps)
    return (-target * torch.log(p) - (1.0 - target) * torch.log(1.0 - p)).mean()


def global_loss(q_x, q_y, s_x, s_y) -> torch.Tensor:
    """Distance between the predicted and subjective score differences.

    Subjective scores are expected on the normalized [0, 100] scale.
    """
    q_x, q_y, s_x, s_y = _tensor(q_x), _tensor(q_y), _tensor(s_x), _tensor(s_y)
    return torch.abs((q_x - q_y) - (s_x - s_y)).mean()


def total_loss(l_global, l_artifact, lambda_g: float, lambda_a: float) -> torch.Tensor:
    """Weighted sum of the global quality and artifact losses."""
    return lambda_g * _tensor(l_global) + lambda_a * _tensor(l_artifact)
