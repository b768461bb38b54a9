import math

import numpy as np
import pytest
import torch

from vqdiag.errors import ArgumentError
from vqdiag.losses import BCE_EPSILON, artifact_loss, global_loss, rank_loss, total_loss


def scalar(fn, *args, **kwargs) -> float:
    return float(fn(*args, **kwargs).item())


# ---------------------------------------------------------------------------
# rank loss


def test_rank_loss_tie_is_ln2():
    assert scalar(rank_loss, 1.7, 1.7, 1) == pytest.approx(math.log(2.0), abs=1e-12)
    assert scalar(rank_loss, 0.0, 0.0, 0) == pytest.approx(math.log(2.0), abs=1e-12)


def test_rank_loss_margin_two():
    # -log(sigmoid(2)) = log(1 + e^-2)
    expected = math.log(1.0 + math.exp(-2.0))
    assert scalar(rank_loss, 3.0, 1.0, 1) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.126928, abs=1e-6)


def test_rank_loss_sigmoid_symmetry():
    for d in (-3.0, -0.5, 0.0, 0.25, 4.0):
        assert scalar(rank_loss, d, 0.0, 1) == pytest.approx(
            scalar(rank_loss, -d, 0.0, 0), abs=1e-12
        )


def test_rank_loss_monotone_in_margin():
    ds = np.linspace(-4, 4, 17)
    good = [scalar(rank_loss, d, 0.0, 1) for d in ds]
    bad = [scalar(rank_loss, d, 0.0, 0) for d in ds]
    assert all(a > b for a, b in zip(good, good[1:]))  # decreasing for label 1
    assert all(a < b for a, b in zip(bad, bad[1:]))  # increasing for label 0
    assert min(good + bad) >= 0.0


def test_rank_loss_clamped_at_extremes():
    value = scalar(rank_loss, 100.0, -100.0, 0)
    assert math.isfinite(value)
    assert value == pytest.approx(-math.log(BCE_EPSILON), rel=1e-6)


def test_rank_loss_batched_mean():
    q_a = torch.tensor([1.0, 0.0], dtype=torch.float64)
    q_b = torch.tensor([1.0, 0.0], dtype=torch.float64)
    v = torch.tensor([1.0, 0.0], dtype=torch.float64)
    assert scalar(rank_loss, q_a, q_b, v) == pytest.approx(math.log(2.0), abs=1e-12)


# ---------------------------------------------------------------------------
# artifact loss


def test_artifact_loss_maximal_uncertainty():
    a = torch.full((10,), 0.5, dtype=torch.float64)
    v = torch.tensor([1, 0, 1, 0, 1, 0, 1, 0, 1, 0], dtype=torch.float64)
    assert scalar(artifact_loss, a, v) == pytest.approx(math.log(2.0), abs=1e-12)


def test_artifact_loss_perfect_prediction_is_epsilon_small():
    v = torch.tensor([1.0, 0.0, 1.0], dtype=torch.float64)
    loss = scalar(artifact_loss, v, v)
    assert 0.0 < loss <= -math.log(1.0 - BCE_EPSILON) + 1e-15
    assert loss == pytest.approx(BCE_EPSILON, rel=1e-3)


def test_artifact_loss_known_value():
    a = torch.tensor([0.9, 0.2], dtype=torch.float64)
    v = torch.tensor([1.0, 0.0], dtype=torch.float64)
    expected = (-math.log(0.9) - math.log(0.8)) / 2.0
    assert expected == pytest.approx(0.164252, abs=1e-6)
    assert scalar(artifact_loss, a, v) == pytest.approx(expected, abs=1e-12)


def test_artifact_loss_dimension_mismatch():
    with pytest.raises(ArgumentError):
        artifact_loss(torch.zeros(3), torch.zeros(4))


# ---------------------------------------------------------------------------
# global loss


def test_global_loss_zero_when_differences_match():
    assert scalar(global_loss, 12.0, 7.0, 90.0, 85.0) == 0.0


def test_global_loss_known_value():
    assert scalar(global_loss, 60.0, 20.0, 80.0, 30.0) == pytest.approx(10.0, abs=1e-12)


def test_global_loss_swap_symmetry():
    a = scalar(global_loss, 60.0, 20.0, 80.0, 30.0)
    b = scalar(global_loss, 20.0, 60.0, 30.0, 80.0)
    assert a == pytest.approx(b, abs=1e-12)


# ---------------------------------------------------------------------------
# total loss


def test_total_loss_degenerate_weights():
    lg, la = 3.25, 0.75
    assert scalar(total_loss, lg, la, 1.0, 0.0) == lg
    assert scalar(total_loss, lg, la, 0.0, 0.5) == pytest.approx(0.5 * la, abs=1e-15)


def test_total_loss_known_value():
    value = scalar(total_loss, 10.0, math.log(2.0), 1.0, 0.5)
    assert value == pytest.approx(10.346574, abs=1e-6)


def test_total_loss_linear_in_components(rng):
    for _ in range(50):
        lg, la = rng.uniform(0, 5, size=2)
        wg, wa = rng.uniform(0, 2, size=2)
        assert scalar(total_loss, lg, la, wg, wa) == pytest.approx(
            wg * lg + wa * la, rel=1e-12
        )


# ---------------------------------------------------------------------------
# autograd sanity on the loss surfaces


def test_rank_loss_gradient_matches_finite_difference():
    for d0, v in ((0.3, 1.0), (-1.2, 0.0), (2.0, 1.0)):
        q = torch.tensor(d0, dtype=torch.float64, requires_grad=True)
        loss = rank_loss(q, torch.tensor(0.0, dtype=torch.float64), v)
        loss.backward()
        h = 1e-6
        up = float(rank_loss(torch.tensor(d0 + h, dtype=torch.float64), 0.0, v))
        dn = float(rank_loss(torch.tensor(d0 - h, dtype=torch.float64), 0.0, v))
        fd = (up - dn) / (2 * h)
        assert float(q.grad) == pytest.approx(fd, rel=1e-6, abs=1e-9)
