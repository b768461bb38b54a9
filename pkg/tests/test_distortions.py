import numpy as np
import pytest

from vqdiag.distortions import (
    ARTIFACT_BIT,
    ARTIFACT_KINDS,
    DOMAIN_KINDS,
    KIND_DOMAIN,
    DistortionKind,
    DistortionSpec,
    apply_chain,
    apply_distortion,
)
from vqdiag.errors import ArgumentError
from vqdiag.frames import Domain
from vqdiag.metrics import psnr
from vqdiag.proxies import BUILTIN_PROXIES, compute_proxy

from conftest import random_sequence


def test_every_kind_has_exactly_one_domain():
    assert set(KIND_DOMAIN) == set(DistortionKind)
    for domain, kinds in DOMAIN_KINDS.items():
        for kind in kinds:
            assert KIND_DOMAIN[kind] is domain
    assert sum(len(k) for k in DOMAIN_KINDS.values()) == len(DistortionKind)


def test_artifact_taxonomy_is_ten_kinds():
    assert len(ARTIFACT_KINDS) == 10
    assert len(set(ARTIFACT_KINDS)) == 10
    for i, kind in enumerate(ARTIFACT_KINDS):
        assert ARTIFACT_BIT[kind] == i


def test_severity_validation():
    with pytest.raises(ArgumentError):
        DistortionSpec(DistortionKind.BANDING, 0)
    with pytest.raises(ArgumentError):
        DistortionSpec(DistortionKind.BANDING, 6)


def test_spec_round_trips_through_dict():
    spec = DistortionSpec(DistortionKind.GRAIN_NOISE, 3, seed=99, params={"sigma": 5.0})
    again = DistortionSpec.from_dict(spec.to_dict())
    assert again == spec


@pytest.mark.parametrize("kind", list(DistortionKind))
def test_determinism_and_geometry(kind, rng):
    src = random_sequence(rng, t=8, h=32, w=32, lo=20, hi=235)
    spec = DistortionSpec(kind, 3, seed=12345)
    out1 = apply_distortion(src, spec)
    out2 = apply_distortion(src, spec)
    assert np.array_equal(out1.frames, out2.frames)
    assert out1.geometry() == src.geometry()
    assert out1.bit_depth == src.bit_depth
    assert not np.array_equal(out1.frames, src.frames)


@pytest.mark.parametrize("kind", list(DistortionKind))
def test_ten_bit_support(kind, rng):
    src = random_sequence(rng, t=8, h=32, w=32, bit_depth=10, lo=64, hi=960)
    out = apply_distortion(src, DistortionSpec(kind, 2, seed=7))
    assert out.bit_depth == 10
    assert int(out.frames.max()) <= 1023


def test_blockiness_unit_step_is_identity(rng):
    src = random_sequence(rng, t=2, h=32, w=32)
    spec = DistortionSpec(DistortionKind.BLOCKINESS, 1, seed=0, params={"step": 1})
    out = apply_distortion(src, spec)
    assert np.array_equal(out.frames, src.frames)


def test_grain_ladder_strictly_decreasing_psnr(rng):
    src = random_sequence(rng, t=4, h=64, w=64, lo=30, hi=225)
    values = [
        psnr(src, apply_distortion(src, DistortionSpec(DistortionKind.GRAIN_NOISE, s, seed=3)))
        for s in (1, 2, 3, 4, 5)
    ]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_temporal_kinds_need_four_frames(rng):
    src = random_sequence(rng, t=3, h=32, w=32)
    for kind in (
        DistortionKind.FRAME_DROP_JUDDER,
        DistortionKind.GHOST_BLEND,
        DistortionKind.TEMPORAL_JITTER,
        DistortionKind.BLACK_FRAME,
    ):
        with pytest.raises(ArgumentError):
            apply_distortion(src, DistortionSpec(kind, 2, seed=0))


def test_black_frames_are_isolated_and_nested(rng):
    src = random_sequence(rng, t=12, h=32, w=32, lo=50, hi=200)
    blacked = {}
    for sev in (1, 2, 3, 4, 5):
        out = apply_distortion(src, DistortionSpec(DistortionKind.BLACK_FRAME, sev, seed=4))
        frames_black = {
            t for t in range(12) if np.array_equal(out.frames[t], np.zeros_like(out.frames[t]))
        }
        blacked[sev] = frames_black
        assert len(frames_black) == sev
        assert all(t % 2 == 1 and 0 < t < 11 for t in frames_black)
    for sev in (1, 2, 3, 4):
        assert blacked[sev] < blacked[sev + 1]


def test_judder_holds_previous_frame(rng):
    src = random_sequence(rng, t=12, h=32, w=32)
    out = apply_distortion(src, DistortionSpec(DistortionKind.FRAME_DROP_JUDDER, 5, seed=9))
    dropped = [t for t in range(12) if np.array_equal(out.frames[t], src.frames[t - 1])]
    assert len(dropped) == 5
    assert all(t % 2 == 0 and t >= 2 for t in dropped)


def test_chain_applies_black_frame_last(rng):
    src = random_sequence(rng, t=12, h=32, w=32, lo=60, hi=220)
    specs = [
        DistortionSpec(DistortionKind.BLACK_FRAME, 2, seed=1),
        DistortionSpec(DistortionKind.GRAIN_NOISE, 4, seed=2),
    ]
    out = apply_chain(src, specs)
    black_rows = [
        t for t in range(12) if np.array_equal(out.frames[t], np.zeros_like(out.frames[t]))
    ]
    # noise applied after black frames would have destroyed them
    assert len(black_rows) == 2


def test_ladder_monotone_small_sweep(sources12):
    # three fixed sources per kind here; the acceptance suite runs all ten
    for kind, domain in KIND_DOMAIN.items():
        proxy = BUILTIN_PROXIES[domain]
        for src in sources12[:3]:
            scores = [
                compute_proxy(src, apply_distortion(src, DistortionSpec(kind, s, seed=21)), proxy)
                for s in (1, 2, 3, 4, 5)
            ]
            assert all(a > b for a, b in zip(scores, scores[1:])), (kind, scores)
