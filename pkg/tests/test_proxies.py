import json
import math

import numpy as np
import pytest

from vqdiag.distortions import DistortionKind, DistortionSpec, apply_distortion
from vqdiag.errors import ArgumentError, ConfigurationError
from vqdiag.frames import Domain, FrameSequence
from vqdiag.proxies import (
    BUILTIN_PROXIES,
    ExternalScoreTable,
    ProxyMetricRef,
    compute_proxy,
)

from conftest import random_sequence


def test_identical_inputs_score_maximally(rng):
    seq = random_sequence(rng, t=4)
    assert compute_proxy(seq, seq, BUILTIN_PROXIES[Domain.SPATIAL]) == math.inf
    assert compute_proxy(seq, seq, BUILTIN_PROXIES[Domain.COLOR]) == 0.0
    assert compute_proxy(seq, seq, BUILTIN_PROXIES[Domain.TEMPORAL]) == 0.0


def test_temporal_proxy_blind_to_static_brightness_shift(rng):
    ref = random_sequence(rng, t=6, lo=20, hi=200)
    dist = ref.with_frames(ref.frames + 30)  # same shift on every frame
    score = compute_proxy(ref, dist, BUILTIN_PROXIES[Domain.TEMPORAL])
    assert score == 0.0
    # while the spatial proxy is anything but blind to it
    assert compute_proxy(ref, dist, BUILTIN_PROXIES[Domain.SPATIAL]) < 40.0


def test_color_proxy_decreases_with_banding(sources12):
    src = sources12[0]
    proxy = BUILTIN_PROXIES[Domain.COLOR]
    scores = [
        compute_proxy(src, apply_distortion(src, DistortionSpec(DistortionKind.BANDING, s)), proxy)
        for s in (1, 2, 3, 4, 5)
    ]
    assert all(a > b for a, b in zip(scores, scores[1:]))


def test_geometry_mismatch_rejected(rng):
    a = random_sequence(rng, h=32, w=32)
    b = random_sequence(rng, h=32, w=48)
    with pytest.raises(ArgumentError):
        compute_proxy(a, b, BUILTIN_PROXIES[Domain.SPATIAL])


def test_domain_mismatch_is_a_configuration_error(rng):
    seq = random_sequence(rng)
    with pytest.raises(ConfigurationError):
        compute_proxy(seq, seq, BUILTIN_PROXIES[Domain.SPATIAL], expected_domain=Domain.COLOR)
    with pytest.raises(ConfigurationError):
        compute_proxy(seq, seq, ProxyMetricRef("no_such_proxy", Domain.SPATIAL))


def test_external_score_table(tmp_path):
    path = tmp_path / "scores.json"
    path.write_text(json.dumps({"spatial-000000-a": 31.5, "spatial-000000-b": 28.0}))
    table = ExternalScoreTable.load(path)
    assert table["spatial-000000-a"] == 31.5
    assert "spatial-000001-a" not in table
    with pytest.raises(KeyError):
        table["spatial-000001-a"]
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2, 3]")
    with pytest.raises(ConfigurationError):
        ExternalScoreTable.load(bad)
