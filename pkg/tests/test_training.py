import json
import math

import numpy as np
import pytest
import torch

from vqdiag.checkpoint import group_hashes
from vqdiag.config import RunConfig, SynthConfig
from vqdiag.distortions import ARTIFACT_KINDS
from vqdiag.errors import ConfigurationError, ContractViolationError
from vqdiag.frames import Domain
from vqdiag.model import QualityModel
from vqdiag.runner import (
    open_stage1_data,
    open_stage2_data,
    open_stage3_data,
    synthesize_corpora,
)
from vqdiag.training import (
    MetricsLog,
    TrainConfig,
    lr_schedule,
    pair_ranking_accuracy,
    run_stage1,
    run_stage2,
    run_stage3,
    stage_plan,
)

from conftest import tiny_model_config

torch.set_num_threads(1)


TINY_SYNTH = SynthConfig(
    source_height=64,
    source_width=64,
    sources_per_domain=3,
    val_sources_per_domain=2,
    patch_height=32,
    patch_width=32,
    clip_len=4,
    pairs_per_domain=16,
    val_pairs_per_domain=8,
    artifact_patches=24,
    val_artifact_patches=12,
    mos_videos=12,
    val_mos_videos=6,
    mos_frames=24,
    mos_height=32,
    mos_width=32,
)


def tiny_run_config(**train_overrides) -> RunConfig:
    train = dict(epochs=2, batch_size=4, seed=5)
    train.update(train_overrides)
    return RunConfig(
        seed=5,
        model=tiny_model_config(),
        train=TrainConfig(**train),
        synth=TINY_SYNTH,
    )


@pytest.fixture(scope="module")
def tiny_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinyrun")
    synthesize_corpora(tiny_run_config(), root)
    return root


# ---------------------------------------------------------------------------
# schedules and plans


def test_lr_schedule_values():
    cfg = TrainConfig()
    assert lr_schedule(0, cfg) == pytest.approx(1e-4)
    assert lr_schedule(19, cfg) == pytest.approx(1e-4)
    assert lr_schedule(20, cfg) == pytest.approx(1e-5)
    assert lr_schedule(59, cfg) == pytest.approx(1e-6)
    alt = TrainConfig(decay_interpretation="adam_weight_decay")
    assert lr_schedule(59, alt) == pytest.approx(1e-4)  # constant under the other reading


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(lambda_a=-0.1)
    with pytest.raises(ConfigurationError):
        TrainConfig(bce_epsilon=1e-2)
    with pytest.raises(ConfigurationError):
        TrainConfig(decay_interpretation="mystery")
    with pytest.raises(ConfigurationError):
        TrainConfig(interleave="sometimes")


def test_stage_plans_match_freeze_contracts():
    model = QualityModel(tiny_model_config())
    experts = {"expert_spatial", "expert_color", "expert_temporal"}
    p1 = stage_plan(1, model)
    assert set(p1.trainable) == {"extractor", "aggregator", "head_q"} | experts
    assert set(p1.frozen) == {"head_a"}
    p2 = stage_plan(2, model)
    assert set(p2.trainable) == {"head_a"}
    assert set(p2.frozen) == {"extractor", "aggregator", "head_q"} | experts
    p3 = stage_plan(3, model)
    assert set(p3.trainable) == {"aggregator", "head_q", "head_a"}
    assert set(p3.frozen) == {"extractor"} | experts
    p3nd = stage_plan(3, model, train_diagnostics=False)
    assert set(p3nd.trainable) == {"aggregator", "head_q"}


# ---------------------------------------------------------------------------
# stage 1


def test_stage1_routing_isolation_single_domain_step(tiny_root):
    cfg = tiny_run_config(epochs=1)
    data = open_stage1_data(cfg, tiny_root)
    model = QualityModel(cfg.model)
    before = group_hashes(model)
    run_stage1(
        {Domain.SPATIAL: data[Domain.SPATIAL]},
        cfg.train,
        model,
        domains=(Domain.SPATIAL,),
    )
    after = group_hashes(model)
    assert after["expert_color"] == before["expert_color"]
    assert after["expert_temporal"] == before["expert_temporal"]
    assert after["expert_spatial"] != before["expert_spatial"]
    assert after["head_a"] == before["head_a"]  # untouched by stage 1
    assert after["extractor"] != before["extractor"]


def test_stage1_gradients_do_not_reach_other_experts(tiny_root):
    cfg = tiny_run_config(epochs=1)
    data = open_stage1_data(cfg, tiny_root)
    model = QualityModel(cfg.model)
    from vqdiag.losses import rank_loss
    from vqdiag.training import _pair_batch

    model.train()
    x, labels = _pair_batch(data[Domain.TEMPORAL]["train"], range(4), "FR")
    q, _ = model(x, Domain.TEMPORAL)
    loss = rank_loss(q[:4], q[4:], labels)
    loss.backward()
    for group in ("expert_spatial", "expert_color"):
        for _, p in model.group_parameters(group):
            assert p.grad is None or float(p.grad.abs().max()) == 0.0
    grads = [p.grad for _, p in model.group_parameters("expert_temporal")]
    assert any(g is not None and float(g.abs().max()) > 0 for g in grads)


def test_stage1_missing_domain_corpus(tiny_root):
    cfg = tiny_run_config()
    data = open_stage1_data(cfg, tiny_root)
    del data[Domain.COLOR]
    with pytest.raises(ConfigurationError):
        run_stage1(
            data,
            cfg.train,
            QualityModel(cfg.model),
            domains=(Domain.SPATIAL, Domain.COLOR, Domain.TEMPORAL),
        )


def test_stage1_deterministic_reruns(tiny_root):
    cfg = tiny_run_config()
    data = open_stage1_data(cfg, tiny_root)
    records = []
    for _ in range(2):
        torch.manual_seed(0)
        model = QualityModel(cfg.model)
        records.append(run_stage1(data, cfg.train, model))
    assert json.dumps(records[0], sort_keys=True) == json.dumps(records[1], sort_keys=True)


def test_stage1_proportional_interleave_runs(tiny_root):
    cfg = tiny_run_config(epochs=1, interleave="proportional")
    data = open_stage1_data(cfg, tiny_root)
    model = QualityModel(cfg.model)
    recs = run_stage1(data, cfg.train, model)
    assert len(recs) == 1
    assert model.stage_history == ["stage1"]


def test_pair_ranking_accuracy_bounds(tiny_root):
    cfg = tiny_run_config()
    data = open_stage1_data(cfg, tiny_root)
    acc = pair_ranking_accuracy(QualityModel(cfg.model), data[Domain.SPATIAL]["val"])
    assert 0.0 <= acc <= 1.0


# ---------------------------------------------------------------------------
# stage 2


def trained_stage1_model(root, cfg) -> QualityModel:
    model = QualityModel(cfg.model)
    run_stage1(open_stage1_data(cfg, root), cfg.train, model)
    return model


def test_stage2_requires_stage1(tiny_root):
    cfg = tiny_run_config()
    with pytest.raises(ContractViolationError):
        run_stage2(open_stage2_data(tiny_root), cfg.train, QualityModel(cfg.model))


def test_stage2_freezes_backbone_bit_exactly(tiny_root):
    cfg = tiny_run_config(epochs=1)
    model = trained_stage1_model(tiny_root, cfg)
    before = group_hashes(model)
    recs = run_stage2(open_stage2_data(tiny_root), cfg.train, model)
    after = group_hashes(model)
    for group in ("extractor", "expert_spatial", "expert_color", "expert_temporal",
                  "aggregator", "head_q"):
        assert after[group] == before[group], group
    assert after["head_a"] != before["head_a"]
    assert model.stage_history == ["stage1", "stage2"]
    assert "val_f1" in recs[-1]
    assert set(recs[-1]["val_f1"]) == {k.value for k in ARTIFACT_KINDS}


# ---------------------------------------------------------------------------
# stage 3


def test_stage3_requires_earlier_stages(tiny_root):
    cfg = tiny_run_config()
    model = QualityModel(cfg.model)
    with pytest.raises(ContractViolationError):
        run_stage3(open_stage3_data(tiny_root), cfg.train, model)
    model = trained_stage1_model(tiny_root, cfg)
    with pytest.raises(ContractViolationError):
        run_stage3(open_stage3_data(tiny_root), cfg.train, model)  # stage 2 missing


def test_stage3_freezes_experts_and_extractor(tiny_root):
    cfg = tiny_run_config(epochs=1)
    model = trained_stage1_model(tiny_root, cfg)
    run_stage2(open_stage2_data(tiny_root), cfg.train, model)
    before = group_hashes(model)
    recs = run_stage3(open_stage3_data(tiny_root), cfg.train, model)
    after = group_hashes(model)
    for group in ("extractor", "expert_spatial", "expert_color", "expert_temporal"):
        assert after[group] == before[group], group
    assert after["aggregator"] != before["aggregator"]
    assert model.stage_history == ["stage1", "stage2", "stage3"]
    assert "val_srocc" in recs[-1]


def test_stage3_without_diagnostics_skips_stage2_requirement(tiny_root):
    cfg = tiny_run_config(epochs=1, lambda_a=0.0, train_diagnostics=False)
    model = trained_stage1_model(tiny_root, cfg)
    before = group_hashes(model)
    run_stage3(open_stage3_data(tiny_root), cfg.train, model, require_stage2=False)
    after = group_hashes(model)
    assert after["head_a"] == before["head_a"]  # untouched without diagnostics


def test_metrics_log_is_deterministic_jsonl(tiny_root, tmp_path):
    cfg = tiny_run_config(epochs=1)
    paths = []
    for run in ("a", "b"):
        log = MetricsLog(tmp_path / f"{run}.jsonl")
        torch.manual_seed(0)
        model = QualityModel(cfg.model)
        run_stage1(open_stage1_data(cfg, tiny_root), cfg.train, model, log=log)
        paths.append(tmp_path / f"{run}.jsonl")
    assert paths[0].read_bytes() == paths[1].read_bytes()
    record = json.loads(paths[0].read_text().splitlines()[0])
    assert record["stage"] == 1 and record["epoch"] == 0 and "lr" in record
