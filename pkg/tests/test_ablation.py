import pytest

from vqdiag.ablation import VARIANTS, derive_variant
from vqdiag.config import RunConfig, config_diff
from vqdiag.errors import ConfigurationError
from vqdiag.model import QualityModel, count_parameters


def test_full_and_v7_are_identity():
    base = RunConfig()
    assert config_diff(base, derive_variant(base, "full")) == {}
    diff = config_diff(base, derive_variant(base, "V7_all_domains"))
    assert set(diff) == {"variant"}  # data and model identical to full


def test_v1_only_touches_expert_fields():
    base = RunConfig()
    v1 = derive_variant(base, "V1_single_expert")
    diff = config_diff(base, v1)
    assert set(diff) == {
        "variant",
        "model.num_experts",
        "model.adapter_bottleneck",
        "model.expert_domains",
    }
    assert v1.model.num_experts == 1
    assert v1.model.expert_domains == ("shared",)


def test_v1_parameter_count_within_five_percent():
    base = RunConfig()
    v1 = derive_variant(base, "V1_single_expert")
    full_count = count_parameters(QualityModel(base.model))["total"]
    v1_count = count_parameters(QualityModel(v1.model))["total"]
    assert abs(full_count - v1_count) / full_count < 0.05


def test_v2_swaps_aggregator_only():
    base = RunConfig()
    v2 = derive_variant(base, "V2_cnn_aggregator")
    assert set(config_diff(base, v2)) == {"variant", "model.aggregator"}
    assert v2.model.aggregator == "temporal_conv"
    model = QualityModel(v2.model)
    assert type(model.aggregator).__name__ == "TemporalConvAggregator"


def test_v3_disables_diagnostics_only():
    base = RunConfig()
    v3 = derive_variant(base, "V3_no_udh")
    diff = config_diff(base, v3)
    assert set(diff) == {"variant", "train.lambda_a", "train.train_diagnostics"}
    assert v3.train.lambda_a == 0.0
    assert v3.train.train_diagnostics is False


def test_corpus_reduction_variants():
    base = RunConfig()
    v4 = derive_variant(base, "V4_spatial_hd_only")
    assert v4.domains == ("spatial",)
    assert v4.synth.source_filter == "hd"
    assert v4.model.expert_domains == ("spatial",)
    v5 = derive_variant(base, "V5_full_spatial_only")
    assert v5.domains == ("spatial",)
    assert v5.synth.source_filter == ""
    v6 = derive_variant(base, "V6_spatial_color")
    assert v6.domains == ("spatial", "color")
    assert v6.model.expert_domains == ("spatial", "color")


def test_nr_variants_switch_mode():
    base = RunConfig()
    for tag, fields in (
        ("NR_V1", {"model.num_experts", "model.adapter_bottleneck", "model.expert_domains"}),
        ("NR_V2", {"model.aggregator"}),
        ("NR_V3", {"train.lambda_a", "train.train_diagnostics"}),
    ):
        cfg = derive_variant(base, tag)
        assert cfg.model.mode == "NR"
        diff = set(config_diff(base, cfg))
        assert diff == fields | {"variant", "model.mode"}, tag


def test_unknown_variant_rejected():
    with pytest.raises(ConfigurationError):
        derive_variant(RunConfig(), "V9_mystery")
    assert "full" in VARIANTS and len(VARIANTS) == 11


def test_base_config_not_mutated():
    base = RunConfig()
    derive_variant(base, "V4_spatial_hd_only")
    assert base.domains == ("spatial", "color", "temporal")
    assert base.synth.source_filter == ""
