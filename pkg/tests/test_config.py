from __future__ import annotations

import pytest

from agrichain.config import ExperimentConfig
from agrichain.errors import ConfigError


def test_defaults():
    cfg = ExperimentConfig()
    assert (cfg.n_farms, cfg.sensors_per_gateway, cfg.tw, cfg.rounds) == (40, 100, 50, 15)
    assert (cfg.alpha, cfg.cr0) == (0.05, 500.0)
    assert cfg.sensor_params().k_D == pytest.approx(10.0)
    assert cfg.replace(kinetics="table3").sensor_params().k_D == pytest.approx(0.1)
    assert cfg.replace(k_D=2.0).sensor_params().k_D == pytest.approx(2.0)


def test_json_round_trip(tmp_path):
    cfg = ExperimentConfig(seed=9, intra_sigma=2.5, compliance="p_not_e", svg=True)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert ExperimentConfig.load(path) == cfg


@pytest.mark.parametrize("name,value", [
    ("seed", -1), ("n_farms", 0), ("sensors_per_gateway", 0), ("kinetics", "fast"), ("k_a", 0.0),
    ("k_d", -1.0), ("k_D", -1.0), ("r_max", 0.0), ("epsilon_r", 0.0), ("intra_sigma", -1.0),
    ("drift", -1.0), ("tw", 0), ("rounds", 0), ("alpha", -0.1), ("cr0", -1.0), ("difficulty", 40),
    ("fn_count", 0), ("compliance", "vote"), ("p_not_e_threshold", 0.0), ("likelihood", "x"),
    ("granularity", "x"), ("sbu_epsilon", 0.0), ("trace_threshold", 0.0), ("seeds", 0),
])
def test_every_field_is_range_checked(name, value):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig(**{name: value})
    assert info.value.field == name


def test_inter_range_ordering():
    with pytest.raises(ConfigError):
        ExperimentConfig(inter_low=30.0, inter_high=20.0)


def test_from_dict_rejects_unknown_and_mistyped():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"n_farm": 3})
    assert info.value.field == "n_farm"
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n_farms": "many"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1]")


def test_env_overrides():
    cfg = ExperimentConfig().with_env({"AGRICHAIN_N_FARMS": "12", "AGRICHAIN_SVG": "yes",
                                       "AGRICHAIN_ALPHA": "0.1", "OTHER": "1"})
    assert (cfg.n_farms, cfg.svg, cfg.alpha) == (12, True, 0.1)
    with pytest.raises(ConfigError):
        ExperimentConfig().with_env({"AGRICHAIN_ROUNDS": "ten"})
