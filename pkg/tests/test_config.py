import json

import pytest

from shelfvib.config import ConfigError, RunConfig, config_from_dict, dump_config, load_config


def test_defaults_audit():
    cfg = load_config("default")
    assert cfg.dataset.sampling_rate_hz == 51200.0
    assert (cfg.pipeline.window_s, cfg.pipeline.pre_trigger_s) == (1.0, 0.1)
    assert (cfg.pipeline.band_lo_hz, cfg.pipeline.band_hi_hz) == (50, 240)
    assert cfg.impulse.period_s == 2.0 and cfg.impulse.central_frequency == 10.0
    assert cfg.dataset.weights_g == [50.0 * k for k in range(1, 11)]
    assert cfg.dataset.samples_per_class == 28
    locs = cfg.locations()
    assert len(locs) == 4
    gaps = [b[0] - a[0] for a, b in zip(locs, locs[1:])]
    assert gaps == pytest.approx([0.1524] * 3, abs=1e-9)
    assert (cfg.plate.length_a, cfg.plate.width_b) == (0.9144, 0.4672)
    assert cfg.plate.gravity_g == 9.80665
    assert cfg.estimator.train_classes_g == [50.0, 300.0, 500.0]
    assert cfg.estimator.train_fraction == 0.1
    assert cfg.studies.class_sets_g == [[50, 500], [50, 300, 500], [50, 200, 350, 500]]
    assert cfg.studies.dense.train_classes_g == [2997.0, 3180.0, 3302.0]
    assert cfg.studies.dense.item_g == 61.0


def test_protocol_size():
    cfg = RunConfig()
    assert len(cfg.locations()) * len(cfg.dataset.weights_g) * cfg.dataset.samples_per_class == 1120


def test_partial_override_and_round_trip(tmp_path):
    cfg = config_from_dict({"seed": 3, "estimator": {"ridge_lambda": 0.5}})
    assert cfg.seed == 3 and cfg.estimator.ridge_lambda == 0.5
    assert cfg.estimator.variance_target == 0.95
    p = tmp_path / "c.json"
    p.write_text(dump_config(cfg))
    assert load_config(str(p)).to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "data",
    [
        {"seeed": 1},
        {"plate": {"D": 1}},
        {"studies": {"dense": {"boxes": 3}}},
        {"pipeline": {"band_hi_hz": 300}},
        {"estimator": {"sensors": [4]}},
        {"geometry": {"locations": [[2.0, 0.1]]}},
        {"estimator": {"train_classes_g": [75]}},
        {"plate": 5},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_load_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_builders_match_sections():
    cfg = RunConfig()
    setup = cfg.setup()
    assert setup.plate.flexural_rigidity_D == cfg.plate.flexural_rigidity_D
    assert setup.train.period_s == 2.0 and setup.sampling_rate_hz == 51200.0
    assert len(setup.sensors) == 3
    assert json.loads(dump_config(cfg))["seed"] == 0
