import pytest
import yaml

from resfault import experiment, nn
from resfault.config import (
    RunConfig,
    config_from_dict,
    dump_config,
    load_config,
)
from resfault.errors import ConfigInvalid, UnknownKey


class TestDefaults:
    def test_empty_file_gives_full_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        cfg = load_config(path)
        assert cfg == RunConfig()
        assert cfg.preprocess.downsample_factor == 10
        assert cfg.preprocess.cruise_threshold == 0.85
        assert cfg.detection.n_wait == 3
        assert cfg.split.healthy_cycles == 16
        assert cfg.split.validation_fraction == 0.15
        assert cfg.training.epochs == 70
        assert cfg.training.batch_size == 64
        assert cfg.training.learning_rate == 0.001
        assert cfg.training.beta1 == 0.9
        assert cfg.training.beta2 == 0.999
        assert cfg.training.patience == 10
        assert cfg.training.realisations == 5

    def test_no_path_gives_defaults(self):
        assert load_config(None) == RunConfig()


class TestValidation:
    def test_n_wait_zero_rejected(self):
        with pytest.raises(ConfigInvalid):
            config_from_dict({"detection": {"n_wait": 0}})

    def test_unknown_top_level_key(self):
        with pytest.raises(UnknownKey):
            config_from_dict({"trainnig": {"epochs": 3}})

    def test_unknown_section_key(self):
        with pytest.raises(UnknownKey):
            config_from_dict({"training": {"epoch": 3}})

    def test_type_error_per_field(self):
        with pytest.raises(ConfigInvalid):
            config_from_dict({"training": {"epochs": "many"}})
        with pytest.raises(ConfigInvalid):
            config_from_dict({"training": {"epochs": 1.5}})
        with pytest.raises(ConfigInvalid):
            config_from_dict({"preprocess": {"cruise_threshold": "high"}})
        with pytest.raises(ConfigInvalid):
            config_from_dict({"detection": {"stats_source": 4}})

    def test_bool_is_not_an_integer(self):
        with pytest.raises(ConfigInvalid):
            config_from_dict({"training": {"epochs": True}})

    def test_bad_stats_source_value(self):
        with pytest.raises(ConfigInvalid):
            config_from_dict({"detection": {"stats_source": "test"}})

    def test_bad_preprocess_order(self):
        with pytest.raises(ConfigInvalid):
            config_from_dict({"preprocess": {"order": "sideways"}})

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("a: [1, 2\n")
        with pytest.raises(ConfigInvalid):
            load_config(path)


class TestOverrides:
    def test_learning_rate_override_reaches_training(self, rng):
        x = rng.uniform(-1, 1, size=(96, 1))
        data = (x, 2.0 * x)
        nets = {}
        for lr in (0.001, 0.01):
            cfg = config_from_dict(
                {"training": {"learning_rate": lr, "epochs": 2, "batch_size": 32,
                              "patience": 2, "realisations": 1}}
            )
            assert cfg.training.learning_rate == lr
            train_cfg_lr = cfg.training.learning_rate
            net = nn.init_weights((1, 1), seed=0, activations=(nn.LINEAR,))
            result = nn.train(
                net, data, data,
                nn.TrainConfig(epochs=2, batch_size=32, patience=2, seed=0, lr=train_cfg_lr),
            )
            nets[lr] = result.net.weights[0][0, 0]
        # a 10x learning rate must move the weight further in 2 epochs
        assert nets[0.001] != nets[0.01]

    def test_seed_and_synth_overrides(self):
        cfg = config_from_dict(
            {"seed": 9, "synth": {"n_units": 2, "severity_scale": 0.0, "unit_prefix": "h-"}}
        )
        assert cfg.seed == 9
        scfg = experiment.synth_config_from_run(cfg)
        assert scfg.n_units == 2
        assert scfg.severity_scale == 0.0
        assert scfg.unit_prefix == "h-"

    def test_timeline_checkpoints_list(self):
        cfg = config_from_dict({"segmentation": {"timeline_checkpoints": [5, 15]}})
        assert cfg.segmentation.timeline_checkpoints == (5, 15)

    def test_dump_round_trips(self):
        cfg = config_from_dict({"training": {"epochs": 3}, "seed": 4})
        again = config_from_dict(yaml.safe_load(dump_config(cfg)))
        assert again == cfg
