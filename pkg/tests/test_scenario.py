import json

import numpy as np
import pytest

from pacinglab import (
    AssumptionError,
    ConfigParseError,
    ConfigurationError,
    SchemaError,
    build_scenario,
    load_preset,
    load_scenario,
    preset_config,
    preset_names,
    save_config,
)
from pacinglab.scenario import dumps_config, parse_config

from conftest import config


def _write(tmp_path, cfg, name="s.json"):
    return save_config(cfg, tmp_path / name)


class TestLoad:
    def test_preset_file_loads(self, tmp_path):
        s = load_scenario(_write(tmp_path, preset_config("thm1"), "thm1.json"))
        assert s.name == "thm1" and all(r.passed for r in s.validation.values())

    def test_probability_out_of_range(self, tmp_path):
        cfg = config(p_T=1.3)
        with pytest.raises(SchemaError) as info:
            load_scenario(_write(tmp_path, cfg))
        assert info.value.path == "p_T"

    def test_probabilities_sum(self):
        with pytest.raises(SchemaError) as info:
            build_scenario(config(p_T=0.7, p_C=0.6))
        assert info.value.path == "p_T"

    def test_increasing_policy_witness(self, tmp_path):
        cfg = config(pacing={"kind": "hyperbolic_damping", "budget": 1.0, "power": -1.0})
        with pytest.raises(AssumptionError) as info:
            load_scenario(_write(tmp_path, cfg))
        w = info.value.witness
        assert info.value.clause == "A1.2"
        assert w["S1"] < w["S2"] and "ehat" in w

    def test_parse_error_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "n_sellers": 3,\n  "horizon": ,\n}\n')
        with pytest.raises(ConfigParseError) as info:
            load_scenario(path)
        assert info.value.line == 3
        assert info.value.record()["line"] == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "absent.json")

    def test_nested_schema_path(self):
        cfg = config()
        cfg["scores"]["e_T"] = {"kind": "constant", "value": -1.0}
        with pytest.raises(SchemaError) as info:
            build_scenario(cfg)
        assert info.value.path == "scores/e_T/value"

    def test_unknown_field(self):
        with pytest.raises(SchemaError):
            build_scenario(config(colour="red"))

    def test_top_level_must_be_object(self):
        with pytest.raises(ConfigParseError):
            parse_config("[1, 2]")

    def test_dt_override(self):
        s = build_scenario(config(horizon=2.0, dt=0.1), dt=0.5)
        assert s.grid.steps == 4


class TestScoreProcesses:
    def test_piecewise(self):
        cfg = config(n=2, horizon=1.0, dt=0.25)
        cfg["scores"]["ehat_C"] = {"kind": "piecewise", "times": [0, 0.5], "values": [[0.1, 0.2], 0.9]}
        s = build_scenario(cfg)
        assert s.ehat_C.tolist() == [[0.1, 0.1, 0.9, 0.9], [0.2, 0.2, 0.9, 0.9]]

    def test_random_is_frozen(self):
        cfg = config(n=4)
        cfg["scores"]["e_C"] = {"kind": "random", "seed": 5, "distribution": "uniform", "low": 0.2, "high": 0.4}
        a, b = build_scenario(cfg), build_scenario(cfg)
        assert np.array_equal(a.e_C, b.e_C)
        assert a.e_C.min() >= 0.2 and a.e_C.max() <= 0.4

    def test_bernoulli_offset(self):
        cfg = config(n=50)
        cfg["scores"]["e_C"] = {"kind": "random", "seed": 1, "distribution": "bernoulli", "prob": 0.1, "scale": 0.3,
                                "offset": 1.0}
        values = np.unique(build_scenario(cfg).e_C)
        np.testing.assert_allclose(values, [1.0, 1.3])

    def test_per_seller_draws(self):
        cfg = config(n=3)
        cfg["scores"]["e_C"] = {"kind": "random", "seed": 2, "per": "seller"}
        e = build_scenario(cfg).e_C
        assert np.all(e == e[:, :1])

    def test_rotating(self):
        cfg = config(n=3, horizon=1.5, dt=0.25)
        cfg["scores"]["ehat_C"] = {"kind": "rotating", "value": 1.0, "boost": 0.5, "period": 0.5}
        lit = build_scenario(cfg).ehat_C == 1.5
        assert lit.argmax(axis=0).tolist() == [0, 0, 1, 1, 2, 2]
        assert lit.sum(axis=0).tolist() == [1] * 6

    def test_rotating_reserve_rejected(self):
        cfg = config()
        cfg["reserve"] = {"kind": "rotating", "period": 1.0}
        with pytest.raises(SchemaError):
            build_scenario(cfg)

    def test_scaled_forward_reference(self):
        cfg = config()
        cfg["scores"]["e_C"] = {"kind": "scaled", "of": "ehat_T", "factor": 2.0}
        with pytest.raises(SchemaError) as info:
            build_scenario(cfg)
        assert info.value.path == "scores/e_C/of"

    def test_per_seller_length(self):
        cfg = config(n=3)
        cfg["scores"]["e_C"] = {"kind": "constant", "values": [1.0, 2.0]}
        with pytest.raises(SchemaError):
            build_scenario(cfg)

    def test_piecewise_must_start_at_zero(self):
        cfg = config()
        cfg["scores"]["e_C"] = {"kind": "piecewise", "times": [0.5], "values": [1.0]}
        with pytest.raises(SchemaError):
            build_scenario(cfg)


class TestPresets:
    @pytest.mark.parametrize("name", preset_names())
    def test_round_trip(self, tmp_path, name):
        cfg = preset_config(name)
        path = _write(tmp_path, cfg, f"{name}.json")
        assert json.loads(path.read_text()) == cfg
        a, b = load_preset(name), load_scenario(path)
        for key in ("e_T", "e_C", "ehat_T", "ehat_C", "reserve", "s0"):
            assert np.array_equal(getattr(a, key), getattr(b, key))
        assert a.pacing_T == b.pacing_T and a.pacing_C == b.pacing_C
        assert dumps_config(b.config) == dumps_config(cfg)

    def test_floats_round_trip_exactly(self, tmp_path):
        cfg = config(reserve=0.1 + 0.2, horizon=1 / 3, dt=1 / 30)
        again = parse_config(dumps_config(cfg))
        assert again["reserve"]["value"] == 0.1 + 0.2 and again["horizon"] == 1 / 3

    def test_config_copy_is_independent(self):
        cfg = preset_config("thm1")
        cfg["n_sellers"] = 99
        assert preset_config("thm1")["n_sellers"] == 5

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            preset_config("nope")

    def test_every_preset_has_a_design(self):
        for name in preset_names():
            assert preset_config(name)["design"] in ("naive", "interleaving")
