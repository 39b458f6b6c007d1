import json

import pytest

from lsaprecode.config import ScenarioConfig
from lsaprecode.errors import ConfigError


def test_defaults_follow_lte_numerology():
    c = ScenarioConfig()
    assert (c.M, c.P, c.K, c.active_subcarriers, c.N, c.L) == (100, 10, 512, 300, 14, 38)
    assert c.sample_rate == 7.68e6 and c.half_window == 38 and c.independent


@pytest.mark.parametrize("field,value,fragment", [
    ("P", 200, "P:"), ("K", 500, "K:"), ("trials", 0, "trials:"), ("approach", "mmse", "approach:"),
    ("mu", -1.0, "mu:"), ("init_mode", "warm", "init_mode:"), ("gains", (1.0,), "gains:"),
    ("active_subcarriers", 301, "active_subcarriers:"), ("sigma_h2", -0.1, "sigma_h2:"),
])
def test_validation_names_the_field(field, value, fragment):
    with pytest.raises(ConfigError, match=fragment):
        ScenarioConfig(**{field: value})


def test_round_trip_through_json(tmp_path):
    c = ScenarioConfig(M=32, P=4, D=3.0, gains=(1.0, 2.0, 1.0, 1.0), esn0_db=(1.0, 5.0), approach="zf(6)")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(c.to_dict()))
    assert ScenarioConfig.from_json(path) == c
    assert c.approach_name == "zf" and c.approach_arg == 6


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        ScenarioConfig.from_dict({"M": 4, "antennas": 3})


def test_scalar_esn0_accepted():
    assert ScenarioConfig.from_dict({"esn0_db": 7}).esn0_db == (7.0,)


def test_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_json(p)
