import math

import pytest

from impnet.config import load_config, parse_config
from impnet.errors import ConfigError

from conftest import SCENARIOS

BASE = """
schema = 1
[[area]]
name = "ac"
reference = "grid"

[[bus]]
name = "PCC"

[[device]]
name = "grid"
type = "grid"
bus = "PCC"
x = 0.2

[[device]]
name = "load"
type = "shunt"
bus = "PCC"
r = 1.0
"""


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.toml")), ids=lambda p: p.stem)
def test_every_scenario_parses(path):
    cfg = load_config(path)
    assert cfg.name == path.stem
    assert len(cfg.sha256) == 64


def test_minimal_config_builds_a_network():
    cfg = parse_config(BASE)
    assert [d.name for d in cfg.network.devices] == ["grid", "load"]
    assert cfg.analysis.freq_min == 2.0 and cfg.analysis.freq_step == 2.0
    assert math.isclose(cfg.network.omega1, 2 * math.pi * 50)


def test_unknown_key_names_key_and_line():
    text = BASE + "colour = 3\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == "device[1].colour"
    assert err.value.line == text.splitlines().index("colour = 3") + 1


def test_unknown_top_level_table():
    with pytest.raises(ConfigError, match="unknown key 'solver'"):
        parse_config(BASE + "[solver]\nx = 1\n")


def test_missing_required_key():
    with pytest.raises(ConfigError, match="missing required key"):
        parse_config(BASE.replace('bus = "PCC"\nr = 1.0', 'r = 1.0'))


@pytest.mark.parametrize("value", ["nan", "inf", "-0.1", '"big"'])
def test_bad_numbers(value):
    with pytest.raises(ConfigError):
        parse_config(BASE.replace("x = 0.2", f"x = {value}"))


def test_wrong_mode_for_terminal_role():
    text = BASE + '\n[[device]]\nname = "c"\ntype = "vsc"\nbus = "PCC"\nmode = "DCV"\n'
    with pytest.raises(ConfigError, match="mode"):
        parse_config(text)


def test_invalid_toml_reports_line():
    with pytest.raises(ConfigError) as err:
        parse_config("schema = 1\n[[area]\n")
    assert err.value.line == 2


def test_bad_partition_factor():
    with pytest.raises(ConfigError, match="kpart"):
        parse_config(BASE + "[analysis]\nkpart = [0.5, 1.0]\n")
