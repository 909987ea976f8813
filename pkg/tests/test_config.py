"""
Tests for experiment configuration.
"""
import json
import re

import pytest
import yaml

from bbm_extremes.branching_sim import PruneRule
from bbm_extremes.config import COMMANDS, ExperimentConfig
from bbm_extremes.exceptions import ConfigError


@pytest.fixture
def config():
    """Default configuration."""
    return ExperimentConfig()


def test_defaults(config):
    """Test the default blocks and derived values."""
    assert config.model.d == 2
    assert config.params.d == 2
    assert config.z == pytest.approx(2 * 9.0 ** (1 / 6))
    assert config.z_grid == pytest.approx((2 * 9.0 ** (1 / 6), 3.0))
    assert config.pruning is None
    for command in COMMANDS:
        config.validate(command)


def test_overrides_coerce_strings(config):
    """Test that flag and file strings are converted to the key's type."""
    updated = config.with_overrides(d="3", t="20", y_grid="1, 2,3", prune="yes", population="none")
    assert updated.model.d == 3
    assert updated.model.t == 20.0
    assert updated.model.y_grid == (1.0, 2.0, 3.0)
    assert updated.simulation.prune is True
    assert updated.simulation.population is None
    assert config.model.d == 2


def test_overrides_ignore_none(config):
    """Test that unset flags leave values untouched."""
    assert config.with_overrides(d=None).model.d == 2


def test_large_seed_is_exact(config):
    """Test that 64-bit seeds survive coercion."""
    seed = 2**64 - 1
    assert config.with_overrides(seed=str(seed)).mc.seed == seed


@pytest.mark.parametrize("key,value", [("d", "2.5"), ("n", "many"), ("prune", "maybe"), ("colour", "red")])
def test_overrides_reject_bad_values(config, key, value):
    """Test that bad values and unknown keys raise ConfigError."""
    with pytest.raises(ConfigError):
        config.with_overrides(**{key: value})


def test_pruning_rule(config):
    """Test that enabling pruning builds the rule."""
    rule = config.with_overrides(prune=True, prune_K=10, prune_beta=1.5).pruning
    assert rule == PruneRule(beta=1.5, K=10.0)


def test_load_key_value(tmp_path):
    """Test the flat key=value format with comments."""
    path = tmp_path / "run.conf"
    path.write_text("# planar run\nd = 3\nn=50  # small\ny_grid=1,2\n")
    config = ExperimentConfig.load(path)
    assert config.model.d == 3 and config.mc.n == 50
    assert config.model.y_grid == (1.0, 2.0)


def test_load_yaml_blocks(tmp_path):
    """Test nested YAML blocks."""
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"model": {"d": 5, "L": 16}, "mc": {"seed": 7}}))
    config = ExperimentConfig.load(path)
    assert config.model.d == 5 and config.model.L == 16.0 and config.mc.seed == 7


def test_load_json(tmp_path):
    """Test JSON config files."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"t": 30, "format": "json"}))
    config = ExperimentConfig.load(path)
    assert config.model.t == 30.0 and config.output.format == "json"


@pytest.mark.parametrize("name,text", [
    ("bad.conf", "d 3\n"),
    ("bad.json", "{not json"),
    ("list.yaml", "- 1\n- 2\n"),
])
def test_load_rejects_malformed_files(tmp_path, name, text):
    """Test that unreadable configs raise ConfigError."""
    path = tmp_path / name
    path.write_text(text)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)


def test_load_missing_file(tmp_path):
    """Test that a missing file raises ConfigError."""
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "absent.conf")


def test_digest(config):
    """Test that the digest follows numeric settings only."""
    digest = config.digest()
    assert len(digest) == 16
    assert config.with_overrides(workers=4, out="elsewhere", format="json").digest() == digest
    assert config.with_overrides(seed=1).digest() != digest
    assert ExperimentConfig().digest() == digest


def test_round_trip_through_dict(config):
    """Test that to_dict feeds back into from_mapping."""
    updated = config.with_overrides(d=4, z_grid="2,3")
    assert ExperimentConfig.from_mapping(updated.to_dict()).digest() == updated.digest()


@pytest.mark.parametrize("command,overrides,fragment", [
    ("tail", {"ell": 2.0}, "ell=2.0 outside [1, L^(1/6)]"),
    ("tail", {"z": 10.0}, "z=10 outside the window range [L^0.166667, L^0.666667]"),
    ("right-tail", {"z_grid": "3,6"}, "z_grid=6"),
    ("mallein", {"t": 4.0}, "y_grid value 2.5 outside [1, sqrt(t)]"),
    ("right-tail", {"t": 8.0}, "must exceed L"),
    ("bramson", {"ell_grid": "4,8"}, "ell_grid"),
    ("couple", {"x0": 0.0}, "x0"),
    ("tail", {"n": 0}, "n=0"),
    ("tail", {"grid_step": 0.0}, "grid_step"),
    ("tail", {"window_inner": 0.3}, "window_inner"),
    ("tail", {"format": "xml"}, "format"),
    ("tail", {"t": 1.0}, "t=1.0"),
])
def test_validate_names_the_offending_key(config, command, overrides, fragment):
    """Test that validation errors carry the key, value and range."""
    with pytest.raises(ConfigError, match=re.escape(fragment)):
        config.with_overrides(**overrides).validate(command)


def test_validate_unknown_command(config):
    """Test that unknown commands are rejected."""
    with pytest.raises(ConfigError):
        config.validate("plot")


def test_coupling_accepts_long_ell(config):
    """Test that couple and bramson use ell outside the window range."""
    config.with_overrides(ell=2.0).validate("couple")


def test_z_range_follows_window_exponents(config):
    """Test that the admissible z range moves with window_inner and window_outer."""
    # L=9: 9^(1/6) = 1.44, 9^0.6 = 3.74, 9^0.2 = 1.55
    config.with_overrides(z=3.9).validate("tail")
    with pytest.raises(ConfigError, match=re.escape("z=3.9 outside the window range [L^0.166667, L^0.6]")):
        config.with_overrides(z=3.9, window_outer=0.6).validate("tail")
    with pytest.raises(ConfigError, match=re.escape("z=1.5 outside the window range [L^0.2, L^0.666667]")):
        config.with_overrides(z=1.5, window_inner=0.2).validate("tail")
    config.with_overrides(z=1.5).validate("tail")
