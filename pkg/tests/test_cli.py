"""
Tests for the command-line interface.
"""
from pathlib import Path

import pytest
from click.testing import CliRunner

from bbm_extremes.checks.many_to_few import ManyToTwoCheck
from bbm_extremes.cli import EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK, EXIT_RESOURCE, build_config, cli


@pytest.fixture
def runner():
    """Click test runner."""
    return CliRunner()


@pytest.fixture
def small_args(tmp_path):
    """Flags for a fast run writing into a temporary directory."""
    return ["--t", "3", "--n", "20", "--grid-step", "0.05", "--out", str(tmp_path / "out")]


def test_help_lists_commands(runner):
    """Test that every command is registered."""
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("simulate", "tail", "mallein", "right-tail", "verify", "zstat", "couple", "bramson", "render", "fkpp"):
        assert command in result.output


def test_tail_prints_artifacts(runner, small_args, tmp_path):
    """Test a successful run and the artifact paths it prints."""
    result = runner.invoke(cli, ["tail", *small_args])
    assert result.exit_code == EXIT_OK
    printed = [Path(line) for line in result.output.splitlines() if line.strip()]
    assert printed and all(path.exists() for path in printed)
    assert all(path.parent == tmp_path / "out" for path in printed)


def test_config_file_with_flag_override(runner, tmp_path):
    """Test that flags override values from the config file."""
    path = tmp_path / "run.yaml"
    path.write_text("model:\n  d: 3\n  t: 50\nmc:\n  n: 7\n")
    config = build_config(str(path), {"t": 4.0, "n": None, "fmt": "json"})
    assert config.model.d == 3
    assert config.model.t == 4.0
    assert config.mc.n == 7
    assert config.output.format == "json"


def test_invalid_configuration_exit_code(runner, small_args):
    """Test that range errors exit with code 1."""
    result = runner.invoke(cli, ["mallein", *small_args])
    assert result.exit_code == EXIT_INVALID


def test_invalid_ell_exit_code(runner, small_args):
    """Test that ell outside [1, L^(1/6)] exits with code 1."""
    result = runner.invoke(cli, ["tail", *small_args, "--ell", "3"])
    assert result.exit_code == EXIT_INVALID


def test_resource_cap_exit_code(runner, tmp_path):
    """Test that exceeding the population cap exits with code 2."""
    result = runner.invoke(
        cli, ["simulate", "--t", "10", "--population-cap", "10", "--out", str(tmp_path / "out")]
    )
    assert result.exit_code == EXIT_RESOURCE


def test_failed_check_exit_code(runner, small_args, monkeypatch):
    """Test that a failing oracle check exits with code 3."""
    monkeypatch.setattr(ManyToTwoCheck, "run", lambda self, context: self._result([{"passed": False}]))
    result = runner.invoke(cli, ["verify", *small_args, "--quick", "--checks", "many-to-two"])
    assert result.exit_code == EXIT_CHECK_FAILED


def test_unknown_check_exit_code(runner, small_args):
    """Test that unknown check names exit with code 1."""
    result = runner.invoke(cli, ["verify", *small_args, "--checks", "nope"])
    assert result.exit_code == EXIT_INVALID


def test_format_choice(runner, small_args):
    """Test that bad flag values exit with the validation code."""
    result = runner.invoke(cli, ["tail", *small_args, "--format", "xml"])
    assert result.exit_code == EXIT_INVALID
    assert "xml" in result.output


def test_render_command(runner, small_args):
    """Test that render prints one SVG path."""
    result = runner.invoke(cli, ["render", *small_args, "--d", "1"])
    assert result.exit_code == EXIT_OK
    assert result.output.strip().endswith(".svg")
