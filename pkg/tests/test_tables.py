"""
Tests for result tables and artifact naming.
"""
import json
import math

import numpy as np
import pytest

from bbm_extremes.tables import (
    artifact_name,
    artifact_path,
    format_float,
    read_csv,
    write_csv,
    write_json,
    write_table,
)

PROVENANCE = {"seed": 7, "config_digest": "0123456789abcdef", "grid_step": 0.01, "command": "tail"}


@pytest.mark.parametrize("value,expected", [
    (0.1, "0.10000000000000001"),
    (math.inf, "inf"),
    (-math.inf, "-inf"),
    (math.nan, "nan"),
    (True, "true"),
    (None, ""),
    (3, "3"),
])
def test_format_float(value, expected):
    """Test that numbers render with full precision and specials are spelled out."""
    assert format_float(value) == expected


def test_full_precision_round_trip():
    """Test that written floats parse back to the same value."""
    value = 1 / 3
    assert float(format_float(value)) == value


@pytest.mark.parametrize("command,expected", [
    ("tail", "tail-abc.csv"),
    ("right-tail", "right-tail-abc.csv"),
    ("Right Tail summary", "right-tail-summary-abc.csv"),
])
def test_artifact_name(command, expected):
    """Test slugified artifact names."""
    assert artifact_name(command, "abc", ".csv") == expected


def test_artifact_path_creates_directory(tmp_path):
    """Test that the output directory is created."""
    path = artifact_path(tmp_path / "out", "tail", "abc", "csv")
    assert path.parent.is_dir()
    assert path.name == "tail-abc.csv"


def test_csv_provenance_and_rows(tmp_path):
    """Test provenance lines and numeric rows."""
    path = write_csv(tmp_path / "t.csv", ["y", "tail", "censored"], [[1.0, np.float64(0.25), False]], PROVENANCE)
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=7"
    assert "# config_digest=0123456789abcdef" in lines
    provenance, rows = read_csv(path)
    assert provenance["grid_step"] == "0.01"
    assert rows == [{"y": "1", "tail": "0.25", "censored": "false"}]


def test_csv_rejects_ragged_rows(tmp_path):
    """Test that rows must match the header."""
    with pytest.raises(ValueError):
        write_csv(tmp_path / "t.csv", ["a", "b"], [[1.0]], PROVENANCE)


def test_json_document(tmp_path):
    """Test the JSON schema tag and non-finite values."""
    path = write_json(tmp_path / "t.json", "tail", PROVENANCE, rows=[{"y": 1.0, "ratio": math.inf}], summary={"n": np.int64(4)})
    document = json.loads(path.read_text())
    assert document["schema"] == "bbm-extremes/tail@1"
    assert document["provenance"]["seed"] == 7
    assert document["rows"][0]["ratio"] == "inf"
    assert document["summary"] == {"n": 4}


def test_write_table_csv_with_summary(tmp_path):
    """Test that CSV tables get a JSON summary alongside."""
    paths = write_table(tmp_path, "tail", "csv", ["y", "tail"], [[1.0, 0.5]], PROVENANCE, {"mean": 0.1})
    assert [p.name for p in paths] == ["tail-0123456789abcdef.csv", "tail-summary-0123456789abcdef.json"]
    assert json.loads(paths[1].read_text())["schema"] == "bbm-extremes/tail-summary@1"


def test_write_table_json(tmp_path):
    """Test that JSON tables hold records keyed by column."""
    paths = write_table(tmp_path, "tail", "json", ["y", "tail"], [[1.0, 0.5]], PROVENANCE)
    document = json.loads(paths[0].read_text())
    assert document["rows"] == [{"y": 1.0, "tail": 0.5}]
    assert "summary" not in document


def test_write_table_unknown_format(tmp_path):
    """Test that unknown formats are rejected."""
    with pytest.raises(ValueError):
        write_table(tmp_path, "tail", "xml", ["y"], [[1.0]], PROVENANCE)
