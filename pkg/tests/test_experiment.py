"""
Tests for the batch front-end.
"""
import json
from pathlib import Path

import pytest

import bbm_extremes
from bbm_extremes.checks.many_to_few import ManyToTwoCheck
from bbm_extremes.config import ExperimentConfig
from bbm_extremes.exceptions import ConfigError, ResourceCapError, StatisticalCheckError
from bbm_extremes.experiment import Experiment
from bbm_extremes.tables import read_csv


@pytest.fixture
def small(tmp_path):
    """A configuration small enough for unit tests."""
    return ExperimentConfig().with_overrides(
        t=3.0, n=20, grid_step=0.05, y_grid="1,1.5", workers=1, out=str(tmp_path / "results")
    )


def _names(result):
    return sorted(path.name for path in result.artifacts)


def test_simulate_writes_table_tree_and_svg(small):
    """Test the artifacts of simulate."""
    result = Experiment(small, "simulate").run()
    digest = small.digest()
    assert _names(result) == sorted(
        [f"simulate-{digest}.csv", f"simulate-tree-{digest}.json", f"simulate-{digest}.svg"]
    )
    tree = json.loads(next(p for p in result.artifacts if p.name.startswith("simulate-tree")).read_text())
    assert tree["schema"] == "bbm-extremes/tree@1"
    assert tree["summary"]["d"] == 2
    assert result.summary["alive"] >= 1
    assert result.summary["stop_reason"] == "horizon"


def test_simulate_population_target(small):
    """Test that a population target stops the tree."""
    result = Experiment(small.with_overrides(population=8), "simulate").run()
    assert result.summary["alive"] == 8
    assert result.summary["stop_reason"] == "population-cap"


def test_simulate_population_cap(small):
    """Test that runaway trees stop with ResourceCapError."""
    with pytest.raises(ResourceCapError):
        Experiment(small.with_overrides(t=10.0, population_cap=10), "simulate").run()


def test_tail_table(small):
    """Test the tail table columns, provenance and monotonicity."""
    result = Experiment(small, "tail").run()
    provenance, rows = read_csv(result.artifacts[0])
    assert provenance["config_digest"] == small.digest()
    assert provenance["seed"] == str(small.mc.seed)
    assert list(rows[0]) == ["y", "cdf", "cdf_stderr", "tail", "tail_stderr", "batch_stderr", "n"]
    assert all(row["batch_stderr"] == "nan" for row in rows)
    tails = [float(row["tail"]) for row in rows]
    cdfs = [float(row["cdf"]) for row in rows]
    assert tails == sorted(tails, reverse=True)
    assert cdfs == sorted(cdfs)
    assert result.summary["pruning"] is False
    assert result.summary["gumbel_scale"] > 0
    assert "gumbel_loc" in result.summary


def test_estimates_carry_provenance(small):
    """Test that reported estimates are stamped with the digest and seed of their run."""
    result = Experiment(small, "tail").run()
    assert len(result.estimates) == 2
    assert all(est.config_digest == small.digest() for est in result.estimates)
    assert all(est.seed == small.mc.seed for est in result.estimates)
    _, rows = read_csv(result.artifacts[0])
    assert [float(row["tail"]) for row in rows] == [est.value for est in result.estimates]
    config = small.with_overrides(ell_grid="8", n=20)
    bramson = Experiment(config, "bramson").run()
    assert len(bramson.estimates) == 3
    assert {est.config_digest for est in bramson.estimates} == {config.digest()}


@pytest.mark.slow
def test_results_do_not_depend_on_workers(small):
    """Test that worker counts leave the tables byte-identical."""
    serial = Experiment(small, "tail").run().artifacts[0].read_bytes()
    pooled = Experiment(small.with_overrides(workers=2), "tail").run().artifacts[0].read_bytes()
    assert serial == pooled


def test_mallein_with_pruning(small):
    """Test the Mallein ratios and the pruning summary."""
    result = Experiment(small.with_overrides(prune=True, prune_K=20), "mallein").run()
    _, rows = read_csv(result.artifacts[0])
    assert [float(row["y"]) for row in rows] == [1.0, 1.5]
    assert result.summary["pruning"] is True
    assert 0.0 <= result.summary["prune_bias"] <= 1.0


def test_mallein_rejects_large_y(small):
    """Test that y beyond sqrt(t) is a configuration error."""
    with pytest.raises(ConfigError, match="sqrt"):
        Experiment(small.with_overrides(y_grid="1,2"), "mallein")


def test_right_tail(small):
    """Test rows for both normalizer variants."""
    config = small.with_overrides(t=10.0)
    result = Experiment(config, "right-tail").run()
    _, rows = read_csv(result.artifacts[0])
    assert len(rows) == 2 * len(config.z_grid)
    assert {row["variant"] for row in rows} == {"radial-power", "sqrt2L-power"}
    assert "collapse_factor" in result.summary


def test_zstat(small):
    """Test one row of both Z_L variants per replicate."""
    config = small.with_overrides(L=5.0, n=5)
    result = Experiment(config, "zstat").run()
    _, rows = read_csv(result.artifacts[0])
    assert len(rows) == 5
    assert all(float(row["Z_radial_power"]) >= 0 for row in rows)


def test_couple(small):
    """Test the coupling summary."""
    result = Experiment(small.with_overrides(n=50), "couple").run()
    assert result.summary["violations"] == 0
    assert result.summary["on_good_event"] == 50


def test_bramson(small):
    """Test the Bramson cells."""
    result = Experiment(small.with_overrides(ell_grid="8", n=50), "bramson").run()
    _, rows = read_csv(result.artifacts[0])
    assert len(rows) == 3
    assert result.summary["monotone"] is True
    assert "median" in rows[0] and "integral_bound" in rows[0]
    assert len({row["median"] for row in rows}) == 1
    [(ell, offset, stderr)] = result.summary["median_offsets"]
    assert ell == 8.0
    assert abs(offset) < 3.0 and stderr > 0


def test_fkpp(small):
    """Test the PDE comparison table."""
    result = Experiment(small.with_overrides(n=200), "fkpp").run()
    _, rows = read_csv(result.artifacts[0])
    assert len(rows) == 2
    assert all(0.0 <= float(row["pde"]) <= 1.0 for row in rows)


def test_render(small):
    """Test that render writes one SVG."""
    result = Experiment(small, "render").run()
    assert [p.suffix for p in result.artifacts] == [".svg"]


def test_json_format(small):
    """Test JSON tables with the summary embedded."""
    result = Experiment(small.with_overrides(format="json"), "tail").run()
    document = json.loads(result.artifacts[0].read_text())
    assert document["schema"] == "bbm-extremes/tail@1"
    assert len(document["rows"]) == 2
    assert "mean_centered_max" in document["summary"]


def test_verify_subset(small):
    """Test a verification run restricted to one check."""
    result = Experiment(small, "verify", checks=["many-to-two"], quick=True).run()
    assert result.summary["passed"] == 1


def test_verify_failure_raises(small, monkeypatch):
    """Test that a failing check raises after the table is written."""
    monkeypatch.setattr(ManyToTwoCheck, "run", lambda self, context: self._result([{"passed": False}]))
    with pytest.raises(StatisticalCheckError):
        Experiment(small, "verify", checks=["many-to-two"], quick=True).run()
    assert list(Path(small.output.out).glob("verify-*.csv"))


def test_verify_summary_reports_pass_rate_and_errors(small, monkeypatch):
    """Test that the verify summary records the pass rate and checks that raised."""
    result = Experiment(small, "verify", checks=["many-to-two"], quick=True).run()
    assert result.summary["pass_rate"] == 100.0
    assert result.summary["errors"] == []

    def explode(self, context):
        raise RuntimeError("boom")

    monkeypatch.setattr(ManyToTwoCheck, "run", explode)
    with pytest.raises(StatisticalCheckError):
        Experiment(small, "verify", checks=["many-to-two"], quick=True).run()
    [path] = Path(small.output.out).glob("verify-summary-*.json")
    summary = json.loads(path.read_text())["summary"]
    assert summary["pass_rate"] == 0.0
    assert summary["errors"] == [{"check": "many-to-two", "message": "boom"}]


def test_package_run(small, tmp_path):
    """Test the package-level entry point with a config file."""
    path = tmp_path / "run.conf"
    path.write_text(f"t=3\nn=10\ngrid_step=0.05\nout={tmp_path / 'pkg'}\n")
    result = bbm_extremes.run("tail", path)
    assert result.command == "tail"
    assert all(p.exists() for p in result.artifacts)
