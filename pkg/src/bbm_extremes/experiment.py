"""
Experiment orchestration: one method per command, each writing its tables.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .branching_sim import (
    compute_Z,
    estimate_max_samples,
    max_modulus,
    prune_bias,
    simulate_tree,
)
from .config import ExperimentConfig
from .core_model import ModelParams, ZVariant, centering
from .estimates import TailEstimate
from .extreme_stats import (
    bramson_tail_bound_check,
    coupling_discrepancy_check,
    coupling_tail_compare,
    estimate_centered_max_cdf,
    estimate_right_tail,
    estimate_tail,
    fit_tail_rate,
    gumbel_descriptive_fit,
    mallein_band,
    mallein_ratio,
    right_tail_normalized,
)
from .fkpp import fkpp_tail_compare
from .parallel import run_replicates
from .render import write_svg
from .stochastic_kernels import RngStream
from .tables import artifact_path, write_json, write_table
from .verifier import Verifier

logger = logging.getLogger(__name__)

# trees larger than this are summarized but not drawn
RENDER_LIMIT = 200_000


@dataclass
class ExperimentResult:
    command: str
    artifacts: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    estimates: List[TailEstimate] = field(default_factory=list)


def _z_task(stream: RngStream, params: ModelParams, L: float, grid_step: float, inner: float, outer: float, cap: int):
    tree = simulate_tree(params, stream, horizon=L, grid_step=grid_step, query_times=[L], population_cap=cap)
    return (
        compute_Z(tree, L, ZVariant.RADIAL_POWER, inner, outer),
        compute_Z(tree, L, ZVariant.SQRT2L_POWER, inner, outer),
        tree.population(L),
    )


class Experiment:
    """Runs one command of the batch front-end against a validated configuration."""

    def __init__(self, config: ExperimentConfig, command: str, checks: Optional[List[str]] = None, quick: bool = False):
        """
        Initialize the experiment.

        Args:
            config: Experiment configuration
            command: One of the commands in config.COMMANDS
            checks: For verify, the subset of checks to run
            quick: For verify, scale sample sizes down by 10

        Raises:
            ConfigError: If the configuration is invalid for the command
        """
        config.validate(command)
        self.config = config
        self.command = command
        self.checks = checks
        self.quick = quick
        self.digest = config.digest()
        self.rng = RngStream(config.mc.seed).child(command)

    @property
    def provenance(self) -> Dict[str, Any]:
        return {
            "seed": self.config.mc.seed,
            "config_digest": self.digest,
            "grid_step": self.config.simulation.grid_step,
            "version": __version__,
            "command": self.command,
        }

    def _stamp(self, estimates) -> List[TailEstimate]:
        """Attach the config digest and seed to every estimate a command reports."""
        return [est.with_provenance(self.digest, self.config.mc.seed) for est in estimates]

    def _write(self, columns, rows, summary=None) -> List[Path]:
        return write_table(
            self.config.output.out, self.command, self.config.output.format, columns, rows, self.provenance, summary
        )

    def run(self) -> ExperimentResult:
        """Run the command and return the artifacts it wrote."""
        logger.info(f"Starting {self.command} (d={self.config.model.d}, digest={self.digest})")
        handler = getattr(self, "_run_" + self.command.replace("-", "_"))
        result = handler()
        logger.info(f"Finished {self.command}: {len(result.artifacts)} artifact(s)")
        return result

    def _simulate(self):
        c = self.config
        population = c.simulation.population
        return simulate_tree(
            c.params,
            self.rng,
            horizon=None if population is not None else c.model.t,
            population=population,
            pruning=c.pruning,
            grid_step=c.simulation.grid_step,
            population_cap=c.simulation.population_cap,
        )

    def _run_simulate(self) -> ExperimentResult:
        tree = self._simulate()
        horizon = tree.horizon
        extremum = max_modulus(tree, horizon)
        summary = {
            "particles": len(tree),
            "alive": tree.population(horizon),
            "horizon": horizon,
            "stop_reason": tree.stop_reason.value,
            "pruned": tree.pruned,
            "max_modulus": extremum.value,
            "argmax_id": extremum.particle_id,
        }
        artifacts = self._write(list(summary), [list(summary.values())])
        tree_path = artifact_path(self.config.output.out, f"{self.command}-tree", self.digest, "json")
        document = tree.to_json()
        document.pop("schema")
        artifacts.append(write_json(tree_path, "tree", self.provenance, summary=document))
        if len(tree) <= RENDER_LIMIT:
            artifacts.append(write_svg(tree, artifact_path(self.config.output.out, self.command, self.digest, "svg")))
        else:
            logger.warning(f"Tree has {len(tree)} particles; skipping the SVG (limit {RENDER_LIMIT})")
        return ExperimentResult(self.command, artifacts, summary)

    def _run_render(self) -> ExperimentResult:
        tree = self._simulate()
        path = write_svg(tree, artifact_path(self.config.output.out, self.command, self.digest, "svg"))
        return ExperimentResult(self.command, [path], {"particles": len(tree)})

    def _maxima(self) -> np.ndarray:
        c = self.config
        return estimate_max_samples(
            c.params,
            horizon=c.model.t,
            n=c.mc.n,
            rng=self.rng,
            pruning=c.pruning,
            grid_step=c.simulation.grid_step,
            workers=c.mc.workers,
            population_cap=c.simulation.population_cap,
        )[:, -1]

    def _prune_summary(self) -> Dict[str, Any]:
        c = self.config
        if c.pruning is None:
            return {"pruning": False}
        bias = prune_bias(
            c.params,
            c.model.t,
            max(1, c.mc.n // 10),
            self.rng.child("prune-bias"),
            c.pruning,
            grid_step=c.simulation.grid_step,
            workers=c.mc.workers,
        )
        return {"pruning": True, "prune_K": c.pruning.K, "prune_bias": bias.value, "prune_bias_stderr": bias.stderr}

    def _run_tail(self) -> ExperimentResult:
        c = self.config
        centered = self._maxima() - centering(c.params, c.model.t)
        y_grid = c.model.y_grid
        cdf = estimate_centered_max_cdf(centered, y_grid)
        tail = self._stamp(estimate_tail(centered, y_grid))
        rows = [
            [y, f.value, f.stderr, p.value, p.stderr, p.metadata.get("batch_stderr", math.nan), p.n]
            for y, f, p in zip(y_grid, cdf, tail)
        ]
        summary: Dict[str, Any] = {"mean_centered_max": float(np.mean(centered))}
        if centered.size >= 2:
            gumbel = gumbel_descriptive_fit(centered)
            summary.update({"gumbel_loc": gumbel.loc, "gumbel_scale": gumbel.scale})
        summary.update(self._prune_summary())
        artifacts = self._write(
            ["y", "cdf", "cdf_stderr", "tail", "tail_stderr", "batch_stderr", "n"], rows, summary
        )
        return ExperimentResult(self.command, artifacts, summary, tail)

    def _run_mallein(self) -> ExperimentResult:
        c = self.config
        centered = self._maxima() - centering(c.params, c.model.t)
        y_grid = c.model.y_grid
        tail = self._stamp(estimate_tail(centered, y_grid))
        ratios = mallein_ratio(tail, y_grid, c.model.t)
        summary: Dict[str, Any] = {"band": mallein_band(ratios), **self._prune_summary()}
        if sum(est.value > 0 for est in tail) >= 4:
            fit = fit_tail_rate(tail, y_grid)
            summary.update({"slope": fit.slope, "slope_stderr": fit.stderr, "residual_rms": fit.residual_rms})
        rows = [
            [r.y, est.value, est.stderr, r.value, r.lower, r.upper, r.censored]
            for r, est in zip(ratios, tail)
        ]
        artifacts = self._write(
            ["y", "tail", "stderr", "ratio", "ratio_lower", "ratio_upper", "censored"], rows, summary
        )
        return ExperimentResult(self.command, artifacts, summary, tail)

    def _run_right_tail(self) -> ExperimentResult:
        c = self.config
        z_grid = list(c.z_grid)
        estimates = estimate_right_tail(
            c.model.L,
            z_grid,
            [c.model.y],
            c.model.t,
            c.mc.n,
            c.params,
            self.rng,
            pruning=c.pruning,
            grid_step=c.simulation.grid_step,
            workers=c.mc.workers,
        )
        per_z = self._stamp(row[0] for row in estimates)
        rows = []
        normalized = {}
        for variant in ZVariant:
            ratios = right_tail_normalized(
                c.model.L,
                z_grid,
                c.model.y,
                c.model.t,
                per_z,
                c.params,
                variant,
                inner=c.simulation.window_inner,
                outer=c.simulation.window_outer,
            )
            normalized[variant.value] = [r.value for r in ratios]
            rows.extend(
                [r.y, est.value, est.stderr, r.value, r.lower, r.upper, variant.value]
                for r, est in zip(ratios, per_z)
            )
        values = [v for v in normalized[ZVariant.RADIAL_POWER.value] if v > 0]
        summary = {"collapse_factor": max(values) / min(values) if values else math.inf}
        artifacts = self._write(
            ["z", "tail", "stderr", "normalized", "lower", "upper", "variant"], rows, summary
        )
        return ExperimentResult(self.command, artifacts, summary, per_z)

    def _run_zstat(self) -> ExperimentResult:
        c = self.config
        task = functools.partial(
            _z_task,
            params=c.params,
            L=c.model.L,
            grid_step=c.simulation.grid_step,
            inner=c.simulation.window_inner,
            outer=c.simulation.window_outer,
            cap=c.simulation.population_cap,
        )
        samples = run_replicates(task, c.mc.n, self.rng, workers=c.mc.workers)
        rows = [[i, z_r, z_s, pop] for i, (z_r, z_s, pop) in enumerate(samples)]
        summary = {"mean_Z_radial": float(np.mean([s[0] for s in samples]))}
        artifacts = self._write(["replicate", "Z_radial_power", "Z_sqrt2L_power", "population"], rows, summary)
        return ExperimentResult(self.command, artifacts, summary)

    def _run_couple(self) -> ExperimentResult:
        c = self.config
        x0, ell = c.model.x0, c.model.ell
        m_target = x0 + c.model.y
        bessel, oned = self._stamp(
            coupling_tail_compare(x0, ell, m_target, c.mc.n, c.params, self.rng.child(0), c.mc.workers)
        )
        report = coupling_discrepancy_check(
            c.params, x0, ell, min(c.mc.n, 1000), self.rng.child(1), c.simulation.path_grid_step, c.mc.workers
        )
        rows = [
            ["bessel_tail", bessel.value, bessel.stderr],
            ["oned_tail", oned.value, oned.stderr],
            ["discrepancy_bound", report.bound, report.tolerance],
            ["worst_discrepancy_ratio", report.worst_ratio, 0.0],
        ]
        summary = {
            "agree": bessel.agrees_with(oned),
            "on_good_event": report.on_good_event,
            "violations": report.violations,
        }
        artifacts = self._write(["quantity", "value", "stderr"], rows, summary)
        return ExperimentResult(self.command, artifacts, summary, [bessel, oned])

    def _run_bramson(self) -> ExperimentResult:
        c = self.config
        report = bramson_tail_bound_check(
            c.model.ell_grid, c.model.w_grid, c.mc.n, self.rng, K=c.model.K, workers=c.mc.workers
        )
        rows = [
            [
                cell.ell,
                cell.w,
                cell.estimate.value,
                cell.estimate.stderr,
                cell.shape,
                cell.ratio,
                cell.censored,
                cell.median,
                cell.integral_bound,
            ]
            for cell in report.cells
        ]
        offsets = report.median_offsets
        summary = {
            "fitted_C": report.fitted_C,
            "covered": report.covered,
            "monotone": report.monotone,
            "median_offsets": [[ell, est.value, est.stderr] for ell, est in sorted(offsets.items())],
        }
        artifacts = self._write(
            ["ell", "w", "tail", "stderr", "shape", "ratio", "censored", "median", "integral_bound"], rows, summary
        )
        return ExperimentResult(self.command, artifacts, summary, self._stamp(cell.estimate for cell in report.cells))

    def _run_fkpp(self) -> ExperimentResult:
        c = self.config
        t = c.model.t
        x_values = [centering(ModelParams(1), t) + y for y in c.model.y_grid]
        comparisons = fkpp_tail_compare(t, x_values, c.mc.n, self.rng, workers=c.mc.workers)
        rows = [[cmp.x, cmp.pde, cmp.estimate.value, cmp.estimate.stderr, cmp.agrees] for cmp in comparisons]
        summary = {"all_agree": all(cmp.agrees for cmp in comparisons)}
        artifacts = self._write(["x", "pde", "mc", "mc_stderr", "agrees"], rows, summary)
        return ExperimentResult(self.command, artifacts, summary, self._stamp(cmp.estimate for cmp in comparisons))

    def _run_verify(self) -> ExperimentResult:
        c = self.config
        verifier = Verifier(c.mc.seed, c.mc.workers, names=self.checks, quick=self.quick)
        results = verifier.run()
        rows = [
            [r.name, r.passed, len(r.rows), r.worst, r.detail]
            for r in results
        ]
        summary = {
            "passed": verifier.succeeded,
            "total": verifier.total,
            "pass_rate": verifier.pass_rate,
            "errors": [{"check": name, "message": message} for name, message in verifier.check_errors],
            "checks": {r.name: r.rows for r in results},
        }
        artifacts = self._write(["check", "passed", "cases", "worst_z_score", "detail"], rows, summary)
        verifier.raise_for_failures()
        return ExperimentResult(self.command, artifacts, summary)
