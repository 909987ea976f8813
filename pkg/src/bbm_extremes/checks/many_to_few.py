"""
Many-to-one and many-to-two identities.
"""

import functools
import logging
import math

import numpy as np

from ..branching_sim import many_to_one_check, many_to_two_moment_check
from ..core_model import ModelParams, in_window
from ..estimates import combined_stderr
from ..stochastic_kernels import PathGrid
from . import BaseCheck, CheckContext, CheckResult, z_score

logger = logging.getLogger(__name__)


def _constant_one(path: PathGrid) -> float:
    return 1.0


def _stays_below(path: PathGrid, level: float) -> float:
    """Radial track stays below a fixed level."""
    return float(np.all(path.radial().values <= level))


def _terminal_above(path: PathGrid, level: float) -> float:
    return float(np.linalg.norm(path.values[-1]) > level)


def _terminal_in_window(path: PathGrid, L: float) -> float:
    return float(in_window(float(np.linalg.norm(path.values[-1])), L))


class ManyToOneCheck(BaseCheck):
    """E[N_T] = e^T, and tree sums of path functionals against e^T times single paths."""

    name = "many-to-one"
    description = "E[sum over N_T of f] = e^T E[f(single path)]"

    def __init__(
        self,
        times=(1.0, 3.0, 5.0),
        n_trees: int = 10**4,
        functional_T: float = 4.0,
        n_functional_trees: int = 2000,
        n_single: int = 10**5,
        grid_step: float = 0.01,
    ) -> None:
        self.times = tuple(times)
        self.n_trees = n_trees
        self.functional_T = functional_T
        self.n_functional_trees = n_functional_trees
        self.n_single = n_single
        self.grid_step = grid_step

    def _functionals(self):
        T = self.functional_T
        return {
            "barrier": functools.partial(_stays_below, level=2.0 * math.sqrt(T)),
            "terminal-level": functools.partial(_terminal_above, level=math.sqrt(T)),
            "window": functools.partial(_terminal_in_window, L=T),
        }

    def run(self, context: CheckContext) -> CheckResult:
        rows = []
        root = context.stream(self.name)
        counting = ModelParams(1)
        for k, T in enumerate(self.times):
            lhs, rhs = many_to_one_check(
                _constant_one,
                0.0,
                T,
                context.n(self.n_trees),
                1,
                root.child(k),
                counting,
                grid_step=max(T, self.grid_step),
                workers=context.workers,
            )
            score = z_score(lhs.value, math.exp(T), lhs.stderr)
            rows.append(
                {
                    "case": f"E[N_T] T={T:g}",
                    "lhs": lhs.value,
                    "rhs": math.exp(T),
                    "stderr": lhs.stderr,
                    "z_score": score,
                    "passed": score <= context.gate,
                }
            )
        params = ModelParams(2)
        for name, f in self._functionals().items():
            lhs, rhs = many_to_one_check(
                f,
                np.zeros(2),
                self.functional_T,
                context.n(self.n_functional_trees),
                context.n(self.n_single),
                root.child(name),
                params,
                grid_step=self.grid_step,
                workers=context.workers,
            )
            se = combined_stderr(lhs, rhs)
            score = z_score(lhs.value, rhs.value, se)
            rows.append(
                {
                    "case": f"{name} T={self.functional_T:g}",
                    "lhs": lhs.value,
                    "rhs": rhs.value,
                    "stderr": se,
                    "z_score": score,
                    "passed": score <= context.gate,
                }
            )
        return self._result(rows)


class ManyToTwoCheck(BaseCheck):
    """E[N_T^2] = 2e^(2T) - e^T."""

    name = "many-to-two"
    description = "second moment of the population size"

    def __init__(self, times=(1.0, 3.0), n: int = 10**5) -> None:
        self.times = tuple(times)
        self.n = n

    def run(self, context: CheckContext) -> CheckResult:
        rows = []
        root = context.stream(self.name)
        for k, T in enumerate(self.times):
            est = many_to_two_moment_check(T, context.n(self.n, minimum=1000), root.child(k), workers=context.workers)
            expected = est.metadata["expected"]
            score = z_score(est.value, expected, est.stderr)
            rows.append(
                {
                    "case": f"T={T:g}",
                    "estimate": est.value,
                    "expected": expected,
                    "stderr": est.stderr,
                    "z_score": score,
                    "passed": score <= context.gate,
                }
            )
        return self._result(rows)
