"""
Girsanov normalization: weighted Brownian paths have unit mean weight.
"""

import numpy as np

from ..core_model import ModelParams
from ..girsanov import girsanov_log_weights, is_bessel_expectation
from ..stochastic_kernels import make_grid, sample_bm_paths
from . import BaseCheck, CheckContext, CheckResult, z_score

# (x0, T) pairs, far enough from zero for the quadrature to be accurate
CASES = ((3.0, 1.0), (5.0, 2.0))


def _one(path) -> float:
    return 1.0


class GirsanovNormalizationCheck(BaseCheck):
    """E^W[weight] = 1 for d in {2, 3, 5}, plus the sign of the exponent on every path."""

    name = "girsanov"
    description = "E[(W_T/W_0)^alpha exp(...) 1{W > 0}] = 1"

    def __init__(self, dims=(2, 3, 5), n: int = 10**5, grid_step: float = 1e-3, sign_paths: int = 200) -> None:
        self.dims = tuple(dims)
        self.n = n
        self.grid_step = grid_step
        self.sign_paths = sign_paths

    def _signs_hold(self, d: int, x0: float, T: float, context: CheckContext) -> bool:
        params = ModelParams(d)
        grid = make_grid(T, self.grid_step)
        paths = sample_bm_paths(x0, grid, self.sign_paths, context.stream(f"{self.name}/sign/{d}/{x0}"))
        log_weight, integral, positive = girsanov_log_weights(grid, paths, params)
        term = log_weight[positive] - params.alpha * np.log(paths[positive, -1] / x0)
        if d == 2:
            return bool(np.all(term >= -1e-12))
        return bool(np.all(term <= 1e-12))

    def run(self, context: CheckContext) -> CheckResult:
        n = context.n(self.n, minimum=1000)
        rows = []
        for d in self.dims:
            for x0, T in CASES:
                est = is_bessel_expectation(
                    _one,
                    x0,
                    T,
                    d,
                    self.grid_step,
                    n,
                    context.stream(f"{self.name}/{d}/{x0}/{T}"),
                    workers=context.workers,
                )
                score = z_score(est.value, 1.0, est.stderr)
                signs = self._signs_hold(d, x0, T, context)
                rows.append(
                    {
                        "d": d,
                        "x0": x0,
                        "T": T,
                        "estimate": est.value,
                        "stderr": est.stderr,
                        "ess": est.metadata["ess"],
                        "signs_hold": signs,
                        "z_score": score,
                        "passed": score <= context.gate and signs,
                    }
                )
        return self._result(rows)
