"""
Bessel marginals against the scaled chi law.
"""

import math

from scipy import stats

from ..stochastic_kernels import make_grid, sample_bessel_paths
from . import BaseCheck, CheckContext, CheckResult

SIGNIFICANCE = 0.01


class ChiMarginalCheck(BaseCheck):
    """KS test of R_L from the origin against sqrt(L) chi_d."""

    name = "chi-marginal"
    description = "Bessel(d) at time L from 0 ~ sqrt(L) chi_d"

    def __init__(self, dims=(1, 2, 3, 5), L: float = 2.0, n: int = 10**5, grid_step: float = 0.25) -> None:
        self.dims = tuple(dims)
        self.L = L
        self.n = n
        self.grid_step = grid_step

    def run(self, context: CheckContext) -> CheckResult:
        grid = make_grid(self.L, self.grid_step)
        n = context.n(self.n, minimum=1000)
        rows = []
        for d in self.dims:
            radii = sample_bessel_paths(d, 0.0, grid, n, context.stream(f"{self.name}/{d}"))[:, -1]
            result = stats.kstest(radii, stats.chi(df=d, scale=math.sqrt(self.L)).cdf)
            rows.append(
                {
                    "d": d,
                    "L": self.L,
                    "n": n,
                    "ks_statistic": float(result.statistic),
                    "p_value": float(result.pvalue),
                    "passed": result.pvalue >= SIGNIFICANCE,
                }
            )
        return self._result(rows)
