"""
Ballot formula against bridge Monte Carlo.
"""

import logging

from ..barrier_analytics import ballot_probability, ballot_refinement
from ..stochastic_kernels import as_generator
from . import BaseCheck, CheckContext, CheckResult, z_score

logger = logging.getLogger(__name__)


class BallotCheck(BaseCheck):
    """Random (x, y, a, b, T) with a > x, b > y; MC after refinement extrapolation."""

    name = "ballot"
    description = "bridge below a line: 1 - exp(-2(a-x)(b-y)/T)"

    def __init__(self, cases: int = 20, n: int = 10**6, grid_step: float = 0.02) -> None:
        self.cases = cases
        self.n = n
        self.grid_step = grid_step

    def run(self, context: CheckContext) -> CheckResult:
        root = context.stream(self.name)
        gen = as_generator(root.child("cases"))
        cases = max(2, int(round(self.cases * min(1.0, context.scale * 2))))
        n = context.n(self.n, minimum=2000)
        rows = []
        for k in range(cases):
            T = float(gen.uniform(0.5, 2.0))
            x, y = (float(v) for v in gen.uniform(-1.0, 1.0, size=2))
            a = x + float(gen.uniform(0.1, 1.5))
            b = y + float(gen.uniform(0.1, 1.5))
            exact = ballot_probability(x, y, a, b, T)
            result = ballot_refinement(
                x, y, a, b, T, n, self.grid_step, root.child(k), workers=context.workers
            )
            est = result.extrapolated
            score = z_score(est.value, exact, est.stderr)
            rows.append(
                {
                    "case": k,
                    "x": x,
                    "y": y,
                    "a": a,
                    "b": b,
                    "T": T,
                    "exact": exact,
                    "estimate": est.value,
                    "stderr": est.stderr,
                    "z_score": score,
                    "passed": score <= context.gate,
                }
            )
            logger.debug(f"ballot case {k}: exact={exact:.5f} mc={est.value:.5f}+-{est.stderr:.1g}")
        return self._result(rows)
