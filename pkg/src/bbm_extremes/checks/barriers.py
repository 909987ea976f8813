"""
Monotonicity of conditional barrier probabilities in the upper barrier.
"""

from ..barrier_analytics import constant_barrier, mc_conditional_barrier, monotonicity_gap
from . import BaseCheck, CheckContext, CheckResult

# (x, y, T, lower level, lower upper level, higher upper level)
CONFIGURATIONS = (
    (0.0, 0.0, 1.0, -1.0, 0.5, 1.5),
    (0.0, 0.5, 2.0, -0.8, 1.0, 2.0),
    (0.5, 0.0, 1.5, -0.5, 0.8, 1.6),
    (-0.2, -0.2, 3.0, -1.5, 0.4, 1.2),
    (0.0, -0.5, 2.5, -1.2, 0.6, 2.5),
)


class BarrierMonotonicityCheck(BaseCheck):
    """
    P(above lower | below upper) for Brownian bridges is larger under a
    higher upper barrier, up to the gate in combined standard errors.
    """

    name = "barrier-monotonicity"
    description = "conditioning on a higher upper barrier raises the lower-barrier probability"

    def __init__(self, n: int = 10**5, grid_step: float = 0.01) -> None:
        self.n = n
        self.grid_step = grid_step

    def run(self, context: CheckContext) -> CheckResult:
        n = context.n(self.n, minimum=2000)
        root = context.stream(self.name)
        rows = []
        for k, (x, y, T, lower, upper_lo, upper_hi) in enumerate(CONFIGURATIONS):
            stream = root.child(k)
            low = mc_conditional_barrier(
                x, y, T, constant_barrier(lower), constant_barrier(upper_lo), n, self.grid_step, stream.child(0), context.workers
            )
            high = mc_conditional_barrier(
                x, y, T, constant_barrier(lower), constant_barrier(upper_hi), n, self.grid_step, stream.child(1), context.workers
            )
            gap = monotonicity_gap(high, low)
            rows.append(
                {
                    "case": k,
                    "lower_upper": low.value,
                    "higher_upper": high.value,
                    "gap_stderr": gap,
                    "passed": gap >= -context.gate,
                }
            )
        return self._result(rows)
