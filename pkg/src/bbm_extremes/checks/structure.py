"""
Structural invariants of simulated trees.
"""

import numpy as np

from ..branching_sim import Fate, compute_Z, count_good_particles, simulate_from_window, simulate_tree
from ..core_model import ModelParams
from ..stochastic_kernels import TIME_TOL
from . import BaseCheck, CheckContext, CheckResult


def _count_identity(tree, T: float) -> bool:
    branches = sum(1 for b in tree.branch_times if b < T - TIME_TOL)
    return tree.population(T) == 1 + branches


def _continuity(tree) -> bool:
    for p in tree.particles:
        for child in p.children:
            start = tree.particles[child].trajectory.values[0]
            if not np.array_equal(start, p.trajectory.values[-1]):
                return False
        if p.fate is Fate.BRANCHED and len(p.children) != 2:
            return False
    return True


def _same_tree(a, b) -> bool:
    if len(a) != len(b):
        return False
    return all(
        np.array_equal(p.trajectory.times, q.trajectory.times)
        and np.array_equal(p.trajectory.values, q.trajectory.values)
        for p, q in zip(a.particles, b.particles)
    )


class StructureCheck(BaseCheck):
    """Count identity, genealogy continuity, lambda_bar <= gamma, Z_L >= 0, determinism."""

    name = "structure"
    description = "per-realization invariants of the tree simulator"

    def __init__(self, trees: int = 20, d: int = 2, T: float = 3.0, L: float = 9.0, t: float = 12.0) -> None:
        self.trees = trees
        self.d = d
        self.T = T
        self.L = L
        self.t = t

    def run(self, context: CheckContext) -> CheckResult:
        params = ModelParams(self.d)
        root = context.stream(self.name)
        rows = []
        for k in range(max(2, int(self.trees * min(1.0, context.scale * 2)))):
            stream = root.child(k)
            tree = simulate_tree(params, stream, horizon=self.T, query_times=[self.T])
            replay = simulate_tree(params, stream, horizon=self.T, query_times=[self.T])
            z = compute_Z(tree, self.T) if self.T >= 1 else 0.0
            window_tree = simulate_from_window(
                self.L, 2 * self.L ** (1 / 6), self.t, params, stream.child("window"), ell=1.0, grid_step=0.05
            )
            counts = count_good_particles(window_tree, self.t, self.L, 1.0, 1.0, 2 * self.L ** (1 / 6))
            row = {
                "tree": k,
                "particles": len(tree),
                "count_identity": _count_identity(tree, self.T),
                "continuity": _continuity(tree),
                "deterministic": _same_tree(tree, replay),
                "z_nonnegative": z >= 0,
                "gamma": counts.gamma,
                "lambda_bar": counts.lambda_bar,
            }
            row["passed"] = bool(
                row["count_identity"]
                and row["continuity"]
                and row["deterministic"]
                and row["z_nonnegative"]
                and counts.lambda_bar <= counts.gamma
            )
            rows.append(row)
        return self._result(rows)
