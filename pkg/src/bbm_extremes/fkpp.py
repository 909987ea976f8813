"""
Numerical F-KPP solution as a cross-oracle for one-dimensional BBM.

McKean's representation: u(t, x) = P(W*_t > x) solves
u_t = u_xx / 2 + u - u^2 with u(0, x) = 1{x < 0}.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from .branching_sim import estimate_max_samples
from .core_model import ModelParams
from .estimates import TailEstimate, binomial_estimate
from .exceptions import DomainError
from .stochastic_kernels import RngStream

logger = logging.getLogger(__name__)

# explicit scheme is stable for dt <= CFL * dx^2
CFL = 0.9


@dataclass(frozen=True)
class FkppComparison:
    x: float
    pde: float
    estimate: TailEstimate

    @property
    def agrees(self) -> bool:
        return self.estimate.agrees_with(self.pde, k=4.0)


def solve_fkpp(t: float, x_grid, dt: Optional[float] = None) -> np.ndarray:
    """
    Solve the F-KPP equation from the step initial condition up to time t.

    Explicit finite differences on a uniform x_grid with Dirichlet boundaries
    u = 1 on the left and u = 0 on the right.

    Raises:
        DomainError: If t < 0, the grid is not uniform and increasing, or dt
            breaks the stability limit
    """
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise DomainError("x grid needs at least three points")
    dx = np.diff(x)
    if np.any(dx <= 0) or not np.allclose(dx, dx[0]):
        raise DomainError("x grid must be uniform and increasing")
    h = float(dx[0])
    limit = CFL * h * h
    if dt is None:
        dt = limit
    elif dt > limit:
        raise DomainError(f"dt={dt} exceeds the stability limit {limit:.3g} for dx={h}")
    if not t >= 0:
        raise DomainError(f"t must be >= 0, got {t}")

    u = (x < 0).astype(float)
    steps = math.ceil(t / dt) if t > 0 else 0
    if steps:
        dt = t / steps
    for _ in range(steps):
        lap = ndimage.laplace(u, mode="nearest") / (h * h)
        u = u + dt * (0.5 * lap + u - u * u)
        u[0], u[-1] = 1.0, 0.0
    logger.debug(f"F-KPP solved to t={t} in {steps} steps (dx={h}, dt={dt:.3g})")
    return u


def fkpp_tail_compare(
    t: float,
    x_values: Sequence[float],
    n: int,
    rng: RngStream,
    dx: float = 0.05,
    margin: float = 10.0,
    workers: int = 1,
) -> List[FkppComparison]:
    """
    Compare Monte Carlo P(W*_t > x) for one-dimensional BBM with the PDE at
    each x. All x share the same realizations.
    """
    x_values = np.asarray(x_values, dtype=float)
    lo = min(-margin, float(x_values.min()) - margin)
    hi = max(math.sqrt(2) * t + margin, float(x_values.max()) + margin)
    grid = np.arange(lo, hi + dx / 2, dx)
    u = solve_fkpp(t, grid)
    pde = np.interp(x_values, grid, u)
    maxima = estimate_max_samples(
        ModelParams(1), horizon=t, n=n, rng=rng, grid_step=max(t, 1e-9), mode="coordinate", workers=workers
    )[:, -1]
    return [
        FkppComparison(
            x=float(x),
            pde=float(p),
            estimate=binomial_estimate(int(np.count_nonzero(maxima > x)), n, seed=rng.seed),
        )
        for x, p in zip(x_values, pde)
    ]
