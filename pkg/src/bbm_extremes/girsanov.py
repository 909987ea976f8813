"""
Change of measure between one-dimensional Brownian motion and the Bessel process.

For a Brownian path W started at W_0 > 0 the Radon-Nikodym weight is

    (W_t / W_0)^alpha * exp((alpha - alpha^2)/2 * int_0^t W_u^-2 du) * 1{W_u > 0, u <= t}

Weighted Brownian expectations are Bessel expectations, which is how the
importance-sampling estimators below work.
"""

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .core_model import ModelParams
from .estimates import TailEstimate
from .exceptions import DomainError
from .parallel import run_batches
from .stochastic_kernels import (
    PathGrid,
    RngStream,
    make_grid,
    sample_bessel_paths,
    sample_bm_paths,
)

logger = logging.getLogger(__name__)

PathFunctional = Callable[[PathGrid], float]

# quadrature of W^-2 is unreliable on paths that come this close to zero
NEAR_SINGULAR_FRACTION = 0.01
MIN_EFFECTIVE_SAMPLE_SIZE = 10.0


@dataclass(frozen=True)
class PathWeight:
    """Girsanov log-weight of a single path."""

    log_weight: float
    positive_throughout: bool
    integral_term: float
    near_singular: bool = False


def girsanov_log_weights(times, values, params: ModelParams):
    """
    Batch Girsanov weights for paths on a shared grid.

    Args:
        times: Grid times, shape (k,)
        values: Brownian paths, shape (n, k), all with positive starting value
        params: Model parameters (only alpha is used)

    Returns:
        Tuple (log_weight, integral_term, positive) of arrays of shape (n,);
        log_weight is -inf and integral_term is inf where a path is not positive

    Raises:
        DomainError: If any path starts at a non-positive value
    """
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if np.any(values[:, 0] <= 0):
        raise DomainError("Girsanov weights need W_0 > 0")
    alpha = params.alpha
    positive = np.all(values > 0, axis=1)
    safe = np.where(values > 0, values, np.nan)
    if times.size > 1:
        integral = trapezoid(safe**-2.0, times, axis=1)
    else:
        integral = np.zeros(values.shape[0])
    integral = np.where(positive, integral, np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_ratio = np.log(safe[:, -1] / values[:, 0])
        exponent = (alpha - alpha**2) / 2.0
        log_weight = alpha * log_ratio + (exponent * integral if exponent else 0.0)
    log_weight = np.where(positive, log_weight, -np.inf)
    return log_weight, integral, positive


def girsanov_log_weight(path: PathGrid, params: ModelParams) -> PathWeight:
    """
    Girsanov log-weight of a scalar Brownian path.

    The integral is a trapezoid rule on the path's grid and positivity is
    checked at grid points only.

    Raises:
        DomainError: If the path is not scalar or starts at a value <= 0
    """
    if not path.is_scalar:
        raise DomainError("Girsanov weights are defined on scalar paths")
    log_weight, integral, positive = girsanov_log_weights(
        path.times, path.values[None, :], params
    )
    near = bool(np.min(path.values) < NEAR_SINGULAR_FRACTION * path.values[0])
    return PathWeight(
        log_weight=float(log_weight[0]),
        positive_throughout=bool(positive[0]),
        integral_term=float(integral[0]),
        near_singular=near,
    )


def _weighted_batch(
    stream: RngStream,
    size: int,
    f: PathFunctional,
    x0: float,
    T: float,
    params: ModelParams,
    step: float,
) -> np.ndarray:
    grid = make_grid(T, step)
    paths = sample_bm_paths(x0, grid, size, stream)
    log_weight, _, _ = girsanov_log_weights(grid, paths, params)
    weights = np.exp(log_weight)
    values = np.zeros(size)
    for i in np.flatnonzero(weights > 0):
        values[i] = f(PathGrid(grid, paths[i]))
    near = paths.min(axis=1) < NEAR_SINGULAR_FRACTION * x0
    return np.stack([weights, weights * values, near], axis=1)


def is_bessel_expectation(
    f: PathFunctional,
    x0: float,
    T: float,
    d: int,
    grid_step: float,
    n: int,
    rng: RngStream,
    workers: int = 1,
) -> TailEstimate:
    """
    Importance-sampling estimate of the Bessel(d) expectation of f from x0,
    using weighted one-dimensional Brownian paths.

    Paths dipping below 1% of x0 are kept but counted in the metadata; an
    effective sample size below 10 sets the 'degenerate' flag.

    Raises:
        DomainError: If x0 <= 0
    """
    if not x0 > 0:
        raise DomainError(f"importance sampling needs x0 > 0, got {x0}")
    params = ModelParams(d)
    task = functools.partial(
        _weighted_batch, f=f, x0=x0, T=T, params=params, step=grid_step
    )
    out = run_batches(task, n, rng, workers=workers)
    weights, weighted = out[:, 0], out[:, 1]
    total = weights.sum()
    ess = float(total**2 / np.sum(weights**2)) if total > 0 else 0.0
    degenerate = ess < MIN_EFFECTIVE_SAMPLE_SIZE
    if degenerate:
        logger.warning(f"Importance weights degenerate: ESS={ess:.2f} of n={n}")
    near = int(out[:, 2].sum())
    if near:
        logger.debug(f"{near} of {n} Brownian paths came within 1% of zero")
    return TailEstimate(
        value=float(weighted.mean()),
        stderr=float(weighted.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf,
        n=n,
        seed=rng.seed,
        metadata={
            "ess": ess,
            "degenerate": degenerate,
            "near_singular_paths": near,
            "mean_weight": float(weights.mean()),
        },
    )


def _direct_batch(
    stream: RngStream, size: int, f: PathFunctional, x0: float, T: float, d: int, step: float
) -> np.ndarray:
    grid = make_grid(T, step)
    paths = sample_bessel_paths(d, x0, grid, size, stream)
    return np.array([f(PathGrid(grid, path)) for path in paths], dtype=float)


def direct_bessel_expectation(
    f: PathFunctional,
    x0: float,
    T: float,
    d: int,
    grid_step: float,
    n: int,
    rng: RngStream,
    workers: int = 1,
) -> TailEstimate:
    """Plain Monte Carlo estimate of the Bessel(d) expectation of f, by embedding."""
    task = functools.partial(_direct_batch, f=f, x0=x0, T=T, d=d, step=grid_step)
    values = run_batches(task, n, rng, workers=workers)
    return TailEstimate(
        value=float(values.mean()),
        stderr=float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf,
        n=n,
        seed=rng.seed,
    )
