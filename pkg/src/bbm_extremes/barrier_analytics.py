"""
Barrier functions, barrier events and closed-form crossing probabilities.

Barrier events are checked at grid points only, with non-strict inequalities:
a path touching its barrier still satisfies the event.
"""

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .core_model import ModelParams, coord_x, coord_y, speed
from .estimates import TailEstimate, binomial_estimate, combined_stderr
from .exceptions import DomainError, InsufficientConditioningError
from .parallel import run_batches
from .stochastic_kernels import TIME_TOL, PathGrid, RngStream, make_grid, sample_bridges

logger = logging.getLogger(__name__)

BarrierFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BarrierSpec:
    """
    An interval with an upper and/or a lower barrier.

    Barrier functions take an array of times and return an array of levels;
    +inf / -inf levels are allowed.
    """

    s_begin: float
    s_end: float
    upper: Optional[BarrierFn] = None
    lower: Optional[BarrierFn] = None

    def __post_init__(self) -> None:
        if self.s_begin > self.s_end:
            raise DomainError(f"barrier interval [{self.s_begin}, {self.s_end}] is empty")
        if self.upper is None and self.lower is None:
            raise DomainError("a barrier spec needs an upper or a lower barrier")


@dataclass(frozen=True)
class BarrierParams:
    """Constants and coordinates shared by the barriers B, B0 and Q."""

    t: float
    L: float
    C_d: float
    K_d: float
    ell: float = 1.0
    z: Optional[float] = None
    y: float = 0.0

    def __post_init__(self) -> None:
        if not self.C_d > 0 or not self.K_d > 0:
            raise DomainError(f"barrier constants must be > 0, got C_d={self.C_d}, K_d={self.K_d}")
        if not self.L >= 1 or not self.t > self.L:
            raise DomainError(f"barriers need t > L >= 1, got t={self.t}, L={self.L}")
        if not 1 <= self.ell <= self.L ** (1 / 6) + 1e-12:
            raise DomainError(
                f"ell={self.ell} outside [1, L^(1/6)] = [1, {self.L ** (1 / 6):.6g}]"
            )
        if self.z is not None and not (
            self.L ** (1 / 6) - 1e-12 <= self.z <= self.L ** (2 / 3) + 1e-12
        ):
            raise DomainError(
                f"z={self.z} outside [L^(1/6), L^(2/3)] = "
                f"[{self.L ** (1 / 6):.6g}, {self.L ** (2 / 3):.6g}]"
            )

    @classmethod
    def for_model(
        cls,
        params: ModelParams,
        t: float,
        L: float,
        ell: float = 1.0,
        z: Optional[float] = None,
        y: float = 0.0,
        C_d: Optional[float] = None,
        K_d: Optional[float] = None,
    ) -> "BarrierParams":
        """Build barrier parameters, filling unset constants with the defaults for d."""
        default_C, default_K = default_constants(params)
        return cls(
            t=t,
            L=L,
            C_d=default_C if C_d is None else C_d,
            K_d=default_K if K_d is None else K_d,
            ell=ell,
            z=z,
            y=y,
        )

    @property
    def t_tilde(self) -> float:
        """Remaining time t - L after the window time."""
        return self.t - self.L

    @property
    def span(self) -> float:
        """Length t - L - ell of the barrier interval for the shifted process."""
        return self.t - self.L - self.ell

    @property
    def ell1(self) -> float:
        return self.ell**0.25


@dataclass(frozen=True)
class RefinementResult:
    """Grid-refinement sequence of a discretely monitored probability."""

    steps: List[float]
    estimates: List[TailEstimate]
    extrapolated: TailEstimate


def default_constants(params: ModelParams) -> tuple[float, float]:
    """Default (C_d, K_d) satisfying the lower bounds the barrier lemmas require."""
    alpha = params.alpha
    C_d = max(4.0 * params.d, alpha + 2.0, 8.0)
    K_d = math.ceil(
        max((24 * alpha + 21) / (2 * math.sqrt(2)), 8 * (1 + alpha) / math.sqrt(2))
    )
    return C_d, float(K_d)


def log_plus(x):
    """log(max(x, 1)); zero whenever x <= 1."""
    out = np.log(np.maximum(np.asarray(x, dtype=float), 1.0))
    return float(out) if out.ndim == 0 else out


def _as_output(out):
    return float(out) if np.ndim(out) == 0 else out


def _check_span(bp: BarrierParams) -> None:
    if not bp.span > 0:
        raise DomainError(f"barrier interval t - L - ell = {bp.span} must be > 0")


def _check_range(s, lo: float, hi: float, name: str) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < lo - TIME_TOL) or np.any(s > hi + TIME_TOL):
        raise DomainError(f"{name}: s outside [{lo}, {hi}]")
    return s


def linear_barrier(a: float, b: float, T: float, s):
    """
    The line from (0, a) to (T, b) evaluated at s in [0, T].

    Raises:
        DomainError: If T <= 0 or s lies outside [0, T]
    """
    if not T > 0:
        raise DomainError(f"linear barrier needs T > 0, got {T}")
    s = _check_range(s, 0.0, T, "linear_barrier")
    return _as_output(a + (b - a) * s / T)


def constant_barrier(level: float) -> BarrierFn:
    """A barrier function that is constant in time."""
    return functools.partial(_constant, level=float(level))


def _constant(s, level: float) -> np.ndarray:
    return np.full(np.shape(s), level)


def ballot_probability(x: float, y: float, a: float, b: float, T: float) -> float:
    """
    Probability that a Brownian bridge from x to y over [0, T] stays below the
    line from a to b: 1 - exp(-2(a-x)(b-y)/T).

    Raises:
        DomainError: If a < x, b < y or T <= 0
    """
    if not T > 0:
        raise DomainError(f"ballot probability needs T > 0, got {T}")
    if a < x or b < y:
        raise DomainError(
            f"bridge starts or ends above the barrier (x={x}, a={a}, y={y}, b={b})"
        )
    return -math.expm1(-2.0 * (a - x) * (b - y) / T)


def barrier_B(s, params: ModelParams, bp: BarrierParams):
    """
    Upper barrier (m_t/t) s + C_d log_+(min(s, t-s)) + log L on [L, t].

    Raises:
        DomainError: If s lies outside [L, t]
    """
    s = _check_range(s, bp.L, bp.t, "barrier_B")
    out = speed(params, bp.t) * s + bp.C_d * log_plus(np.minimum(s, bp.t - s)) + math.log(bp.L)
    return _as_output(out)


def barrier_B0(s, params: ModelParams, bp: BarrierParams):
    """
    Upper barrier for the shifted process,
    (m_t/t)(s+L) + y + log ell + K_d log_+(min(s, t-L-ell-s)) on [0, t-L-ell].
    """
    _check_span(bp)
    s = _check_range(s, 0.0, bp.span, "barrier_B0")
    out = (
        speed(params, bp.t) * (s + bp.L)
        + bp.y
        + math.log(bp.ell)
        + bp.K_d * log_plus(np.minimum(s, bp.span - s))
    )
    return _as_output(out)


def corridor_upper(s, params: ModelParams, bp: BarrierParams):
    """The linear upper barrier (m_t/t)(s+L) + y of the corridor event."""
    s = np.asarray(s, dtype=float)
    return _as_output(speed(params, bp.t) * (s + bp.L) + bp.y)


def barrier_Q_middle(s, params: ModelParams, bp: BarrierParams):
    """The middle piece of Q, evaluated on the whole interval [0, t-L-ell]."""
    _check_span(bp)
    s = _check_range(s, 0.0, bp.span, "barrier_Q")
    start = coord_x(bp.L, 2 * bp.L ** (2 / 3))
    end = coord_y(params, bp.t, bp.ell, bp.y, 2 * bp.ell ** (2 / 3))
    line = start + (end - start) * s / bp.span
    return _as_output(line - np.maximum(np.minimum(s, bp.span - s), 0.0) ** (2 / 3))


def barrier_Q(s, params: ModelParams, bp: BarrierParams):
    """
    Three-piece lower barrier for the shifted process on [0, t-L-ell].

    Constant sqrt(2)L - 2L^(2/3) on [0, ell1], the bent line in between, and
    the constant y-coordinate of 2 ell^(2/3) on the last stretch of length ell1.
    """
    s = _check_range(s, 0.0, bp.span, "barrier_Q")
    first = coord_x(bp.L, 2 * bp.L ** (2 / 3))
    last = coord_y(params, bp.t, bp.ell, bp.y, 2 * bp.ell ** (2 / 3))
    middle = np.asarray(barrier_Q_middle(s, params, bp))
    out = np.where(
        s <= bp.ell1, first, np.where(s >= bp.span - bp.ell1, last, middle)
    )
    return _as_output(out)


def _levels(fn: Optional[BarrierFn], times: np.ndarray, default: float) -> np.ndarray:
    if fn is None:
        return np.full(times.shape, default)
    return np.broadcast_to(np.asarray(fn(times), dtype=float), times.shape)


def check_barrier_events(times, values, spec: BarrierSpec) -> np.ndarray:
    """
    Evaluate a barrier event on many scalar paths sharing one time grid.

    Args:
        times: Grid times, shape (k,)
        values: Path values, shape (n, k)
        spec: Barrier specification

    Returns:
        Boolean array of shape (n,)
    """
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if times[0] > spec.s_begin + TIME_TOL or times[-1] < spec.s_end - TIME_TOL:
        raise DomainError(
            f"grid [{times[0]}, {times[-1]}] does not cover [{spec.s_begin}, {spec.s_end}]"
        )
    mask = (times >= spec.s_begin - TIME_TOL) & (times <= spec.s_end + TIME_TOL)
    sub_times = times[mask]
    sub = values[:, mask]
    ok = np.all(sub <= _levels(spec.upper, sub_times, np.inf), axis=1)
    ok &= np.all(sub >= _levels(spec.lower, sub_times, -np.inf), axis=1)
    return ok


def check_barrier_event(path: PathGrid, spec: BarrierSpec) -> bool:
    """
    Whether a scalar path stays below spec.upper and above spec.lower at every
    grid point of spec's interval.

    Raises:
        DomainError: If the path is not scalar or does not cover the interval
    """
    if not path.is_scalar:
        raise DomainError("barrier events are defined on scalar paths; use path.radial()")
    return bool(check_barrier_events(path.times, path.values[None, :], spec)[0])


def _ballot_batch(
    stream: RngStream, size: int, x: float, y: float, a: float, b: float, T: float, step: float
) -> np.ndarray:
    grid = make_grid(T, step)
    bridges = sample_bridges(x, y, T, grid, size, stream)
    spec = BarrierSpec(0.0, T, upper=functools.partial(_line, a=a, b=b, T=T))
    return check_barrier_events(grid, bridges, spec)


def _line(s, a: float, b: float, T: float) -> np.ndarray:
    return a + (b - a) * np.asarray(s) / T


def mc_ballot_probability(
    x: float,
    y: float,
    a: float,
    b: float,
    T: float,
    n: int,
    grid_step: float,
    rng: RngStream,
    workers: int = 1,
) -> TailEstimate:
    """Bridge Monte Carlo estimate of the ballot event on a grid of step grid_step."""
    task = functools.partial(_ballot_batch, x=x, y=y, a=a, b=b, T=T, step=grid_step)
    hits = run_batches(task, n, rng, workers=workers)
    return binomial_estimate(
        int(hits.sum()), n, seed=rng.seed, metadata={"grid_step": grid_step}
    )


def ballot_refinement(
    x: float,
    y: float,
    a: float,
    b: float,
    T: float,
    n: int,
    grid_step: float,
    rng: RngStream,
    halvings: int = 2,
    workers: int = 1,
) -> RefinementResult:
    """
    Estimate the ballot event at grid_step and successive halvings, then
    extrapolate to step 0.

    Discrete monitoring misses crossings between grid points, so estimates
    decrease under refinement. The bias scales like sqrt(step), and the
    extrapolation combines the two finest levels accordingly.
    """
    steps = [grid_step / 2**k for k in range(halvings + 1)]
    estimates = [
        mc_ballot_probability(x, y, a, b, T, n, h, rng.child(k), workers=workers)
        for k, h in enumerate(steps)
    ]
    coarse, fine = estimates[-2], estimates[-1]
    r = math.sqrt(2.0)
    value = (r * fine.value - coarse.value) / (r - 1)
    stderr = math.hypot(r * fine.stderr, coarse.stderr) / (r - 1)
    extrapolated = TailEstimate(
        value=value, stderr=stderr, n=n, seed=rng.seed, metadata={"steps": steps}
    )
    logger.debug(
        f"ballot refinement {[round(e.value, 5) for e in estimates]} -> {value:.5f}"
    )
    return RefinementResult(steps=steps, estimates=estimates, extrapolated=extrapolated)


def _conditional_batch(
    stream: RngStream,
    size: int,
    x: float,
    y: float,
    T: float,
    step: float,
    lower: Optional[BarrierFn],
    upper: Optional[BarrierFn],
) -> np.ndarray:
    grid = make_grid(T, step)
    bridges = sample_bridges(x, y, T, grid, size, stream)
    accepted = np.ones(size, dtype=bool)
    if upper is not None:
        accepted = check_barrier_events(grid, bridges, BarrierSpec(0.0, T, upper=upper))
    success = np.ones(size, dtype=bool)
    if lower is not None:
        success = check_barrier_events(grid, bridges, BarrierSpec(0.0, T, lower=lower))
    return np.stack([accepted, accepted & success], axis=1)


def mc_conditional_barrier(
    x: float,
    y: float,
    T: float,
    lower: Optional[BarrierFn],
    upper: Optional[BarrierFn],
    n: int,
    grid_step: float,
    rng: RngStream,
    workers: int = 1,
) -> TailEstimate:
    """
    Estimate P(path stays above lower | path stays below upper) for a Brownian
    bridge from x to y over [0, T].

    A missing barrier is read as -inf (lower) or +inf (upper). The standard
    error is binomial in the number of accepted bridges.

    Raises:
        InsufficientConditioningError: If no bridge satisfies the upper event
    """
    task = functools.partial(
        _conditional_batch, x=x, y=y, T=T, step=grid_step, lower=lower, upper=upper
    )
    flags = run_batches(task, n, rng, workers=workers)
    accepted = int(flags[:, 0].sum())
    if accepted == 0:
        raise InsufficientConditioningError(
            f"no bridge out of {n} satisfied the conditioning barrier"
        )
    return binomial_estimate(
        int(flags[:, 1].sum()),
        accepted,
        seed=rng.seed,
        metadata={"proposed": n, "grid_step": grid_step},
    )


def monotonicity_gap(higher: TailEstimate, lower: TailEstimate) -> float:
    """(higher - lower) in units of combined stderr; >= -3 passes the monotonicity gate."""
    se = combined_stderr(higher, lower)
    if se == 0:
        return math.inf if higher.value >= lower.value else -math.inf
    return (higher.value - lower.value) / se
