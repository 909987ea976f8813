"""
Statistics of simulated extremes.

Tail and CDF estimates are always computed from one shared set of samples, so
nested events give monotone estimates on every run, not just on average.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .branching_sim import (
    CoupledRun,
    PruneRule,
    estimate_max_samples,
    simulate_coupled,
)
from .core_model import (
    DEFAULT_WINDOW_INNER,
    DEFAULT_WINDOW_OUTER,
    SQRT2,
    ModelParams,
    ZVariant,
    centering,
    log_tail_normalizer,
    mallein_shape,
    saturating_exp,
)
from .estimates import TailEstimate, batch_means_stderr, binomial_estimate, clopper_pearson
from .exceptions import DomainError
from .parallel import run_replicates
from .stochastic_kernels import RngLike, RngStream, as_generator

logger = logging.getLogger(__name__)

BRAMSON_LOG_COEFF = 3.0 / (2.0 * SQRT2)
MIN_RATE_POINTS = 4
TAIL_BATCHES = 100
MIN_BATCH_SIZE = 10


@dataclass(frozen=True)
class TailRatio:
    """
    A tail estimate divided by a reference shape.

    When the empirical tail is zero the point value is 0 and the upper end of
    the interval comes from the Clopper-Pearson bound.
    """

    y: float
    value: float
    lower: float
    upper: float
    censored: bool = False


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log tail values against y."""

    slope: float
    intercept: float
    residual_rms: float
    y_grid: tuple
    stderr: float = 0.0
    prefactor_removed: bool = True


@dataclass(frozen=True)
class GumbelFit:
    loc: float
    scale: float


@dataclass(frozen=True)
class BramsonCell:
    ell: float
    w: float
    estimate: TailEstimate
    shape: float
    censored: bool
    median: float = math.nan
    integral_bound: float = math.nan

    @property
    def ratio(self) -> float:
        return self.estimate.value / self.shape


@dataclass(frozen=True)
class BramsonReport:
    """Empirical tails against the bound shape, with the smallest covering constant."""

    cells: List[BramsonCell]
    fitted_C: float
    C_max: float
    median_offsets: Dict[float, TailEstimate] = field(default_factory=dict)

    @property
    def covered(self) -> bool:
        return self.fitted_C <= self.C_max

    @property
    def monotone(self) -> bool:
        """Empirical tails are nonincreasing in w at every ell."""
        for ell in sorted({cell.ell for cell in self.cells}):
            values = [c.estimate.value for c in sorted(self.cells, key=lambda c: c.w) if c.ell == ell]
            if any(b > a for a, b in zip(values, values[1:])):
                return False
        return True


@dataclass(frozen=True)
class CouplingReport:
    """Per-realization discrepancies of the shared-noise coupling."""

    runs: List[CoupledRun] = field(repr=False)
    bound: float
    tolerance: float

    @property
    def on_good_event(self) -> int:
        return sum(run.good_event for run in self.runs)

    @property
    def violations(self) -> int:
        """Realizations on the good event whose discrepancy exceeds bound + tolerance."""
        return sum(
            run.good_event and run.max_discrepancy > self.bound + self.tolerance
            for run in self.runs
        )

    @property
    def worst_ratio(self) -> float:
        good = [run.max_discrepancy / self.bound for run in self.runs if run.good_event]
        return max(good) if good else 0.0


def _shared_samples(samples) -> np.ndarray:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise DomainError("need at least one sample")
    return samples


def estimate_centered_max_cdf(centered_samples, y_grid: Sequence[float]) -> List[TailEstimate]:
    """Empirical P(X <= y) for each y, X being the centered maximum R_t* - m_t."""
    samples = _shared_samples(centered_samples)
    n = samples.size
    return [
        binomial_estimate(int(np.count_nonzero(samples <= y)), n, metadata={"y": float(y)})
        for y in y_grid
    ]


def estimate_tail(samples, y_grid: Sequence[float]) -> List[TailEstimate]:
    """
    Empirical P(X >= y) for each y, from one shared sample.

    With at least MIN_BATCH_SIZE * TAIL_BATCHES samples, metadata["batch_stderr"]
    holds the batch-means standard error of the indicator, a check on the
    binomial one.
    """
    samples = _shared_samples(samples)
    n = samples.size
    out = []
    for y in y_grid:
        hits = samples >= y
        metadata = {"y": float(y)}
        if n >= MIN_BATCH_SIZE * TAIL_BATCHES:
            metadata["batch_stderr"] = batch_means_stderr(hits, n_batches=TAIL_BATCHES)
        out.append(binomial_estimate(int(np.count_nonzero(hits)), n, metadata=metadata))
    return out


def _ratio(estimate: TailEstimate, y: float, reference: float, k: float = 3.0) -> TailRatio:
    if reference <= 0 or not math.isfinite(reference):
        raise DomainError(f"reference value at y={y} must be positive and finite, got {reference}")
    if estimate.value > 0:
        lo, hi = estimate.interval(k)
        return TailRatio(y, estimate.value / reference, max(lo, 0.0) / reference, hi / reference)
    successes = int(estimate.metadata.get("successes", 0))
    _, upper = clopper_pearson(successes, estimate.n)
    logger.warning(f"Empirical tail is zero at y={y}; reporting a censored interval")
    return TailRatio(y, 0.0, 0.0, upper / reference, censored=True)


def mallein_ratio(
    tail: Sequence[TailEstimate], y_grid: Sequence[float], t: float
) -> List[TailRatio]:
    """
    Ratios P(R_t* >= m_t + y) / (y e^(-sqrt(2) y)).

    Raises:
        DomainError: If some y lies outside [1, sqrt(t)] or the lengths differ
    """
    if len(tail) != len(y_grid):
        raise DomainError(f"{len(tail)} estimates for {len(y_grid)} grid points")
    top = math.sqrt(t)
    for y in y_grid:
        if not 1.0 <= y <= top:
            raise DomainError(f"y={y} outside the admissible range [1, sqrt(t)] = [1, {top:.6g}]")
    return [_ratio(est, float(y), mallein_shape(float(y))) for est, y in zip(tail, y_grid)]


def mallein_band(ratios: Sequence[TailRatio]) -> float:
    """Width factor max/min of the positive ratios (inf if fewer than one positive)."""
    positive = [r.value for r in ratios if r.value > 0]
    if not positive:
        return math.inf
    return max(positive) / min(positive)


def fit_tail_rate(
    tail: Sequence[TailEstimate], y_grid: Sequence[float], remove_prefactor: bool = True
) -> RateFit:
    """
    Ordinary least squares of log P (or log(P/y)) against y over the
    points with positive estimates. The theory predicts slope -sqrt(2).

    Raises:
        DomainError: If fewer than four points have positive estimates or
            those points share a single y
    """
    y = np.asarray(y_grid, dtype=float)
    values = np.array([est.value for est in tail], dtype=float)
    if y.shape != values.shape:
        raise DomainError(f"{values.size} estimates for {y.size} values of y")
    keep = values > 0
    if remove_prefactor:
        keep &= y > 0
    if int(keep.sum()) < MIN_RATE_POINTS:
        raise DomainError(
            f"tail-rate fit needs at least {MIN_RATE_POINTS} positive points, got {int(keep.sum())}"
        )
    y, values = y[keep], values[keep]
    if np.ptp(y) == 0:
        raise DomainError(f"tail-rate fit needs distinct y values, got y={y[0]} throughout")
    response = np.log(values / y) if remove_prefactor else np.log(values)
    fit = stats.linregress(y, response)
    residuals = response - (fit.intercept + fit.slope * y)
    return RateFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
        y_grid=tuple(float(v) for v in y),
        stderr=float(fit.stderr),
        prefactor_removed=remove_prefactor,
    )


def sample_tail_law(n: int, rng: RngLike) -> np.ndarray:
    """
    Draw from the law with P(X > y) = y e^(-sqrt(2) y) for y >= 1/sqrt(2),
    the remaining mass sitting at 0.
    """
    gen = as_generator(rng)
    u = gen.random(n)
    y0 = 1.0 / SQRT2
    top = mallein_shape(y0)
    out = np.zeros(n)
    tail = u < top
    # y e^(-sqrt(2) y) = u on the decreasing branch
    out[tail] = -np.real(special.lambertw(-SQRT2 * u[tail], k=-1)) / SQRT2
    return out


def _log_normalizer(L: float, z: float, y: float, params: ModelParams, variant: ZVariant) -> float:
    log_value = log_tail_normalizer(L, z, y, params)
    if ZVariant(variant) is ZVariant.SQRT2L_POWER:
        log_value += params.alpha * (math.log(SQRT2 * L - z) - math.log(SQRT2 * L))
    return log_value


def right_tail_normalized(
    L: float,
    z_grid: Sequence[float],
    y: float,
    t: float,
    estimates: Sequence[TailEstimate],
    params: ModelParams,
    variant: ZVariant = ZVariant.RADIAL_POWER,
    inner: float = DEFAULT_WINDOW_INNER,
    outer: float = DEFAULT_WINDOW_OUTER,
) -> List[TailRatio]:
    """
    Normalized right tails P_hat / M_{L,z}, one per z.

    The values should collapse to a common constant across z. The
    sqrt2L-power variant replaces (sqrt(2)L - z)^(-alpha) by (sqrt(2)L)^(-alpha)
    in the normalizer. The y field of each ratio holds z.

    Raises:
        DomainError: If t <= L, lengths differ or some z lies outside [L^inner, L^outer]
    """
    if not t > L:
        raise DomainError(f"need t > L, got t={t}, L={L}")
    if len(estimates) != len(z_grid):
        raise DomainError(f"{len(estimates)} estimates for {len(z_grid)} values of z")
    lo, hi = L**inner, L**outer
    out = []
    for z, est in zip(z_grid, estimates):
        if not lo - 1e-12 <= z <= hi + 1e-12:
            raise DomainError(f"z={z} outside [L^{inner:g}, L^{outer:g}] = [{lo:.6g}, {hi:.6g}]")
        log_norm = _log_normalizer(L, float(z), y, params, variant)
        norm, saturated = saturating_exp(log_norm)
        if saturated:
            raise DomainError(f"tail normalizer saturates at z={z} (log value {log_norm:.4g})")
        out.append(_ratio(est, float(z), norm))
    return out


def estimate_right_tail(
    L: float,
    z_grid: Sequence[float],
    y_grid: Sequence[float],
    t: float,
    n: int,
    params: ModelParams,
    rng: RngStream,
    pruning: Optional[PruneRule] = None,
    grid_step: float = 0.05,
    workers: int = 1,
) -> List[List[TailEstimate]]:
    """
    P(R*_{t-L} > m_t + y) for the process started at sqrt(2)L - z.

    Every z uses the same replicate streams; all y share the samples of a z.
    Returns one list of per-y estimates for each z.
    """
    threshold = centering(params, t)
    out = []
    for z in z_grid:
        start = SQRT2 * L - z
        if not start > 0:
            raise DomainError(f"window start sqrt(2)L - z must be > 0, got {start}")
        maxima = estimate_max_samples(
            params,
            horizon=t - L,
            n=n,
            rng=rng,
            origin=start,
            pruning=pruning,
            grid_step=grid_step,
            workers=workers,
        )[:, -1]
        out.append(
            [
                binomial_estimate(
                    int(np.count_nonzero(maxima > threshold + y)),
                    n,
                    seed=rng.seed,
                    metadata={"z": float(z), "y": float(y)},
                )
                for y in y_grid
            ]
        )
    return out


def coupling_tail_compare(
    x0: float,
    ell: float,
    m_target: float,
    n: int,
    params: ModelParams,
    rng: RngStream,
    workers: int = 1,
) -> tuple[TailEstimate, TailEstimate]:
    """
    Compare P_x0(branching Bessel max at ell > m_target) with
    P(one-dimensional BBM max at ell > m_target - x0).

    The one-dimensional side draws from rng.child(1) and depends on x0 only
    through m_target - x0.
    """
    if not x0 > 0:
        raise DomainError(f"coupling needs x0 > 0, got {x0}")
    if x0 < 50:
        logger.warning(f"x0={x0} is small; the drift alpha/R is not negligible")
    bessel = estimate_max_samples(
        params, horizon=ell, n=n, rng=rng.child(0), origin=x0, grid_step=ell, workers=workers
    )[:, -1]
    oned = estimate_max_samples(
        ModelParams(1), horizon=ell, n=n, rng=rng.child(1), grid_step=ell, mode="coordinate", workers=workers
    )[:, -1]
    return (
        binomial_estimate(int(np.count_nonzero(bessel > m_target)), n, seed=rng.seed),
        binomial_estimate(int(np.count_nonzero(oned > m_target - x0)), n, seed=rng.seed),
    )


def _coupled_task(stream: RngStream, params: ModelParams, x0: float, ell: float, grid_step: float) -> CoupledRun:
    return simulate_coupled(params, x0, ell, stream, grid_step=grid_step)


def coupling_discrepancy_check(
    params: ModelParams,
    x0: float,
    ell: float,
    n: int,
    rng: RngStream,
    grid_step: float = 1e-3,
    workers: int = 1,
) -> CouplingReport:
    """
    Simulate n coupled realizations and compare each maximal discrepancy with
    4 alpha ell / x0, the drift bound on the event that all radial tracks stay
    above x0/4. The tolerance is one grid step of drift.
    """
    task = functools.partial(_coupled_task, params=params, x0=x0, ell=ell, grid_step=grid_step)
    runs = run_replicates(task, n, rng, workers=workers)
    bound = 4.0 * params.alpha * ell / x0
    tolerance = 4.0 * params.alpha * grid_step / x0
    report = CouplingReport(runs=runs, bound=bound, tolerance=tolerance)
    logger.info(
        f"Coupling x0={x0}, ell={ell}: {report.on_good_event}/{n} on the good event, "
        f"{report.violations} violations, worst ratio {report.worst_ratio:.3g}"
    )
    return report


def bramson_shape(ell: float, w: float) -> float:
    """ell^(-3/2) (w + (3/(2 sqrt 2)) log ell) e^(-w sqrt 2) e^(-w^2/(2 ell))."""
    return (
        ell**-1.5
        * (w + BRAMSON_LOG_COEFF * math.log(ell))
        * math.exp(-w * SQRT2 - w * w / (2 * ell))
    )


def bramson_tail_bound_check(
    ell_grid: Sequence[float],
    w_grid: Sequence[float],
    n: int,
    rng: RngStream,
    K: float = 1.0,
    C_max: float = 50.0,
    workers: int = 1,
    min_ell: float = 8.0,
) -> BramsonReport:
    """
    Empirical P(W*_ell > sqrt(2) ell + w) for one-dimensional BBM against the
    bound shape, and the smallest C covering every uncensored cell.

    All w at one ell share the same realizations. Each cell also carries the
    empirical median of W*_ell and the integral bound with C=1 at that median
    (NaN when sqrt(2) ell + w < median + 1); the report keeps the median
    offsets from m_ell(1) per ell.

    Raises:
        DomainError: If some ell < min_ell or w < K + 1 - (3/(2 sqrt 2)) log ell
    """
    cells = []
    medians = {}
    oned = ModelParams(1)
    for index, ell in enumerate(ell_grid):
        if ell < min_ell:
            raise DomainError(f"ell={ell} is below {min_ell}, outside the bound's regime")
        w_min = K + 1 - BRAMSON_LOG_COEFF * math.log(ell)
        for w in w_grid:
            if w < w_min:
                raise DomainError(f"w={w} below K + 1 - (3/(2 sqrt 2)) log ell = {w_min:.6g}")
        maxima = estimate_max_samples(
            oned, horizon=ell, n=n, rng=rng.child(index), grid_step=ell, mode="coordinate", workers=workers
        )[:, -1]
        medians[float(ell)] = median_offset_1d(ell, n, rng.child(index), maxima=maxima)
        m_bar = float(np.median(maxima))
        for w in w_grid:
            x = SQRT2 * ell + w
            hits = int(np.count_nonzero(maxima > x))
            estimate = binomial_estimate(hits, n, seed=rng.seed, metadata={"ell": ell, "w": w})
            bound = bramson_integral_bound(ell, x, m_bar) if x >= m_bar + 1 else math.nan
            cells.append(
                BramsonCell(float(ell), float(w), estimate, bramson_shape(ell, w), hits == 0, m_bar, bound)
            )
    uncensored = [cell.ratio for cell in cells if not cell.censored]
    fitted = max(uncensored) if uncensored else 0.0
    logger.info(f"Bramson bound: fitted C={fitted:.4g} over {len(uncensored)} uncensored cells")
    return BramsonReport(cells=cells, fitted_C=fitted, C_max=C_max, median_offsets=medians)


def bramson_integral_bound(t: float, x: float, m_bar: float, C: float = 1.0) -> float:
    """
    The integral bound
    C e^t / sqrt(t) * int_{-1}^{0} e^(-(x-y)^2/(2t)) (1 - e^(-2(y+1)(x-m_bar)/t)) dy,
    evaluated in log-space.

    Raises:
        DomainError: If t <= 0 or x < m_bar + 1
    """
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    if x < m_bar + 1:
        raise DomainError(f"x={x} must be at least m_bar + 1 = {m_bar + 1}")

    def integrand(y: float) -> float:
        return math.exp((2 * x * y - y * y) / (2 * t)) * -math.expm1(-2 * (y + 1) * (x - m_bar) / t)

    value, _ = integrate.quad(integrand, -1.0, 0.0)
    if value <= 0:
        return 0.0
    log_bound = math.log(C) + t - 0.5 * math.log(t) - x * x / (2 * t) + math.log(value)
    return saturating_exp(log_bound)[0]


def gumbel_descriptive_fit(samples) -> GumbelFit:
    """Location and scale of a pure Gumbel fit; descriptive only, the limit is a mixture."""
    samples = _shared_samples(samples)
    if samples.size < 2:
        raise DomainError("a Gumbel fit needs at least two samples")
    loc, scale = stats.gumbel_r.fit(samples)
    return GumbelFit(float(loc), float(scale))


def median_offset_1d(
    t: float,
    n: int,
    rng: RngStream,
    workers: int = 1,
    n_batches: int = 20,
    maxima: Optional[np.ndarray] = None,
) -> TailEstimate:
    """
    Median of W*_t minus m_t(1) for one-dimensional BBM.

    The standard error is the spread of batch medians. Pass maxima to reuse
    samples of W*_t already drawn from rng; n is then ignored.
    """
    oned = ModelParams(1)
    if maxima is None:
        maxima = estimate_max_samples(
            oned, horizon=t, n=n, rng=rng, grid_step=t, mode="coordinate", workers=workers
        )[:, -1]
    maxima = _shared_samples(maxima)
    n = maxima.size
    offset = float(np.median(maxima)) - centering(oned, t)
    size = n // n_batches
    if size >= 1 and n_batches >= 2:
        medians = np.median(maxima[: size * n_batches].reshape(n_batches, size), axis=1)
        stderr = float(medians.std(ddof=1) / math.sqrt(n_batches))
    else:
        stderr = math.inf
    return TailEstimate(value=offset, stderr=stderr, n=n, seed=rng.seed)
