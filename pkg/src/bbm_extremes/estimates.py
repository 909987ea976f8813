"""
Monte Carlo estimates and their uncertainty.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class TailEstimate:
    """
    A Monte Carlo point estimate with its standard error and provenance.

    Attributes:
        value: Point estimate (a probability, a moment, or a weighted mean)
        stderr: Standard error of the estimate
        n: Number of replicates behind it
        config_digest: Digest of the configuration that produced it
        seed: Root seed of the replicate streams
        metadata: Free-form diagnostics (ESS, censoring, quality flags)
    """

    value: float
    stderr: float
    n: int
    config_digest: str = ""
    seed: Optional[int] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        """Return the symmetric interval value +/- k stderr."""
        return self.value - k * self.stderr, self.value + k * self.stderr

    def agrees_with(self, other: "TailEstimate | float", k: float = 3.0) -> bool:
        """Check agreement with another estimate or an exact value within k combined stderr."""
        if isinstance(other, TailEstimate):
            return abs(self.value - other.value) <= k * combined_stderr(self, other)
        return abs(self.value - float(other)) <= k * self.stderr

    def with_provenance(self, config_digest: str, seed: Optional[int]) -> "TailEstimate":
        return replace(self, config_digest=config_digest, seed=seed)


def combined_stderr(a: TailEstimate, b: TailEstimate) -> float:
    """Standard error of the difference of two independent estimates."""
    return math.hypot(a.stderr, b.stderr)


def binomial_estimate(successes: int, n: int, **kwargs) -> TailEstimate:
    """
    Estimate a probability from a success count.

    The standard error is sqrt(p(1-p)/n).

    Raises:
        ValueError: If n < 1 or successes is outside [0, n]
    """
    if n < 1:
        raise ValueError(f"binomial estimate needs n >= 1, got {n}")
    if not 0 <= successes <= n:
        raise ValueError(f"successes={successes} outside [0, {n}]")
    p = successes / n
    metadata = dict(kwargs.pop("metadata", {}) or {})
    metadata.setdefault("successes", int(successes))
    return TailEstimate(
        value=p, stderr=math.sqrt(p * (1.0 - p) / n), n=n, metadata=metadata, **kwargs
    )


def mean_estimate(samples, **kwargs) -> TailEstimate:
    """Estimate a mean with the sample standard error."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 1:
        raise ValueError("mean estimate needs at least one sample")
    stderr = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return TailEstimate(value=float(samples.mean()), stderr=stderr, n=n, **kwargs)


def batch_means_stderr(samples, n_batches: int = 20) -> float:
    """
    Standard error of the mean from the spread of batch means.

    Trailing samples that do not fill a batch are dropped.
    """
    samples = np.asarray(samples, dtype=float)
    size = samples.size // n_batches
    if size < 1 or n_batches < 2:
        raise ValueError(
            f"need at least {n_batches} samples and 2 batches, got {samples.size}"
        )
    means = samples[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def clopper_pearson(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    alpha = 1.0 - level
    lower = 0.0 if successes == 0 else stats.beta.ppf(alpha / 2, successes, n - successes + 1)
    upper = 1.0 if successes == n else stats.beta.ppf(1 - alpha / 2, successes + 1, n - successes)
    return float(lower), float(upper)
