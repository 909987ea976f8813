"""
Tests for Monte Carlo estimates.
"""
import math

import numpy as np
import pytest

from bbm_extremes.estimates import (
    TailEstimate,
    batch_means_stderr,
    binomial_estimate,
    clopper_pearson,
    combined_stderr,
    mean_estimate,
)


def test_binomial_estimate():
    """Test the point value and binomial standard error."""
    est = binomial_estimate(25, 100)
    assert est.value == 0.25
    assert est.stderr == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
    assert est.metadata["successes"] == 25


@pytest.mark.parametrize("successes,n", [(1, 0), (-1, 10), (11, 10)])
def test_binomial_estimate_rejects_bad_counts(successes, n):
    """Test that impossible counts are rejected."""
    with pytest.raises(ValueError):
        binomial_estimate(successes, n)


def test_agreement():
    """Test agreement within combined standard errors."""
    a = TailEstimate(value=1.0, stderr=0.1, n=100)
    b = TailEstimate(value=1.5, stderr=0.1, n=100)
    assert combined_stderr(a, b) == pytest.approx(math.sqrt(0.02))
    assert a.agrees_with(b, k=4)
    assert not a.agrees_with(b, k=3)
    assert a.agrees_with(1.25, k=3)
    assert a.interval(2) == pytest.approx((0.8, 1.2))


def test_provenance():
    """Test that provenance is attached without mutating the original."""
    est = TailEstimate(value=0.5, stderr=0.01, n=10)
    tagged = est.with_provenance("abc", 7)
    assert tagged.config_digest == "abc" and tagged.seed == 7
    assert est.config_digest == ""


def test_mean_estimate():
    """Test the sample mean and its standard error."""
    est = mean_estimate([1.0, 2.0, 3.0, 4.0])
    assert est.value == 2.5
    assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert mean_estimate([3.0]).stderr == math.inf


def test_batch_means_stderr():
    """Test that constant batches have zero spread and short samples are rejected."""
    assert batch_means_stderr(np.ones(100), n_batches=10) == 0.0
    with pytest.raises(ValueError):
        batch_means_stderr(np.ones(5), n_batches=10)


def test_clopper_pearson():
    """Test the exact binomial interval at the edges."""
    lower, upper = clopper_pearson(0, 100)
    assert lower == 0.0
    # 1 - 0.025^(1/n)
    assert upper == pytest.approx(1 - 0.025 ** 0.01)
    lower, upper = clopper_pearson(100, 100)
    assert upper == 1.0 and lower > 0.95
    lower, upper = clopper_pearson(50, 100)
    assert lower < 0.5 < upper
