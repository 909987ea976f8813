"""
Tests for the Bessel-to-Brownian change of measure.
"""
import math

import numpy as np
import pytest
from scipy.stats import norm

from bbm_extremes.core_model import ModelParams
from bbm_extremes.exceptions import DomainError
from bbm_extremes.girsanov import (
    direct_bessel_expectation,
    girsanov_log_weight,
    girsanov_log_weights,
    is_bessel_expectation,
)
from bbm_extremes.stochastic_kernels import PathGrid, make_grid, sample_bm_paths


def _one(path):
    return 1.0


def _end(path):
    return float(path.values[-1])


def test_weight_of_constant_path():
    """Test the log-weight formula on a path with a known integral."""
    path = PathGrid([0.0, 0.5, 1.0], [2.0, 2.0, 2.0])
    weight = girsanov_log_weight(path, ModelParams(2))
    assert weight.integral_term == pytest.approx(0.25)
    assert weight.log_weight == pytest.approx(0.125 * 0.25)
    assert weight.positive_throughout
    assert not weight.near_singular


def test_weight_in_dimension_three_is_the_end_ratio():
    """Test that the integral term vanishes when alpha = 1."""
    path = PathGrid([0.0, 1.0], [2.0, 5.0])
    assert girsanov_log_weight(path, ModelParams(3)).log_weight == pytest.approx(math.log(2.5))


def test_weight_of_path_hitting_zero():
    """Test that paths leaving the half-line get weight zero."""
    path = PathGrid([0.0, 0.5, 1.0], [1.0, -0.1, 1.0])
    weight = girsanov_log_weight(path, ModelParams(3))
    assert weight.log_weight == -math.inf
    assert not weight.positive_throughout
    assert weight.near_singular


def test_weights_need_positive_start():
    """Test that W_0 <= 0 is rejected."""
    with pytest.raises(DomainError):
        girsanov_log_weights([0.0, 1.0], [[0.0, 1.0]], ModelParams(2))
    with pytest.raises(DomainError):
        girsanov_log_weight(PathGrid([0.0, 1.0], [[1.0, 1.0], [1.0, 1.0]]), ModelParams(2))


def test_batch_weights_match_single():
    """Test that batch and single-path weights agree."""
    times = np.array([0.0, 0.5, 1.0])
    values = np.array([[1.0, 1.5, 2.0], [3.0, 2.0, 1.0]])
    log_weight, integral, positive = girsanov_log_weights(times, values, ModelParams(5))
    for i in range(2):
        single = girsanov_log_weight(PathGrid(times, values[i]), ModelParams(5))
        assert log_weight[i] == pytest.approx(single.log_weight)
        assert integral[i] == pytest.approx(single.integral_term)
    assert positive.all()


@pytest.mark.parametrize("d", [2, 3, 5])
def test_weights_are_normalized(d, rng):
    """Test that importance weights have mean one."""
    est = is_bessel_expectation(_one, 3.0, 1.0, d, 0.01, 4000, rng.child(d))
    assert est.agrees_with(1.0, k=4)
    assert est.metadata["ess"] > 100
    assert not est.metadata["degenerate"]


@pytest.mark.slow
def test_weighted_and_direct_expectations_agree(rng):
    """Test the change of measure on the terminal value of a Bessel(3) path."""
    weighted = is_bessel_expectation(_end, 2.0, 1.0, 3, 0.01, 6000, rng.child("is"))
    direct = direct_bessel_expectation(_end, 2.0, 1.0, 3, 0.01, 6000, rng.child("direct"))
    assert weighted.agrees_with(direct, k=4)


def test_importance_sampling_needs_positive_start(rng):
    """Test that x0 <= 0 is rejected."""
    with pytest.raises(DomainError):
        is_bessel_expectation(_one, 0.0, 1.0, 3, 0.1, 10, rng)


def test_weights_in_dimension_one_are_indicators(rng):
    """Test that with alpha = 0 a weight only records whether the path stayed positive."""
    grid = make_grid(1.0, 0.01)
    paths = sample_bm_paths(0.5, grid, 500, rng)
    log_weight, _, positive = girsanov_log_weights(grid, paths, ModelParams(1))
    assert set(np.unique(log_weight)) <= {0.0, -math.inf}
    assert np.array_equal(log_weight == 0.0, positive)
    assert positive.any() and not positive.all()


@pytest.mark.parametrize("d,sign", [(2, 1), (3, 0), (5, -1)])
def test_integral_term_sign(d, sign, rng):
    """Test the sign of the correction beyond the end-point ratio on positive paths."""
    params = ModelParams(d)
    grid = make_grid(1.0, 0.01)
    paths = sample_bm_paths(3.0, grid, 200, rng.child(d))
    log_weight, _, positive = girsanov_log_weights(grid, paths, params)
    assert positive.sum() > 100
    extra = log_weight[positive] - params.alpha * np.log(paths[positive, -1] / paths[positive, 0])
    if sign == 0:
        assert np.allclose(extra, 0.0, atol=1e-12)
    else:
        assert np.all(sign * extra > 0)


def test_staying_positive_in_dimension_one(rng):
    """Test the weighted estimate against the probability that BM from 1 avoids 0 up to time 1."""
    exact = 2 * norm.cdf(1.0) - 1
    est = is_bessel_expectation(_one, 1.0, 1.0, 1, 0.001, 4000, rng)
    # a grid only sees crossings at its points, so the estimate is biased upward
    assert est.value - exact < 4 * est.stderr + 0.02
    assert exact - est.value < 4 * est.stderr


def test_integral_term_converges_with_the_grid():
    """Test the second-order convergence of the trapezoid integral of W^-2."""
    errors = []
    for step in (0.1, 0.05, 0.025):
        grid = make_grid(1.0, step)
        weight = girsanov_log_weight(PathGrid(grid, 1.0 + grid), ModelParams(2))
        errors.append(abs(weight.integral_term - 0.5))
    assert errors[0] / errors[1] > 3
    assert errors[1] / errors[2] > 3
