"""
Tests for the closed-form model quantities.
"""
import math
import warnings

import numpy as np
import pytest

from bbm_extremes.core_model import (
    SQRT2,
    ModelParams,
    ZVariant,
    centering,
    coord_x,
    coord_y,
    in_window,
    log_tail_normalizer,
    log_z_terms,
    mallein_shape,
    offset_o_t,
    saturating_exp,
    speed,
    tail_normalizer,
    window,
    z_terms,
)
from bbm_extremes.exceptions import DomainError, SmallTimeWarning


@pytest.mark.parametrize("d,alpha,c_d", [
    (1, 0.0, -3 / (2 * SQRT2)),
    (2, 0.5, -1 / SQRT2),
    (4, 1.5, 0.0),
    (5, 2.0, 1 / (2 * SQRT2)),
])
def test_model_constants(d, alpha, c_d):
    """Test that alpha and c_d follow the dimension."""
    params = ModelParams(d)
    assert params.alpha == pytest.approx(alpha)
    assert params.c_d == pytest.approx(c_d)


@pytest.mark.parametrize("d", [0, -1, 2.5, True])
def test_invalid_dimension(d):
    """Test that non-integer or non-positive dimensions are rejected."""
    with pytest.raises(DomainError):
        ModelParams(d)


def test_branching_rate_is_fixed():
    """Test that a branching rate other than 1 is rejected."""
    with pytest.raises(DomainError):
        ModelParams(2, branching_rate=2.0)


def test_centering_values():
    """Test m_t against the closed form in several dimensions."""
    assert centering(ModelParams(4), 10.0) == pytest.approx(SQRT2 * 10)
    assert centering(ModelParams(2), math.e) == pytest.approx(SQRT2 * math.e - 1 / SQRT2)
    t = 50.0
    assert centering(ModelParams(1), t) == pytest.approx(SQRT2 * t - 1.5 / SQRT2 * math.log(t))


def test_centering_small_time_warns():
    """Test that t <= 1 is accepted with a warning and t <= 0 is rejected."""
    with pytest.warns(SmallTimeWarning):
        assert centering(ModelParams(2), 1.0) == pytest.approx(SQRT2)
    with pytest.raises(DomainError):
        centering(ModelParams(2), 0.0)


def test_centering_no_warning_above_one():
    """Test that regular times do not warn."""
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        centering(ModelParams(3), 2.0)


def test_offset_and_speed():
    """Test the relative offset and slope of the linear barriers."""
    params = ModelParams(2)
    t = 100.0
    assert offset_o_t(params, t) == pytest.approx(centering(params, t) / t - SQRT2)
    assert speed(params, t) == pytest.approx(centering(params, t) / t)
    assert offset_o_t(ModelParams(4), t) == 0.0


def test_coordinates():
    """Test the radial coordinates x(a) and y(b)."""
    params = ModelParams(3)
    assert coord_x(9.0, 2.0) == pytest.approx(9 * SQRT2 - 2)
    t, ell = 20.0, 1.0
    assert coord_y(params, t, ell, 1.0, 0.5) == pytest.approx(
        centering(params, t) / t * (t - ell) + 0.5
    )


def test_tail_normalizer_matches_log():
    """Test that the normalizer equals exp of its log form."""
    params = ModelParams(3)
    L, z, y = 64.0, 4.0, 1.0
    result = tail_normalizer(L, z, y, params)
    expected = (SQRT2 * L - z) ** (-1.0) * z * math.exp(-(z + y) * SQRT2)
    assert result.value == pytest.approx(expected)
    assert result.log_value == pytest.approx(math.log(expected))
    assert not result.saturated


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_tail_normalizer_agrees_with_naive_form(d):
    """Test the log-space evaluation against the direct product."""
    params = ModelParams(d)
    for L in (9.0, 64.0):
        for z in np.linspace(L ** (1 / 6), L ** (2 / 3), 7):
            for y in (-1.0, 0.0, 2.0):
                naive = (SQRT2 * L - z) ** (-params.alpha) * z * math.exp(-(z + y) * SQRT2)
                assert tail_normalizer(L, z, y, params).value == pytest.approx(naive, rel=1e-12, abs=0)


def test_tail_normalizer_examples():
    """Test the d = 1 value and the cancellation at y = -z."""
    assert tail_normalizer(9.0, 1.0, 0.0, ModelParams(1)).value == pytest.approx(math.exp(-SQRT2))
    params = ModelParams(3)
    L, z = 64.0, 5.0
    assert tail_normalizer(L, z, -z, params).value == pytest.approx((SQRT2 * L - z) ** (-params.alpha) * z)


@pytest.mark.parametrize("d", [1, 3, 5])
def test_tail_normalizer_shape_in_z(d):
    """Test log-concavity on the window range and growth for small z."""
    params = ModelParams(d)
    L = 64.0
    z = np.linspace(L ** (1 / 6), L ** (2 / 3), 81)
    logs = np.array([log_tail_normalizer(L, v, 0.5, params) for v in z])
    assert np.all(np.diff(logs, 2) < 0)
    small = np.linspace(0.05, 0.5, 10)
    values = [tail_normalizer(L, v, 0.5, params).value for v in small]
    assert np.all(np.diff(values) > 0)


def test_tail_normalizer_saturates():
    """Test that extreme arguments saturate instead of underflowing silently."""
    result = tail_normalizer(1e6, 5000.0, 1e3, ModelParams(2))
    assert result.value == 0.0
    assert result.saturated
    assert math.isfinite(result.log_value)


@pytest.mark.parametrize("z", [0.0, -1.0, 9 * SQRT2, 20.0])
def test_tail_normalizer_domain(z):
    """Test that z outside (0, sqrt(2)L) is rejected."""
    with pytest.raises(DomainError):
        log_tail_normalizer(9.0, z, 1.0, ModelParams(2))


def test_saturating_exp():
    """Test saturation on both sides and NaN rejection."""
    assert saturating_exp(1e4) == (math.inf, True)
    assert saturating_exp(-1e4) == (0.0, True)
    value, saturated = saturating_exp(1.0)
    assert value == pytest.approx(math.e) and not saturated
    with pytest.raises(DomainError):
        saturating_exp(math.nan)


def test_window_bounds():
    """Test the window edges at L = 64."""
    spec = window(64.0)
    assert spec.lo == pytest.approx(64 * SQRT2 - 16)
    assert spec.hi == pytest.approx(64 * SQRT2 - 2)


def test_window_is_closed():
    """Test that both edges belong to the window."""
    spec = window(64.0)
    assert in_window(spec.lo, 64.0)
    assert in_window(spec.hi, 64.0)
    assert not in_window(spec.hi + 1e-9, 64.0)
    mask = in_window(np.array([spec.lo - 1, spec.lo, 0.5 * (spec.lo + spec.hi)]), 64.0)
    assert mask.tolist() == [False, True, True]


def test_window_degenerates_at_one():
    """Test that at L = 1 the window is the single point sqrt(2) - 1."""
    spec = window(1.0)
    assert spec.lo == spec.hi == pytest.approx(SQRT2 - 1)
    assert in_window(SQRT2 - 1, 1.0)
    assert not in_window(SQRT2 - 1.01, 1.0)


@pytest.mark.parametrize("L,inner,outer", [
    (0.5, 1 / 6, 2 / 3),
    (9.0, 0.3, 2 / 3),
    (9.0, 1 / 6, 0.4),
    (9.0, 1 / 6, 1.0),
])
def test_window_domain(L, inner, outer):
    """Test that bad times and exponents are rejected."""
    with pytest.raises(DomainError):
        window(L, inner, outer)


def test_z_terms_variants():
    """Test both power prefactors of the window statistic summands."""
    params = ModelParams(3)
    L = 27.0
    r = np.array([30.0, 35.0])
    gap = SQRT2 * L - r
    radial = z_terms(r, L, params)
    assert radial == pytest.approx(r ** -1.0 * gap * np.exp(-SQRT2 * gap))
    flat = z_terms(r, L, params, ZVariant.SQRT2L_POWER)
    assert flat == pytest.approx((SQRT2 * L) ** -1.0 * gap * np.exp(-SQRT2 * gap))
    assert np.all(radial > 0)


def test_z_terms_reject_points_beyond_front():
    """Test that summands need 0 < r < sqrt(2)L."""
    with pytest.raises(DomainError):
        log_z_terms([9 * SQRT2], 9.0, ModelParams(2))


def test_mallein_shape():
    """Test the tail shape y exp(-sqrt(2) y) on scalars and arrays."""
    assert mallein_shape(1.0) == pytest.approx(math.exp(-SQRT2))
    assert mallein_shape(np.array([0.0, 2.0])).tolist() == pytest.approx([0.0, 2 * math.exp(-2 * SQRT2)])
