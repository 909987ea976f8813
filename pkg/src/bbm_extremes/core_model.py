"""
Closed-form scalar quantities of the d-dimensional BBM model.

Everything in this module is a pure function of its arguments; exponential-scale
quantities are evaluated in log-space first and exponentiated with saturation.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DomainError, SmallTimeWarning

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

# exp() of anything outside this range saturates to +inf / 0 in float64
LOG_MAX = float(np.log(np.finfo(float).max))
LOG_MIN = float(np.log(np.finfo(float).tiny)) - 52 * math.log(2.0)

DEFAULT_WINDOW_INNER = 1.0 / 6.0
DEFAULT_WINDOW_OUTER = 2.0 / 3.0


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters of binary branching Brownian motion in R^d.

    Args:
        d: Spatial dimension (integer >= 1)
        branching_rate: Rate of the exponential branching clocks, fixed at 1
    """

    d: int
    branching_rate: float = 1.0

    def __post_init__(self) -> None:
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be an integer >= 1, got {self.d!r}")
        if self.branching_rate != 1.0:
            raise DomainError(
                f"branching rate is fixed at 1, got {self.branching_rate!r}"
            )
        object.__setattr__(self, "d", int(self.d))

    @property
    def alpha(self) -> float:
        """Bessel drift coefficient (d-1)/2."""
        return (self.d - 1) / 2.0

    @property
    def c_d(self) -> float:
        """Coefficient of the logarithmic correction, (d-4)/(2*sqrt(2))."""
        return (self.d - 4) / (2.0 * SQRT2)


class ZVariant(str, Enum):
    """Which power prefactor is used in the window statistic Z_L."""

    RADIAL_POWER = "radial-power"
    SQRT2L_POWER = "sqrt2L-power"


@dataclass(frozen=True)
class WindowSpec:
    """The window [sqrt(2)L - L^outer, sqrt(2)L - L^inner]."""

    L: float
    lo: float
    hi: float


@dataclass(frozen=True)
class TailNormalizer:
    """The tail normalizer (sqrt(2)L - z)^(-alpha) z exp(-(z + y) sqrt(2))."""

    L: float
    z: float
    y: float
    value: float
    log_value: float
    saturated: bool = False


def saturating_exp(log_value: float) -> tuple[float, bool]:
    """
    Exponentiate a log-space value without overflow.

    Returns:
        Tuple of (value, saturated) where saturated is True if the value was
        clamped to +inf or 0
    """
    if math.isnan(log_value):
        raise DomainError("cannot exponentiate NaN")
    if log_value > LOG_MAX:
        return math.inf, True
    if log_value < LOG_MIN:
        return 0.0, True
    return math.exp(log_value), False


def scale_by_exp(value: float, log_scale: float) -> float:
    """value * e^log_scale, combined in log-space."""
    if value == 0 or not math.isfinite(value):
        return value
    scaled, _ = saturating_exp(math.log(abs(value)) + log_scale)
    return math.copysign(scaled, value)


def centering(params: ModelParams, t: float) -> float:
    """
    Centering term m_t(d) = sqrt(2) t + c_d log t.

    Times in (0, 1] are accepted but issue a SmallTimeWarning since log t <= 0
    there.

    Raises:
        DomainError: If t <= 0
    """
    if not t > 0:
        raise DomainError(f"centering requires t > 0, got {t!r}")
    if t <= 1:
        warnings.warn(
            f"centering evaluated at t={t} <= 1 (non-positive log term)",
            SmallTimeWarning,
            stacklevel=2,
        )
    return SQRT2 * t + params.c_d * math.log(t)


def offset_o_t(params: ModelParams, t: float) -> float:
    """Relative speed offset m_t/t - sqrt(2) = c_d log(t) / t."""
    if not t > 0:
        raise DomainError(f"offset requires t > 0, got {t!r}")
    return params.c_d * math.log(t) / t


def speed(params: ModelParams, t: float) -> float:
    """Slope m_t/t of the linear barriers."""
    return SQRT2 + offset_o_t(params, t)


def coord_x(L: float, a: float) -> float:
    """Radial coordinate sqrt(2)L - a of a point at depth a below the front."""
    return SQRT2 * L - a


def coord_y(params: ModelParams, t: float, ell: float, y: float, b: float) -> float:
    """Radial coordinate (m_t/t)(t - ell) + y - b at time t - ell."""
    return speed(params, t) * (t - ell) + y - b


def log_tail_normalizer(L: float, z: float, y: float, params: ModelParams) -> float:
    """Natural log of the tail normalizer."""
    base = SQRT2 * L - z
    if not z > 0:
        raise DomainError(f"tail normalizer requires z > 0, got z={z!r}")
    if not base > 0:
        raise DomainError(
            f"tail normalizer requires z < sqrt(2)L, got z={z!r}, L={L!r}"
        )
    return -params.alpha * math.log(base) + math.log(z) - (z + y) * SQRT2


def tail_normalizer(
    L: float, z: float, y: float, params: ModelParams
) -> TailNormalizer:
    """
    Evaluate the normalizer of the right tail started from sqrt(2)L - z.

    Args:
        L: Window time
        z: Depth below sqrt(2)L, with 0 < z < sqrt(2)L
        y: Tail offset above m_t
        params: Model parameters

    Returns:
        TailNormalizer carrying both the linear and log values

    Raises:
        DomainError: If z <= 0 or z >= sqrt(2)L
    """
    log_value = log_tail_normalizer(L, z, y, params)
    value, saturated = saturating_exp(log_value)
    if saturated:
        logger.debug(f"tail normalizer saturated at log value {log_value}")
    return TailNormalizer(
        L=L, z=z, y=y, value=value, log_value=log_value, saturated=saturated
    )


def _check_exponents(inner: float, outer: float) -> None:
    if not 0 < inner < 0.25:
        raise DomainError(f"window inner exponent must lie in (0, 1/4), got {inner}")
    if not 0.5 < outer < 1:
        raise DomainError(f"window outer exponent must lie in (1/2, 1), got {outer}")


def window(
    L: float,
    inner: float = DEFAULT_WINDOW_INNER,
    outer: float = DEFAULT_WINDOW_OUTER,
) -> WindowSpec:
    """
    Build the radial window at time L.

    Raises:
        DomainError: If L < 1 or the exponents are out of range
    """
    if not L >= 1:
        raise DomainError(f"window requires L >= 1, got {L!r}")
    _check_exponents(inner, outer)
    return WindowSpec(L=L, lo=coord_x(L, L**outer), hi=coord_x(L, L**inner))


def in_window(
    r,
    L: float,
    inner: float = DEFAULT_WINDOW_INNER,
    outer: float = DEFAULT_WINDOW_OUTER,
):
    """
    Test membership of radial value(s) in the closed window.

    Accepts a scalar or an array; returns a bool or a boolean array.
    """
    spec = window(L, inner, outer)
    inside = (np.asarray(r) >= spec.lo) & (np.asarray(r) <= spec.hi)
    return bool(inside) if np.ndim(inside) == 0 else inside


def log_z_terms(
    r, L: float, params: ModelParams, variant: ZVariant = ZVariant.RADIAL_POWER
) -> np.ndarray:
    """Log of the per-particle summands of Z_L for radial values r < sqrt(2)L."""
    r = np.asarray(r, dtype=float)
    gap = SQRT2 * L - r
    if np.any(gap <= 0) or np.any(r <= 0):
        raise DomainError("Z_L summands need 0 < r < sqrt(2)L")
    power = r if ZVariant(variant) is ZVariant.RADIAL_POWER else SQRT2 * L
    return -params.alpha * np.log(power) + np.log(gap) - SQRT2 * gap


def z_terms(
    r, L: float, params: ModelParams, variant: ZVariant = ZVariant.RADIAL_POWER
) -> np.ndarray:
    """Per-particle summands pow^(-alpha) (sqrt(2)L - r) exp(-(sqrt(2)L - r) sqrt(2))."""
    return np.exp(log_z_terms(r, L, params, variant))


def mallein_shape(y):
    """The tail shape y exp(-sqrt(2) y)."""
    y = np.asarray(y, dtype=float)
    out = y * np.exp(-SQRT2 * y)
    return float(out) if out.ndim == 0 else out
