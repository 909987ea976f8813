"""
Sampling primitives and transition densities.

Brownian paths, Brownian bridges, Bessel paths (by embedding a d-dimensional
Brownian motion and taking its norm) and exponential branching clocks, all
drawing from reproducible counter-based random streams.
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import stats

from .exceptions import DomainError

logger = logging.getLogger(__name__)

_UINT64 = 2**64

# tolerance used when matching float times on a grid
TIME_TOL = 1e-9


def derive_stream_id(parent: int, index: "int | str") -> int:
    """Derive a child stream id from a parent id and a child index."""
    digest = hashlib.blake2b(f"{parent}/{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """
    A reproducible random stream keyed by (seed, stream_id).

    Each call to generator() returns a fresh Philox generator positioned at
    the start of the stream, so the same key always replays the same draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) < _UINT64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.stream_id, self.seed], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: "int | str") -> "RngStream":
        return RngStream(self.seed, derive_stream_id(self.stream_id, index))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    """Turn an RngStream (or an existing Generator) into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True, eq=False)
class PathGrid:
    """
    A trajectory sampled at strictly increasing times.

    values has shape (k,) for a scalar track or (k, d) for a spatial track.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise DomainError("a path needs at least one time point")
        if values.ndim not in (1, 2) or values.shape[0] != times.size:
            raise DomainError(
                f"values shape {values.shape} does not match {times.size} times"
            )
        if np.any(np.diff(times) <= 0):
            raise DomainError("path times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    @property
    def dim(self) -> int:
        return 1 if self.is_scalar else self.values.shape[1]

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def radial(self) -> "PathGrid":
        """Euclidean norm of the track at every time."""
        if self.is_scalar:
            return PathGrid(self.times, np.abs(self.values))
        return PathGrid(self.times, np.linalg.norm(self.values, axis=1))

    def covers(self, t0: float, t1: float) -> bool:
        return self.start <= t0 + TIME_TOL and self.end >= t1 - TIME_TOL

    def index_of(self, t: float) -> int:
        """Index of the grid point equal to t (within TIME_TOL)."""
        idx = int(np.searchsorted(self.times, t - TIME_TOL))
        if idx >= self.times.size or abs(self.times[idx] - t) > TIME_TOL:
            raise DomainError(f"time {t} is not a grid point of this path")
        return idx

    def value_at(self, t: float):
        return self.values[self.index_of(t)]

    def restrict(self, t0: float, t1: float) -> "PathGrid":
        """The sub-path on the grid points within [t0, t1]."""
        mask = (self.times >= t0 - TIME_TOL) & (self.times <= t1 + TIME_TOL)
        return PathGrid(self.times[mask], self.values[mask])


def make_grid(T: float, step: float) -> np.ndarray:
    """
    Uniform time grid on [0, T] whose last point is exactly T.

    Raises:
        DomainError: If T < 0 or step <= 0
    """
    if not T >= 0:
        raise DomainError(f"grid horizon must be >= 0, got {T}")
    if not step > 0:
        raise DomainError(f"grid step must be > 0, got {step}")
    if T == 0:
        return np.zeros(1)
    n = max(1, math.ceil(T / step - 1e-9))
    return np.linspace(0.0, T, n + 1)


def _check_grid(grid_times) -> np.ndarray:
    grid = np.asarray(grid_times, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("time grid must be a non-empty 1-D sequence")
    if grid[0] != 0:
        raise DomainError(f"time grid must start at 0, got {grid[0]}")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("time grid must be strictly increasing")
    return grid


def sample_bm_paths(x0, grid_times, n: int, rng: RngLike) -> np.ndarray:
    """
    Sample n Brownian paths on a grid.

    Returns:
        Array of shape (n, k) for scalar x0 or (n, k, d) for a d-vector x0
    """
    grid = _check_grid(grid_times)
    gen = as_generator(rng)
    x0 = np.asarray(x0, dtype=float)
    dt = np.diff(grid)
    scale = np.sqrt(dt).reshape((1, dt.size) + (1,) * x0.ndim)
    increments = gen.standard_normal((n, dt.size) + x0.shape) * scale
    paths = np.empty((n, grid.size) + x0.shape)
    paths[:, 0] = x0
    paths[:, 1:] = x0 + np.cumsum(increments, axis=1)
    return paths


def sample_bm_path(x0, grid_times, rng: RngLike) -> PathGrid:
    """
    Sample a single Brownian path started at x0 (a scalar or a d-vector).

    Raises:
        DomainError: If the grid is empty, does not start at 0 or is not increasing
    """
    grid = _check_grid(grid_times)
    return PathGrid(grid, sample_bm_paths(x0, grid, 1, rng)[0])


def sample_bridges(x: float, y: float, T: float, grid_times, n: int, rng: RngLike) -> np.ndarray:
    """Sample n Brownian bridges from x at time 0 to y at time T, shape (n, k)."""
    if not T > 0:
        raise DomainError(f"bridge length must be > 0, got {T}")
    grid = _check_grid(grid_times)
    if abs(grid[-1] - T) > TIME_TOL:
        raise DomainError(f"bridge grid ends at {grid[-1]}, expected T={T}")
    walk = sample_bm_paths(0.0, grid, n, rng)
    frac = grid / T
    bridges = walk - frac * walk[:, -1:] + x + (y - x) * frac
    bridges[:, 0] = x
    bridges[:, -1] = y
    return bridges


def sample_bridge(x: float, y: float, T: float, grid_times, rng: RngLike) -> PathGrid:
    """
    Sample a Brownian bridge pinned at x (time 0) and y (time T).

    Raises:
        DomainError: If T <= 0 or the grid does not end at T
    """
    grid = _check_grid(grid_times)
    return PathGrid(grid, sample_bridges(x, y, T, grid, 1, rng)[0])


def _bessel_start(d: int, x0: float) -> np.ndarray:
    if int(d) != d or d < 1:
        raise DomainError(f"Bessel dimension must be an integer >= 1, got {d}")
    if not x0 >= 0:
        raise DomainError(f"Bessel start must be >= 0, got {x0}")
    start = np.zeros(int(d))
    start[0] = x0
    return start


def sample_bessel_paths(d: int, x0: float, grid_times, n: int, rng: RngLike) -> np.ndarray:
    """Sample n Bessel(d) paths from x0 by embedding, shape (n, k)."""
    start = _bessel_start(d, x0)
    return np.linalg.norm(sample_bm_paths(start, grid_times, n, rng), axis=-1)


def sample_bessel_path(d: int, x0: float, grid_times, rng: RngLike) -> PathGrid:
    """
    Sample a d-dimensional Bessel path from x0.

    The path is the norm of a d-dimensional Brownian motion started at
    (x0, 0, ..., 0), so the marginals at grid points are exact.
    """
    grid = _check_grid(grid_times)
    return PathGrid(grid, sample_bessel_paths(d, x0, grid, 1, rng)[0])


def bessel_density_from_origin(d: int, L: float, r):
    """Density of the Bessel(d) process at time L started from 0, i.e. of sqrt(L) chi_d."""
    if not L > 0:
        raise DomainError(f"time must be > 0, got {L}")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radial value must be >= 0")
    scale = math.sqrt(L)
    out = stats.chi.pdf(r / scale, df=d) / scale
    return float(out) if out.ndim == 0 else out


def log_gaussian_density(s: float, x, y):
    """Log of the heat kernel (2 pi s)^(-1/2) exp(-(y-x)^2 / (2s))."""
    if not s > 0:
        raise DomainError(f"transition time must be > 0, got {s}")
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    out = -0.5 * math.log(2 * math.pi * s) - diff**2 / (2 * s)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_density(s: float, x, y):
    """Transition density of standard Brownian motion from x to y in time s."""
    out = np.exp(log_gaussian_density(s, x, y))
    return float(out) if np.ndim(out) == 0 else out


def sample_branch_time(rng: RngLike, rate: float = 1.0) -> float:
    """
    Draw an exponential branching clock by inverse CDF.

    Raises:
        DomainError: If rate <= 0
    """
    if not rate > 0:
        raise DomainError(f"branching rate must be > 0, got {rate}")
    u = as_generator(rng).random()
    return -math.log1p(-u) / rate


def sample_branch_times(n: int, rng: RngLike, rate: float = 1.0) -> np.ndarray:
    """Vectorised version of sample_branch_time."""
    if not rate > 0:
        raise DomainError(f"branching rate must be > 0, got {rate}")
    return -np.log1p(-as_generator(rng).random(n)) / rate
