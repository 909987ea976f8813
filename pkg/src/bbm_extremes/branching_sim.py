"""
Simulation of binary branching Brownian motion in R^d and queries on it.

Two simulators live here:

* simulate_tree keeps the full genealogy. Every particle draws its lifetime and
  its increments from its own stream, derived from its parent's stream and
  its child index, so the tree does not depend on traversal order. Events are
  processed in time order through a heap.
* simulate_extremes keeps only the current positions and is used when only the
  maximum at a few times is needed. Clocks are redrawn at every step, which
  is exact by memorylessness.
"""

import functools
import heapq
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .barrier_analytics import (
    BarrierParams,
    BarrierSpec,
    barrier_B0,
    barrier_Q,
    check_barrier_event,
    corridor_upper,
)
from .core_model import (
    SQRT2,
    ModelParams,
    ZVariant,
    centering,
    coord_y,
    in_window,
    scale_by_exp,
    z_terms,
)
from .estimates import TailEstimate, binomial_estimate, mean_estimate
from .exceptions import DomainError, ExtinctionError, ResourceCapError
from .parallel import run_batches, run_replicates
from .stochastic_kernels import (
    TIME_TOL,
    PathGrid,
    RngLike,
    RngStream,
    as_generator,
    derive_stream_id,
    make_grid,
    sample_bm_paths,
    sample_branch_time,
)

logger = logging.getLogger(__name__)

DEFAULT_POPULATION_CAP = 10**7
DEFAULT_TREE_GRID_STEP = 0.01

PathFunctional = Callable[[PathGrid], float]


class Fate(str, Enum):
    """How a particle's trajectory ended."""

    BRANCHED = "branched"
    ALIVE = "alive"
    PRUNED = "pruned"


class StopReason(str, Enum):
    HORIZON = "horizon"
    POPULATION_CAP = "population-cap"
    PRUNED_EXTINCTION = "pruned-extinction"


@dataclass(frozen=True)
class PruneRule:
    """
    Kill a particle when its radial value drops below
    r0 + sqrt(2) s - beta log(s + 2) - K, where r0 is the starting radius.
    """

    beta: float = 0.0
    K: float = 40.0

    def curve(self, s, r0: float = 0.0):
        s = np.asarray(s, dtype=float)
        return r0 + SQRT2 * s - self.beta * np.log(s + 2.0) - self.K


@dataclass(eq=False)
class Particle:
    """One edge of the genealogy: a particle between its birth and its death."""

    id: int
    parent: Optional[int]
    birth_time: float
    death_time: float
    trajectory: PathGrid
    stream_id: int
    fate: Fate
    children: Tuple[int, ...] = ()

    def alive_at(self, t: float) -> bool:
        if t < self.birth_time - TIME_TOL:
            return False
        if t < self.death_time - TIME_TOL:
            return True
        return self.fate is Fate.ALIVE and abs(t - self.death_time) <= TIME_TOL


class Extremum(NamedTuple):
    value: float
    particle_id: int


@dataclass(frozen=True)
class GoodParticleCount:
    """Counts of particles meeting the F-event (gamma) and the G-event (lambda_bar)."""

    gamma: int
    lambda_bar: int


@dataclass(frozen=True, eq=False)
class ParticleTree:
    """
    A simulated realization with its full genealogy.

    Trees are immutable after construction and safe to read concurrently.
    """

    params: ModelParams
    origin: np.ndarray
    particles: Tuple[Particle, ...]
    horizon: float
    stop_reason: StopReason
    seed: int
    grid_step: float
    pruned: int = 0

    def __len__(self) -> int:
        return len(self.particles)

    def _check_time(self, t: float) -> None:
        if t < -TIME_TOL or t > self.horizon + TIME_TOL:
            raise DomainError(f"time {t} outside the simulated range [0, {self.horizon}]")

    def alive(self, t: float) -> List[Particle]:
        """Particles alive at time t, in increasing id order."""
        self._check_time(t)
        return [p for p in self.particles if p.alive_at(t)]

    def population(self, t: float) -> int:
        return len(self.alive(t))

    @property
    def branch_times(self) -> List[float]:
        return [p.death_time for p in self.particles if p.fate is Fate.BRANCHED]

    def position_of(self, particle: Particle, t: float) -> np.ndarray:
        """
        Position of a particle at time t.

        Exact at stored times. Elsewhere a Brownian-bridge value is drawn from a
        stream keyed by the particle and t; pass t as a query time to
        simulate_tree to avoid this.
        """
        path = particle.trajectory
        idx = int(np.searchsorted(path.times, t - TIME_TOL))
        if idx < path.times.size and abs(path.times[idx] - t) <= TIME_TOL:
            return path.values[idx]
        return _bridge_fill(path, t, RngStream(self.seed, derive_stream_id(particle.stream_id, f"t={t!r}")))

    def positions_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Ids and positions (shape (n, d)) of the particles alive at t."""
        alive = self.alive(t)
        ids = np.array([p.id for p in alive], dtype=int)
        if not alive:
            return ids, np.empty((0, self.params.d))
        return ids, np.vstack([self.position_of(p, t) for p in alive])

    def radii_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        ids, positions = self.positions_at(t)
        return ids, np.linalg.norm(positions, axis=1)

    def ancestral_path(self, particle_id: int) -> PathGrid:
        """The trajectory of a particle concatenated with those of all its ancestors."""
        segments = []
        current: Optional[int] = particle_id
        while current is not None:
            particle = self.particles[current]
            segments.append(particle.trajectory)
            current = particle.parent
        segments.reverse()
        times = [segments[0].times]
        values = [segments[0].values]
        for segment in segments[1:]:
            times.append(segment.times[1:])
            values.append(segment.values[1:])
        return PathGrid(np.concatenate(times), np.concatenate(values))

    def ancestor_at(self, particle_id: int, t: float) -> int:
        """Id of the ancestor (or the particle itself) alive at time t."""
        current = self.particles[particle_id]
        while current.birth_time > t + TIME_TOL and current.parent is not None:
            current = self.particles[current.parent]
        return current.id

    def descendants_alive(self, particle_id: int, t: float) -> List[int]:
        """Ids of the descendants of a particle (itself included) alive at t."""
        found = []
        stack = [particle_id]
        while stack:
            particle = self.particles[stack.pop()]
            if particle.alive_at(t):
                found.append(particle.id)
            elif particle.birth_time <= t + TIME_TOL:
                stack.extend(particle.children)
        return sorted(found)

    def to_json(self) -> Dict:
        """Genealogy and sampled positions, schema bbm-extremes/tree@1."""
        return {
            "schema": "bbm-extremes/tree@1",
            "d": self.params.d,
            "origin": self.origin.tolist(),
            "horizon": self.horizon,
            "stop_reason": self.stop_reason.value,
            "seed": self.seed,
            "grid_step": self.grid_step,
            "pruned": self.pruned,
            "particles": [
                {
                    "id": p.id,
                    "parent": p.parent,
                    "birth": p.birth_time,
                    "death": p.death_time,
                    "fate": p.fate.value,
                    "times": p.trajectory.times.tolist(),
                    "positions": p.trajectory.values.tolist(),
                }
                for p in self.particles
            ],
        }


def _bridge_fill(path: PathGrid, t: float, stream: RngStream) -> np.ndarray:
    if t < path.start - TIME_TOL or t > path.end + TIME_TOL:
        raise DomainError(f"time {t} outside the particle's lifetime")
    idx = int(np.searchsorted(path.times, t))
    t0, t1 = path.times[idx - 1], path.times[idx]
    x0, x1 = path.values[idx - 1], path.values[idx]
    frac = (t - t0) / (t1 - t0)
    std = math.sqrt((t - t0) * (t1 - t) / (t1 - t0))
    noise = stream.generator().standard_normal(np.shape(x0))
    return x0 + frac * (x1 - x0) + std * noise


def _segment_times(birth: float, end: float, step: float, query_times: np.ndarray) -> np.ndarray:
    if end <= birth:
        return np.array([birth])
    first = math.floor(birth / step) + 1
    last = math.ceil(end / step) - 1
    grid = np.arange(first, last + 1) * step if last >= first else np.empty(0)
    grid = grid[(grid > birth + TIME_TOL) & (grid < end - TIME_TOL)]
    queries = query_times[(query_times > birth + TIME_TOL) & (query_times < end - TIME_TOL)]
    if queries.size and grid.size:
        gap = np.min(np.abs(grid[:, None] - queries[None, :]), axis=1)
        grid = grid[gap > TIME_TOL]
    inner = np.sort(np.concatenate([grid, queries]))
    return np.concatenate([[birth], inner, [end]])


class _TreeBuilder:
    """Event-driven construction of a ParticleTree."""

    def __init__(
        self,
        params: ModelParams,
        origin: np.ndarray,
        horizon: float,
        population: Optional[int],
        pruning: Optional[PruneRule],
        grid_step: float,
        query_times: np.ndarray,
        population_cap: int,
        seed: int,
    ) -> None:
        self.params = params
        self.origin = origin
        self.horizon = horizon
        self.population = population
        self.pruning = pruning
        self.grid_step = grid_step
        self.query_times = query_times
        self.population_cap = population_cap
        self.seed = seed
        self.r0 = float(np.linalg.norm(origin))
        self.particles: List[Particle] = []
        self.streams: List[RngStream] = []
        self.heap: List[Tuple[float, int]] = []
        self.pruned = 0

    def spawn(self, parent: Optional[int], birth: float, position: np.ndarray, stream: RngStream) -> None:
        pid = len(self.particles)
        if pid >= self.population_cap:
            raise ResourceCapError(
                f"population cap of {self.population_cap} particles exceeded at time {birth:.4g}"
            )
        gen = stream.generator()
        branch_time = birth + sample_branch_time(gen, self.params.branching_rate)
        end = min(branch_time, self.horizon)
        fate = Fate.BRANCHED if branch_time < self.horizon else Fate.ALIVE
        times = _segment_times(birth, end, self.grid_step, self.query_times)
        steps = np.sqrt(np.diff(times))[:, None]
        increments = gen.standard_normal((times.size - 1, self.params.d)) * steps
        values = np.vstack([position, position + np.cumsum(increments, axis=0)])
        if self.pruning is not None and times.size > 1:
            radial = np.linalg.norm(values[1:], axis=1)
            below = np.flatnonzero(radial < self.pruning.curve(times[1:], self.r0))
            if below.size:
                cut = below[0] + 2
                times, values = times[:cut], values[:cut]
                end = float(times[-1])
                fate = Fate.PRUNED
        self.particles.append(
            Particle(
                id=pid,
                parent=parent,
                birth_time=birth,
                death_time=end,
                trajectory=PathGrid(times, values),
                stream_id=stream.stream_id,
                fate=fate,
            )
        )
        self.streams.append(stream)
        heapq.heappush(self.heap, (end, pid))

    def truncate(self, particle: Particle, t: float) -> None:
        path = particle.trajectory
        keep = path.times < t - TIME_TOL
        position = _bridge_fill(path, t, self.streams[particle.id].child(2)) if t > path.start + TIME_TOL else path.values[0]
        if keep.any():
            times = np.append(path.times[keep], t)
            values = np.vstack([path.values[keep], position])
        else:
            times, values = np.array([path.start]), path.values[:1]
        particle.trajectory = PathGrid(times, values)
        particle.death_time = float(times[-1])
        particle.fate = Fate.ALIVE

    def run(self, root: RngStream) -> Tuple[float, StopReason]:
        self.spawn(None, 0.0, self.origin, root)
        alive = 1
        if self.population is not None and alive >= self.population:
            self.truncate(self.particles[0], 0.0)
            return 0.0, StopReason.POPULATION_CAP
        last_time = 0.0
        while self.heap:
            end, pid = heapq.heappop(self.heap)
            particle = self.particles[pid]
            last_time = end
            if particle.fate is Fate.ALIVE:
                continue
            if particle.fate is Fate.PRUNED:
                alive -= 1
                self.pruned += 1
                if alive == 0:
                    horizon = self.horizon if math.isfinite(self.horizon) else end
                    return horizon, StopReason.PRUNED_EXTINCTION
                continue
            stream = self.streams[pid]
            position = particle.trajectory.values[-1]
            first = len(self.particles)
            self.spawn(pid, end, position, stream.child(0))
            self.spawn(pid, end, position, stream.child(1))
            particle.children = (first, first + 1)
            alive += 1
            if self.population is not None and alive >= self.population:
                for _, other in self.heap:
                    self.truncate(self.particles[other], end)
                self.heap.clear()
                return end, StopReason.POPULATION_CAP
        return (self.horizon if math.isfinite(self.horizon) else last_time), StopReason.HORIZON


def _origin_vector(params: ModelParams, origin) -> np.ndarray:
    if origin is None:
        return np.zeros(params.d)
    origin = np.asarray(origin, dtype=float)
    if origin.ndim == 0:
        vector = np.zeros(params.d)
        vector[0] = float(origin)
        return vector
    if origin.shape != (params.d,):
        raise DomainError(f"origin must have shape ({params.d},), got {origin.shape}")
    return origin.copy()


def simulate_tree(
    params: ModelParams,
    rng: RngStream,
    origin=None,
    horizon: Optional[float] = None,
    population: Optional[int] = None,
    pruning: Optional[PruneRule] = None,
    grid_step: float = DEFAULT_TREE_GRID_STEP,
    query_times: Iterable[float] = (),
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> ParticleTree:
    """
    Simulate branching Brownian motion with its genealogy.

    Branch times are exact exponential clocks; positions are exact Gaussian
    increments at grid times, query times and branch times.

    Args:
        params: Model parameters
        rng: Root stream; particle streams are derived from it
        origin: Starting point (d-vector, or a scalar placed on the first axis)
        horizon: Stop at this time
        population: Stop at the branch event that brings the population to this size
        pruning: Optional kill rule
        grid_step: Spacing of the stored positions
        query_times: Extra times at which every particle's position is stored
        population_cap: Hard cap on the number of particles ever created

    Raises:
        DomainError: If neither stopping rule is given or arguments are out of range
        ResourceCapError: If more than population_cap particles are created
    """
    if horizon is None and population is None:
        raise DomainError("simulate_tree needs a horizon or a population target")
    if horizon is not None and not horizon >= 0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")
    if population is not None and population < 1:
        raise DomainError(f"population target must be >= 1, got {population}")
    if not grid_step > 0:
        raise DomainError(f"grid step must be > 0, got {grid_step}")
    builder = _TreeBuilder(
        params=params,
        origin=_origin_vector(params, origin),
        horizon=math.inf if horizon is None else float(horizon),
        population=population,
        pruning=pruning,
        grid_step=grid_step,
        query_times=np.unique(np.asarray(list(query_times), dtype=float)),
        population_cap=population_cap,
        seed=rng.seed,
    )
    stop_time, reason = builder.run(rng)
    logger.debug(
        f"Simulated tree: {len(builder.particles)} particles, stop={reason.value} "
        f"at {stop_time:.4g}, pruned={builder.pruned}"
    )
    return ParticleTree(
        params=params,
        origin=builder.origin,
        particles=tuple(builder.particles),
        horizon=stop_time,
        stop_reason=reason,
        seed=rng.seed,
        grid_step=grid_step,
        pruned=builder.pruned,
    )


def simulate_from_window(
    L: float,
    z: float,
    t: float,
    params: ModelParams,
    rng: RngStream,
    pruning: Optional[PruneRule] = None,
    grid_step: float = DEFAULT_TREE_GRID_STEP,
    ell: Optional[float] = None,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> ParticleTree:
    """
    Branching Bessel process of horizon t - L started at radius sqrt(2)L - z,
    simulated as d-dimensional BBM from (sqrt(2)L - z, 0, ..., 0).

    If ell is given, t - L - ell is stored exactly as a query time.
    """
    start = SQRT2 * L - z
    if not start > 0:
        raise DomainError(f"window start sqrt(2)L - z must be > 0, got {start}")
    if not t > L:
        raise DomainError(f"need t > L, got t={t}, L={L}")
    queries = [t - L] + ([t - L - ell] if ell is not None and t - L - ell > 0 else [])
    return simulate_tree(
        params,
        rng,
        origin=start,
        horizon=t - L,
        pruning=pruning,
        grid_step=grid_step,
        query_times=queries,
        population_cap=population_cap,
    )


def max_modulus(tree: ParticleTree, t: float) -> Extremum:
    """
    Largest Euclidean norm among particles alive at t; ties go to the lowest id.

    Raises:
        ExtinctionError: If no particle is alive at t
    """
    ids, radii = tree.radii_at(t)
    if ids.size == 0:
        raise ExtinctionError(f"no particle alive at t={t}")
    k = int(np.argmax(radii))
    return Extremum(float(radii[k]), int(ids[k]))


def max_coordinate(tree: ParticleTree, t: float, axis: int = 0) -> Extremum:
    """Largest signed coordinate along an axis among particles alive at t."""
    ids, positions = tree.positions_at(t)
    if ids.size == 0:
        raise ExtinctionError(f"no particle alive at t={t}")
    k = int(np.argmax(positions[:, axis]))
    return Extremum(float(positions[k, axis]), int(ids[k]))


def z_statistic(
    radii,
    L: float,
    params: ModelParams,
    variant: ZVariant = ZVariant.RADIAL_POWER,
    inner: float = 1 / 6,
    outer: float = 2 / 3,
) -> float:
    """Z_L over a collection of radial values at time L (compensated sum)."""
    radii = np.asarray(radii, dtype=float).ravel()
    if radii.size == 0:
        return 0.0
    inside = np.asarray(in_window(radii, L, inner, outer), dtype=bool)
    if not inside.any():
        return 0.0
    return math.fsum(z_terms(radii[inside], L, params, variant))


def compute_Z(
    tree: ParticleTree,
    L: float,
    variant: ZVariant = ZVariant.RADIAL_POWER,
    inner: float = 1 / 6,
    outer: float = 2 / 3,
) -> float:
    """
    The window statistic Z_L of a tree: the sum over particles alive at L with
    radius in the window of pow^(-alpha) (sqrt(2)L - R) exp(-(sqrt(2)L - R) sqrt(2)),
    pow being R or sqrt(2)L according to variant.
    """
    if L > tree.horizon + TIME_TOL:
        raise DomainError(f"L={L} beyond the tree horizon {tree.horizon}")
    _, radii = tree.radii_at(L)
    return z_statistic(radii, L, tree.params, variant, inner, outer)


def count_good_particles(
    tree: ParticleTree,
    t: float,
    L: float,
    ell: float,
    y: float,
    z: float,
    barrier_params: Optional[BarrierParams] = None,
    constraints: bool = True,
) -> GoodParticleCount:
    """
    Count the particles alive at t - L - ell of a process started in the
    window that satisfy the F-event (gamma) and the G-event (lambda_bar).

    Both events require a descendant above m_t + y at time t - L. F adds the
    upper barrier B0 and an endpoint above t/sqrt(d); G adds the corridor
    between Q and the line (m_t/t)(s+L) + y and an endpoint whose
    y-coordinate lies in [ell^(1/3), ell^(2/3)]. With constraints=False only
    the descendant event is required.
    """
    params = tree.params
    bp = barrier_params or BarrierParams.for_model(params, t, L, ell=ell, z=z, y=y)
    span, t_tilde = bp.span, bp.t_tilde
    if tree.horizon < t_tilde - TIME_TOL:
        raise DomainError(f"tree horizon {tree.horizon} is shorter than t - L = {t_tilde}")
    threshold = centering(params, t) + y
    ids, radii = tree.radii_at(t_tilde)
    successful = {tree.ancestor_at(int(i), span) for i in ids[radii > threshold]}
    if not constraints:
        return GoodParticleCount(gamma=len(successful), lambda_bar=len(successful))

    lo_y, hi_y = ell ** (1 / 3), ell ** (2 / 3)
    if coord_y(params, t, ell, y, hi_y) <= t / math.sqrt(params.d):
        logger.warning(
            "G-event endpoint window lies below t/sqrt(d); lambda_bar <= gamma may fail"
        )
    f_spec = BarrierSpec(0.0, span, upper=functools.partial(barrier_B0, params=params, bp=bp))
    g_spec = BarrierSpec(
        0.0,
        span,
        upper=functools.partial(corridor_upper, params=params, bp=bp),
        lower=functools.partial(barrier_Q, params=params, bp=bp),
    )
    gamma = lambda_bar = 0
    for particle_id in sorted(successful):
        path = tree.ancestral_path(particle_id).radial().restrict(0.0, span)
        end_radius = float(np.linalg.norm(tree.position_of(tree.particles[particle_id], span)))
        if check_barrier_event(path, f_spec) and end_radius > t / math.sqrt(params.d):
            gamma += 1
        y_end = coord_y(params, t, ell, y, end_radius)
        if check_barrier_event(path, g_spec) and lo_y <= y_end <= hi_y:
            lambda_bar += 1
    return GoodParticleCount(gamma=gamma, lambda_bar=lambda_bar)


# ---------------------------------------------------------------------------
# Population-level simulation of maxima


@dataclass(frozen=True)
class ExtremesSample:
    """Maxima of one realization at a set of query times."""

    query_times: np.ndarray
    maxima: np.ndarray
    populations: np.ndarray
    pruned: int = 0
    maxima_unflagged: Optional[np.ndarray] = None


def _advance(positions: np.ndarray, flags: np.ndarray, h: float, gen: np.random.Generator, cap: int):
    """Run every particle for time h, branching at exact exponential times."""
    done_pos, done_flags = [], []
    active, active_flags = positions, flags
    remaining = np.full(active.shape[0], h)
    count = active.shape[0]
    while active.shape[0]:
        clocks = -np.log1p(-gen.random(active.shape[0]))
        stay = clocks >= remaining
        moved = active[stay] + gen.standard_normal((int(stay.sum()), active.shape[1])) * np.sqrt(remaining[stay])[:, None]
        done_pos.append(moved)
        done_flags.append(active_flags[stay])
        split = ~stay
        n_split = int(split.sum())
        if not n_split:
            break
        parents = active[split] + gen.standard_normal((n_split, active.shape[1])) * np.sqrt(clocks[split])[:, None]
        active = np.concatenate([parents, parents])
        active_flags = np.concatenate([active_flags[split], active_flags[split]])
        remaining = np.tile(remaining[split] - clocks[split], 2)
        count += n_split
        if count > cap:
            raise ResourceCapError(f"population cap of {cap} particles exceeded")
    return np.concatenate(done_pos), np.concatenate(done_flags)


def _checkpoints(horizon: float, step: float, query_times: np.ndarray) -> np.ndarray:
    grid = make_grid(horizon, step)
    if query_times.size:
        gap = np.min(np.abs(grid[:, None] - query_times[None, :]), axis=1)
        grid = grid[gap > TIME_TOL]
    return np.unique(np.concatenate([[0.0], grid, query_times]))


def simulate_extremes(
    params: ModelParams,
    rng: RngLike,
    horizon: float,
    origin=None,
    query_times: Optional[Sequence[float]] = None,
    pruning: Optional[PruneRule] = None,
    grid_step: float = 0.05,
    mode: str = "radial",
    flag_only: bool = False,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> ExtremesSample:
    """
    Simulate one realization keeping only positions, and record the maximum
    at each query time.

    Args:
        mode: "radial" for the maximum norm, "coordinate" for the maximum
            first coordinate (one-dimensional BBM when d = 1)
        flag_only: With a pruning rule, do not remove particles but mark the
            lines the rule would have killed; maxima_unflagged then holds the
            pruned maxima on the same realization

    Raises:
        ResourceCapError: If the population exceeds population_cap
    """
    if not horizon >= 0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")
    if mode not in ("radial", "coordinate"):
        raise DomainError(f"unknown mode {mode!r}")
    gen = as_generator(rng)
    origin = _origin_vector(params, origin)
    queries = np.unique(np.asarray([horizon] if query_times is None else list(query_times), dtype=float))
    if queries.size and (queries[0] < 0 or queries[-1] > horizon + TIME_TOL):
        raise DomainError("query times must lie in [0, horizon]")

    def score(pos: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pos, axis=1) if mode == "radial" else pos[:, 0]

    r0 = float(score(origin[None, :])[0])
    positions = origin[None, :].copy()
    flags = np.zeros(1, dtype=bool)
    maxima = np.full(queries.size, -np.inf)
    unflagged = np.full(queries.size, -np.inf)
    populations = np.zeros(queries.size, dtype=int)
    pruned = 0
    current = 0.0
    # without pruning only the query times need a stop
    step = grid_step if pruning is not None else (horizon or 1.0)
    for checkpoint in _checkpoints(horizon, step, queries):
        if checkpoint > current:
            positions, flags = _advance(positions, flags, checkpoint - current, gen, population_cap)
            current = checkpoint
            if pruning is not None:
                below = score(positions) < pruning.curve(current, r0)
                if flag_only:
                    flags |= below
                else:
                    pruned += int(below.sum())
                    positions, flags = positions[~below], flags[~below]
        hit = np.flatnonzero(np.abs(queries - current) <= TIME_TOL)
        if hit.size and positions.shape[0]:
            values = score(positions)
            maxima[hit] = values.max()
            populations[hit] = positions.shape[0]
            if (~flags).any():
                unflagged[hit] = values[~flags].max()
        if positions.shape[0] == 0:
            break
    return ExtremesSample(
        query_times=queries,
        maxima=maxima,
        populations=populations,
        pruned=pruned,
        maxima_unflagged=unflagged if flag_only else None,
    )


def _extremes_task(stream: RngStream, **kwargs) -> np.ndarray:
    return simulate_extremes(rng=stream, **kwargs).maxima


def estimate_max_samples(
    params: ModelParams,
    horizon: float,
    n: int,
    rng: RngStream,
    origin=None,
    query_times: Optional[Sequence[float]] = None,
    pruning: Optional[PruneRule] = None,
    grid_step: float = 0.05,
    mode: str = "radial",
    workers: int = 1,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> np.ndarray:
    """
    Maxima of n independent realizations, shape (n, number of query times).

    Replicate i uses rng.child(i), so the result does not depend on workers.
    """
    task = functools.partial(
        _extremes_task,
        params=params,
        horizon=horizon,
        origin=origin,
        query_times=query_times,
        pruning=pruning,
        grid_step=grid_step,
        mode=mode,
        population_cap=population_cap,
    )
    logger.info(f"Sampling maxima of {n} realizations to horizon {horizon} (d={params.d})")
    return np.vstack(run_replicates(task, n, rng, workers=workers))


def _prune_bias_task(stream: RngStream, **kwargs) -> bool:
    sample = simulate_extremes(rng=stream, flag_only=True, **kwargs)
    return bool(sample.maxima[-1] != sample.maxima_unflagged[-1])


def prune_bias(
    params: ModelParams,
    t: float,
    n: int,
    rng: RngStream,
    pruning: PruneRule,
    grid_step: float = 0.05,
    mode: str = "radial",
    workers: int = 1,
) -> TailEstimate:
    """
    Fraction of realizations whose maximum at t changes under pruning.

    Each realization is simulated once with the rule in flag mode, so the
    pruned and unpruned maxima come from the same noise.
    """
    task = functools.partial(
        _prune_bias_task, params=params, horizon=t, pruning=pruning, grid_step=grid_step, mode=mode
    )
    changed = run_replicates(task, n, rng, workers=workers)
    return binomial_estimate(sum(changed), n, seed=rng.seed, metadata={"K": pruning.K})


# ---------------------------------------------------------------------------
# Coupling of one-dimensional BBM and the branching Bessel process


@dataclass(frozen=True)
class CoupledRun:
    """One realization of the shared-noise coupling started at x0."""

    x0: float
    ell: float
    bessel_max: float
    oned_max: float
    max_discrepancy: float
    min_radial: float
    population: int

    @property
    def good_event(self) -> bool:
        """All radial tracks stayed above x0/4."""
        return self.min_radial >= self.x0 / 4

    def discrepancy_bound(self, alpha: float) -> float:
        """alpha * ell / (x0/4): the drift integral bound on the good event."""
        return 4.0 * alpha * self.ell / self.x0


def simulate_coupled(
    params: ModelParams,
    x0: float,
    ell: float,
    rng: RngLike,
    grid_step: float = 1e-3,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> CoupledRun:
    """
    Run one-dimensional BBM and a branching Bessel process on the same tree
    with the same driving increments up to time ell.

    The Bessel tracks follow dR = alpha/R dt + dW (Euler steps no longer than
    grid_step, drift frozen at the start of each step).
    """
    if not x0 > 0:
        raise DomainError(f"coupling needs x0 > 0, got {x0}")
    gen = as_generator(rng)
    alpha = params.alpha
    W = np.array([float(x0)])
    R = np.array([float(x0)])
    min_radial = float(x0)
    for h in np.diff(make_grid(ell, grid_step)):
        done_W, done_R = [], []
        remaining = np.full(W.size, h)
        while W.size:
            min_radial = min(min_radial, float(R.min()))
            clocks = -np.log1p(-gen.random(W.size))
            dt = np.minimum(clocks, remaining)
            dW = gen.standard_normal(W.size) * np.sqrt(dt)
            W = W + dW
            R = R + alpha / R * dt + dW
            stay = clocks >= remaining
            done_W.append(W[stay])
            done_R.append(R[stay])
            split = ~stay
            W = np.tile(W[split], 2)
            R = np.tile(R[split], 2)
            remaining = np.tile(remaining[split] - clocks[split], 2)
        W, R = np.concatenate(done_W), np.concatenate(done_R)
        if W.size > population_cap:
            raise ResourceCapError(f"population cap of {population_cap} particles exceeded")
    min_radial = min(min_radial, float(R.min()))
    return CoupledRun(
        x0=float(x0),
        ell=float(ell),
        bessel_max=float(R.max()),
        oned_max=float(W.max()),
        max_discrepancy=float(np.max(np.abs(R - W))),
        min_radial=min_radial,
        population=int(W.size),
    )


# ---------------------------------------------------------------------------
# Many-to-few oracles


def _tree_sum_task(
    stream: RngStream, f: PathFunctional, params: ModelParams, origin: np.ndarray, T: float, step: float
) -> float:
    tree = simulate_tree(params, stream, origin=origin, horizon=T, grid_step=step, query_times=[T])
    return math.fsum(f(tree.ancestral_path(p.id)) for p in tree.alive(T))


def _single_path_batch(
    stream: RngStream, size: int, f: PathFunctional, origin: np.ndarray, T: float, step: float
) -> np.ndarray:
    grid = make_grid(T, step)
    paths = sample_bm_paths(origin, grid, size, stream)
    return np.array([f(PathGrid(grid, path)) for path in paths], dtype=float)


def many_to_one_check(
    f: PathFunctional,
    x0,
    T: float,
    n_tree: int,
    n_single: int,
    rng: RngStream,
    params: ModelParams,
    grid_step: float = DEFAULT_TREE_GRID_STEP,
    workers: int = 1,
) -> Tuple[TailEstimate, TailEstimate]:
    """
    Estimate both sides of E[sum over N_T of f(path)] = e^T E[f(single path)].

    The tree side sums f over the ancestral paths of the particles alive at T;
    the single side averages f over d-dimensional Brownian paths from x0 and
    scales by e^T.

    Raises:
        DomainError: If T < 0
    """
    if not T >= 0:
        raise DomainError(f"T must be >= 0, got {T}")
    origin = _origin_vector(params, x0)
    tree_task = functools.partial(_tree_sum_task, f=f, params=params, origin=origin, T=T, step=grid_step)
    sums = run_replicates(tree_task, n_tree, rng.child(0), workers=workers)
    lhs = mean_estimate(sums, seed=rng.seed)
    if n_tree == 1:
        lhs = TailEstimate(lhs.value, 0.0 if not any(sums) else math.inf, 1, seed=rng.seed)

    single_task = functools.partial(_single_path_batch, f=f, origin=origin, T=T, step=grid_step)
    values = run_batches(single_task, n_single, rng.child(1), workers=workers)
    se = float(values.std(ddof=1) / math.sqrt(n_single)) if n_single > 1 else math.inf
    rhs = TailEstimate(
        value=scale_by_exp(float(values.mean()), T),
        stderr=scale_by_exp(se, T),
        n=n_single,
        seed=rng.seed,
        metadata={"log_scale": T},
    )
    logger.debug(f"many-to-one T={T}: tree {lhs.value:.4g}+-{lhs.stderr:.2g}, single {rhs.value:.4g}+-{rhs.stderr:.2g}")
    return lhs, rhs


def simulate_population_size(T: float, rng: RngLike) -> int:
    """N_T of the pure-birth process at rate 1 per particle, by event simulation."""
    gen = as_generator(rng)
    now, size = 0.0, 1
    while True:
        now += -math.log1p(-gen.random()) / size
        if now >= T:
            return size
        size += 1


def _population_square_batch(stream: RngStream, size: int, T: float) -> np.ndarray:
    gen = stream.generator()
    return np.array([simulate_population_size(T, gen) ** 2 for _ in range(size)], dtype=float)


def many_to_two_moment_check(T: float, n: int, rng: RngStream, workers: int = 1) -> TailEstimate:
    """
    Estimate E[N_T^2], which the many-to-two lemma gives as 2e^(2T) - e^T.

    The closed form is returned in metadata["expected"].
    """
    if not T >= 0:
        raise DomainError(f"T must be >= 0, got {T}")
    task = functools.partial(_population_square_batch, T=T)
    squares = run_batches(task, n, rng, workers=workers)
    expected = 2 * math.exp(2 * T) - math.exp(T)
    return mean_estimate(squares, seed=rng.seed, metadata={"expected": expected})
