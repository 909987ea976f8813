"""
Replicate-parallel execution with a deterministic merge.

Replicate (or batch) i always draws from rng.child(i), and results are merged
in index order, so the output does not depend on the number of workers.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from .stochastic_kernels import RngStream

logger = logging.getLogger(__name__)

T = TypeVar("T")

WORKERS_ENV = "BBM_WORKERS"
DEFAULT_BATCH_SIZE = 2048


def default_workers() -> int:
    """Worker count from the BBM_WORKERS environment variable (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring non-integer {WORKERS_ENV}={raw!r}")
        return 1


def _chunks(n: int, size: int) -> List[tuple[int, int]]:
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def _run_replicate_chunk(
    task: Callable[[RngStream], T], rng: RngStream, start: int, stop: int
) -> List[T]:
    return [task(rng.child(i)) for i in range(start, stop)]


def _run_batch(
    task: Callable[[RngStream, int], np.ndarray], rng: RngStream, index: int, size: int
) -> np.ndarray:
    return np.asarray(task(rng.child(index), size))


def _execute(fn, jobs: Sequence[tuple], workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        # collected in submission order, not completion order
        return [future.result() for future in futures]


def run_replicates(
    task: Callable[[RngStream], T],
    n: int,
    rng: RngStream,
    workers: int = 1,
    chunk_size: Optional[int] = None,
) -> List[T]:
    """
    Run task once per replicate and return the results in replicate order.

    Args:
        task: Picklable callable taking the replicate's RngStream
        n: Number of replicates
        rng: Root stream; replicate i uses rng.child(i)
        workers: Number of worker processes (1 runs in-process)
        chunk_size: Replicates per submitted job
    """
    if n < 1:
        return []
    size = chunk_size or max(1, -(-n // (4 * max(workers, 1))))
    jobs = [(task, rng, start, stop) for start, stop in _chunks(n, size)]
    logger.debug(f"Running {n} replicates in {len(jobs)} chunks on {workers} workers")
    results = _execute(_run_replicate_chunk, jobs, workers)
    return [item for chunk in results for item in chunk]


def run_batches(
    task: Callable[[RngStream, int], np.ndarray],
    n: int,
    rng: RngStream,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """
    Run a vectorised task over fixed-size batches and concatenate the results.

    The batch partition depends only on n and batch_size, never on workers.
    """
    if n < 1:
        return np.empty(0)
    jobs = [
        (task, rng, index, stop - start)
        for index, (start, stop) in enumerate(_chunks(n, batch_size))
    ]
    logger.debug(f"Running {n} samples in {len(jobs)} batches on {workers} workers")
    return np.concatenate(_execute(_run_batch, jobs, workers))
