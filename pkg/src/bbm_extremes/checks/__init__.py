"""
Base classes for oracle checks run by the verifier.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List

from ..stochastic_kernels import RngStream


@dataclass(frozen=True)
class CheckContext:
    """
    Shared settings for a verification run.

    Args:
        seed: Root seed; each check derives its own stream from it
        workers: Worker processes for replicate-parallel estimators
        scale: Multiplier applied to every sample size (0.1 for quick runs)
        gate: Number of standard errors an estimate may deviate by
    """

    seed: int
    workers: int = 1
    scale: float = 1.0
    gate: float = 3.0

    def n(self, base: int, minimum: int = 50) -> int:
        return max(minimum, int(base * self.scale))

    def stream(self, name: str) -> RngStream:
        return RngStream(self.seed).child(name)


@dataclass
class CheckResult:
    """Outcome of one oracle check: a row per sub-case plus an overall verdict."""

    name: str
    passed: bool
    rows: List[Dict[str, Any]] = field(default_factory=list)
    detail: str = ""

    @property
    def worst(self) -> float:
        """Largest deviation in standard errors over the rows that report one."""
        scores = [row["z_score"] for row in self.rows if "z_score" in row]
        return max(scores, default=0.0)


def z_score(value: float, reference: float, stderr: float) -> float:
    """|value - reference| in units of stderr (0 for an exact match)."""
    diff = abs(value - reference)
    if stderr > 0:
        return diff / stderr
    return 0.0 if diff == 0 else float("inf")


class BaseCheck(ABC):
    """Base class for all oracle checks."""

    name: str = ""
    description: str = ""

    @abstractmethod
    def run(self, context: CheckContext) -> CheckResult:
        """
        Run the check.

        Args:
            context: Seeds, worker count, sample-size scale and gate

        Returns:
            The check's result
        """

    def _result(self, rows: List[Dict[str, Any]], detail: str = "") -> CheckResult:
        return CheckResult(
            name=self.name,
            passed=all(row["passed"] for row in rows),
            rows=rows,
            detail=detail,
        )
