"""
Oracle-suite orchestration.
"""

import logging
from typing import Iterable, List, Optional, Tuple

from .checks import CheckContext, CheckResult
from .checks.factory import CheckFactory
from .exceptions import StatisticalCheckError

logger = logging.getLogger(__name__)

QUICK_SCALE = 0.1


class Verifier:
    """Runs the selected oracle checks and reports which passed."""

    def __init__(
        self,
        seed: int,
        workers: int = 1,
        names: Optional[Iterable[str]] = None,
        quick: bool = False,
    ) -> None:
        """
        Initialize the verifier.

        Args:
            seed: Root seed of every check's streams
            workers: Worker processes for the estimators
            names: Subset of checks to run (all when None)
            quick: Scale sample sizes down by 10
        """
        self.context = CheckContext(seed=seed, workers=workers, scale=QUICK_SCALE if quick else 1.0)
        self.checks = CheckFactory().get_checks(names)

        self.results: List[CheckResult] = []
        self.check_errors: List[Tuple[str, str]] = []
        self.succeeded = 0
        self.total = 0

    def run(self) -> List[CheckResult]:
        """
        Run every check; a check that raises counts as failed.

        Returns:
            One result per check, in registration order
        """
        logger.info(f"Running {len(self.checks)} oracle checks (seed={self.context.seed}, scale={self.context.scale:g})")
        self.total = len(self.checks)
        for check in self.checks:
            logger.info(f"Check {check.name}: {check.description}")
            try:
                result = check.run(self.context)
            except Exception as e:
                logger.error(f"Check {check.name} raised: {e}")
                self.check_errors.append((check.name, str(e)))
                result = CheckResult(name=check.name, passed=False, detail=str(e))
            if result.passed:
                self.succeeded += 1
            self.results.append(result)
        self._report_summary()
        return self.results

    def _report_summary(self) -> None:
        """Report the verification summary to the logger."""
        logger.info("Verification complete:")
        logger.info(f"- Passed: {self.succeeded}/{self.total} checks")
        logger.info(f"- Pass rate: {self.pass_rate:.1f}%")
        if self.check_errors:
            logger.warning(f"{len(self.check_errors)} check(s) raised instead of reporting:")
            for name, message in self.check_errors:
                logger.warning(f"- {name}: {message}")
        failed = [r for r in self.results if not r.passed]
        if failed:
            logger.warning("The following checks failed:")
            for result in failed:
                bad = [row for row in result.rows if not row.get("passed", True)]
                logger.warning(f"- {result.name}: {result.detail or f'{len(bad)} failing case(s)'}")

    def raise_for_failures(self) -> None:
        """
        Raises:
            StatisticalCheckError: If any check failed
        """
        if self.failed_count:
            names = ", ".join(r.name for r in self.results if not r.passed)
            raise StatisticalCheckError(f"{self.failed_count} oracle check(s) failed: {names}")

    @property
    def failed_count(self) -> int:
        return self.total - self.succeeded

    @property
    def pass_rate(self) -> float:
        """Percentage of checks that passed."""
        if self.total == 0:
            return 0.0
        return (self.succeeded / self.total) * 100
