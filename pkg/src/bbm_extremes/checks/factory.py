"""
Factory for creating and selecting oracle checks.
"""

from typing import Dict, Iterable, List, Optional, Type

from ..exceptions import ConfigError
from . import BaseCheck
from .ballot import BallotCheck
from .barriers import BarrierMonotonicityCheck
from .girsanov import GirsanovNormalizationCheck
from .many_to_few import ManyToOneCheck, ManyToTwoCheck
from .marginals import ChiMarginalCheck
from .structure import StructureCheck


class CheckFactory:
    """Factory for the verifier's oracle checks."""

    def __init__(self) -> None:
        self._checks: Dict[str, Type[BaseCheck]] = {
            cls.name: cls
            for cls in (
                BallotCheck,
                GirsanovNormalizationCheck,
                ManyToOneCheck,
                ManyToTwoCheck,
                ChiMarginalCheck,
                BarrierMonotonicityCheck,
                StructureCheck,
            )
        }

    @property
    def names(self) -> List[str]:
        return list(self._checks)

    def get_checks(self, names: Optional[Iterable[str]] = None) -> List[BaseCheck]:
        """
        Instantiate the selected checks in registration order.

        Args:
            names: Check names to run; all checks when None

        Raises:
            ConfigError: If a name is not registered
        """
        if names is None:
            selected = self.names
        else:
            selected = list(dict.fromkeys(names))
            unknown = [name for name in selected if name not in self._checks]
            if unknown:
                raise ConfigError(
                    f"unknown check(s) {', '.join(unknown)}; available: {', '.join(self.names)}"
                )
            selected = [name for name in self.names if name in selected]
        return [self._checks[name]() for name in selected]
