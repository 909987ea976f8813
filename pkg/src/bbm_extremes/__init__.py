"""
Simulation and numerical verification of the extremes of branching Brownian motion in R^d.
"""

from pathlib import Path
from typing import List, Optional

__version__ = "0.1.0"

from .config import ExperimentConfig
from .core_model import ModelParams, ZVariant, centering, tail_normalizer, window
from .estimates import TailEstimate
from .experiment import Experiment, ExperimentResult
from .stochastic_kernels import RngStream

__all__ = [
    "Experiment",
    "ExperimentConfig",
    "ExperimentResult",
    "ModelParams",
    "RngStream",
    "TailEstimate",
    "ZVariant",
    "centering",
    "run",
    "tail_normalizer",
    "window",
]


def run(
    command: str,
    config: Optional[ExperimentConfig | str | Path] = None,
    checks: Optional[List[str]] = None,
    quick: bool = False,
) -> ExperimentResult:
    """
    Run one command of the batch front-end.

    Args:
        command: simulate, tail, mallein, right-tail, verify, zstat, couple,
            bramson, render or fkpp
        config: An ExperimentConfig, a path to a config file, or None for defaults
        checks: For verify, the subset of checks to run
        quick: For verify, scale sample sizes down by 10

    Returns:
        The artifacts written and a summary of the results
    """
    if config is None:
        config = ExperimentConfig()
    elif not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.load(config)
    return Experiment(config, command, checks=checks, quick=quick).run()
