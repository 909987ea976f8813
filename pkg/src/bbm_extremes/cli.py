"""
Command-line interface for bbm-extremes.
"""

import logging
from typing import Any, Dict, List, Optional

import click

from .config import FORMATS, ExperimentConfig
from .exceptions import BBMError, ConfigError, DomainError, ResourceCapError, StatisticalCheckError
from .experiment import Experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RESOURCE = 2
EXIT_CHECK_FAILED = 3

# flag name -> configuration key
_FLAG_KEYS = {
    "d": "d",
    "t": "t",
    "L": "L",
    "ell": "ell",
    "z": "z",
    "y": "y",
    "y_grid": "y_grid",
    "z_grid": "z_grid",
    "ell_grid": "ell_grid",
    "w_grid": "w_grid",
    "x0": "x0",
    "K": "K",
    "n": "n",
    "seed": "seed",
    "workers": "workers",
    "grid_step": "grid_step",
    "path_grid_step": "path_grid_step",
    "prune": "prune",
    "prune_K": "prune_K",
    "population": "population",
    "population_cap": "population_cap",
    "out": "out",
    "fmt": "format",
}


def common_options(fn):
    """Options shared by every command; unset flags leave the config untouched."""
    options = [
        click.option("--config", "-c", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="Config file (key=value, .json or .yaml)"),
        click.option("--d", "d", type=int, help="Spatial dimension"),
        click.option("--t", "t", type=float, help="Time horizon t"),
        click.option("--L", "L", type=float, help="Window time L"),
        click.option("--ell", "ell", type=float, help="Short time ell"),
        click.option("--z", "z", type=float, help="Depth below sqrt(2)L, in [L^(1/6), L^(2/3)]"),
        click.option("--y", "y", type=float, help="Tail offset above m_t"),
        click.option("--y-grid", "y_grid", help="Comma-separated y values"),
        click.option("--z-grid", "z_grid", help="Comma-separated z values"),
        click.option("--ell-grid", "ell_grid", help="Comma-separated ell values (bramson)"),
        click.option("--w-grid", "w_grid", help="Comma-separated w values (bramson)"),
        click.option("--x0", "x0", type=float, help="Starting radius (couple)"),
        click.option("--K", "K", type=float, help="Median-offset constant (bramson)"),
        click.option("--n", "n", type=int, help="Number of replicates"),
        click.option("--seed", "seed", type=int, help="Root seed"),
        click.option("--workers", "workers", type=int, help="Worker processes (default: $BBM_WORKERS or 1)"),
        click.option("--grid-step", "grid_step", type=float, help="Grid step of tree simulations"),
        click.option("--path-grid-step", "path_grid_step", type=float, help="Grid step of single-path functionals"),
        click.option("--prune/--no-prune", "prune", default=None, help="Kill particles far below the front"),
        click.option("--prune-K", "prune_K", type=float, help="Offset K of the pruning curve"),
        click.option("--population", "population", type=int, help="Stop trees at this population"),
        click.option("--population-cap", "population_cap", type=int, help="Hard cap on particles per tree"),
        click.option("--out", "out", type=click.Path(file_okay=False), help="Output directory"),
        click.option("--format", "fmt", type=click.Choice(FORMATS), help="Table format"),
        click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def build_config(config_path: Optional[str], flags: Dict[str, Any]) -> ExperimentConfig:
    """Defaults, then the config file, then command-line flags."""
    config = ExperimentConfig.load(config_path) if config_path else ExperimentConfig()
    return config.with_overrides(**{_FLAG_KEYS[k]: v for k, v in flags.items() if k in _FLAG_KEYS})


def _execute(command: str, options: Dict[str, Any], checks: Optional[List[str]] = None, quick: bool = False) -> int:
    if options.pop("verbose", False):
        logging.getLogger().setLevel(logging.DEBUG)
    config_path = options.pop("config_path", None)
    try:
        config = build_config(config_path, options)
        result = Experiment(config, command, checks=checks, quick=quick).run()
    except (ConfigError, DomainError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_INVALID
    except ResourceCapError as e:
        logger.error(f"Resource cap reached: {e}")
        return EXIT_RESOURCE
    except StatisticalCheckError as e:
        logger.error(str(e))
        return EXIT_CHECK_FAILED
    except BBMError as e:
        logger.error(str(e))
        return EXIT_INVALID
    for path in result.artifacts:
        click.echo(str(path))
    return EXIT_OK


class _CommandGroup(click.Group):
    """Reports bad flag values with the validation exit code."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_INVALID
            raise


@click.group(cls=_CommandGroup)
def cli():
    """Simulate branching Brownian motion and verify its extremes numerically."""
    pass


@cli.command(name="simulate")
@common_options
@click.pass_context
def simulate(ctx: click.Context, **options):
    """Simulate one tree; write its summary, JSON export and SVG."""
    ctx.exit(_execute("simulate", options))


@cli.command(name="tail")
@common_options
@click.pass_context
def tail(ctx: click.Context, **options):
    """Tail and CDF of the centered maximum R_t* - m_t."""
    ctx.exit(_execute("tail", options))


@cli.command(name="mallein")
@common_options
@click.pass_context
def mallein(ctx: click.Context, **options):
    """Ratios of the tail to y exp(-sqrt(2) y) and the fitted tail rate."""
    ctx.exit(_execute("mallein", options))


@cli.command(name="right-tail")
@common_options
@click.pass_context
def right_tail(ctx: click.Context, **options):
    """Right tails from the window, normalized across z."""
    ctx.exit(_execute("right-tail", options))


@cli.command(name="zstat")
@common_options
@click.pass_context
def zstat(ctx: click.Context, **options):
    """Samples of the window statistic Z_L."""
    ctx.exit(_execute("zstat", options))


@cli.command(name="couple")
@common_options
@click.pass_context
def couple(ctx: click.Context, **options):
    """Branching Bessel process against one-dimensional BBM from a large start."""
    ctx.exit(_execute("couple", options))


@cli.command(name="bramson")
@common_options
@click.pass_context
def bramson(ctx: click.Context, **options):
    """One-dimensional BBM tails against the Bramson bound shape."""
    ctx.exit(_execute("bramson", options))


@cli.command(name="render")
@common_options
@click.pass_context
def render(ctx: click.Context, **options):
    """Render the trajectories and moduli of one tree as SVG."""
    ctx.exit(_execute("render", options))


@cli.command(name="fkpp")
@common_options
@click.pass_context
def fkpp(ctx: click.Context, **options):
    """One-dimensional BBM tails against the numerical F-KPP solution."""
    ctx.exit(_execute("fkpp", options))


@cli.command()
@common_options
@click.option("--quick", is_flag=True, help="Scale sample sizes down by 10")
@click.option("--checks", "check_names", help="Comma-separated subset of checks")
@click.pass_context
def verify(ctx: click.Context, quick: bool, check_names: Optional[str], **options):
    """Run the analytic-versus-Monte-Carlo oracle suite."""
    checks = [name.strip() for name in check_names.split(",") if name.strip()] if check_names else None
    ctx.exit(_execute("verify", options, checks=checks, quick=quick))


def main():
    cli()


if __name__ == "__main__":
    main()
