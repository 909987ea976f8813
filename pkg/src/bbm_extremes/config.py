"""
Experiment configuration: defaults, config files, environment and overrides.
"""

import hashlib
import json
import logging
import math
import typing
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from .branching_sim import DEFAULT_POPULATION_CAP, PruneRule
from .core_model import DEFAULT_WINDOW_INNER, DEFAULT_WINDOW_OUTER, ModelParams
from .exceptions import ConfigError
from .parallel import default_workers

logger = logging.getLogger(__name__)

COMMANDS = (
    "simulate",
    "tail",
    "mallein",
    "right-tail",
    "verify",
    "zstat",
    "couple",
    "bramson",
    "render",
    "fkpp",
)
FORMATS = ("csv", "json")

# commands whose ell is the short time of the good-particle construction
_WINDOW_ELL_COMMANDS = {"simulate", "tail", "mallein", "right-tail", "verify", "zstat", "render", "fkpp"}


@dataclass
class ModelBlock:
    d: int = 2
    t: float = 12.0
    L: float = 9.0
    ell: float = 1.0
    z: Optional[float] = None
    y: float = 1.0
    y_grid: Tuple[float, ...] = (1.0, 1.5, 2.0, 2.5, 3.0)
    z_grid: Optional[Tuple[float, ...]] = None
    ell_grid: Tuple[float, ...] = (8.0, 16.0)
    w_grid: Tuple[float, ...] = (1.0, 2.0, 3.0)
    x0: float = 200.0
    K: float = 1.0


@dataclass
class SimulationBlock:
    grid_step: float = 0.01
    path_grid_step: float = 1e-3
    prune: bool = False
    prune_K: float = 40.0
    prune_beta: float = 0.0
    population: Optional[int] = None
    population_cap: int = DEFAULT_POPULATION_CAP
    window_inner: float = DEFAULT_WINDOW_INNER
    window_outer: float = DEFAULT_WINDOW_OUTER


@dataclass
class McBlock:
    n: int = 2000
    seed: int = 20240601
    workers: int = field(default_factory=default_workers)


@dataclass
class OutputBlock:
    out: str = "results"
    format: str = "csv"


_BLOCKS = {"model": ModelBlock, "simulation": SimulationBlock, "mc": McBlock, "output": OutputBlock}
_KEY_BLOCK = {f.name: block for block, cls in _BLOCKS.items() for f in fields(cls)}
# not part of the digest: they never change numeric results
_NON_NUMERIC_KEYS = {"workers", "out", "format"}


def _parse_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _coerce(key: str, value: Any) -> Any:
    """Convert a raw value (string from a file or flag) to the type of key."""
    hint = typing.get_type_hints(_BLOCKS[_KEY_BLOCK[key]])[key]
    args = typing.get_args(hint)
    if type(None) in args:
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
            return None
        hint = next(a for a in args if a is not type(None))
        args = typing.get_args(hint)
    try:
        if typing.get_origin(hint) is tuple:
            items = value.split(",") if isinstance(value, str) else list(value)
            return tuple(float(item) for item in items if str(item).strip())
        if hint is bool:
            return _parse_bool(key, value)
        if hint is int:
            if isinstance(value, int) or (isinstance(value, str) and value.strip().isdigit()):
                return int(value)
            number = float(value)
            if number != int(number):
                raise ValueError
            return int(number)
        if hint is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {getattr(hint, '__name__', hint)}")


def _flatten(data: Mapping[str, Any]) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if key in _BLOCKS and isinstance(value, Mapping):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def _read_key_value(text: str) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        data[key] = value
    return data


def _canonical(value: Any) -> Any:
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


@dataclass
class ExperimentConfig:
    """Parameters of one experiment, grouped by concern."""

    model: ModelBlock = field(default_factory=ModelBlock)
    simulation: SimulationBlock = field(default_factory=SimulationBlock)
    mc: McBlock = field(default_factory=McBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """Build a config from a flat (or one-level nested) mapping over the defaults."""
        return cls().with_overrides(**_flatten(data))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        """
        Load a config file: JSON (.json), YAML (.yaml/.yml) or flat key=value.

        Raises:
            ConfigError: If the file cannot be read or holds unknown keys
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        suffix = path.suffix.lower()
        try:
            if suffix == ".json":
                data = json.loads(text)
            elif suffix in (".yaml", ".yml"):
                data = yaml.safe_load(text) or {}
            else:
                data = _read_key_value(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot parse config {path}: {e}")
        if not isinstance(data, Mapping):
            raise ConfigError(f"config {path} must hold a mapping")
        logger.info(f"Loaded configuration from {path}")
        return cls.from_mapping(data)

    def with_overrides(self, **values: Any) -> "ExperimentConfig":
        """Return a copy with flat keys replaced; None values are ignored."""
        updates: Dict[str, Dict[str, Any]] = {name: {} for name in _BLOCKS}
        for key, value in values.items():
            if value is None:
                continue
            if key not in _KEY_BLOCK:
                raise ConfigError(f"unknown configuration key {key!r}")
            updates[_KEY_BLOCK[key]][key] = _coerce(key, value)
        return ExperimentConfig(
            **{name: replace(getattr(self, name), **updates[name]) for name in _BLOCKS}
        )

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: asdict(getattr(self, name)) for name in _BLOCKS}

    def flat(self) -> Dict[str, Any]:
        return _flatten(self.to_dict())

    def digest(self) -> str:
        """First 16 hex chars of the SHA-256 of the canonical JSON of the numeric settings."""
        data = {k: _canonical(v) for k, v in self.flat().items() if k not in _NON_NUMERIC_KEYS}
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.model.d)

    @property
    def z(self) -> float:
        """The configured z, defaulting to 2 L^(1/6)."""
        return self.model.z if self.model.z is not None else 2.0 * self.model.L ** (1 / 6)

    @property
    def z_grid(self) -> Tuple[float, ...]:
        """The configured z grid, defaulting to (2 L^(1/6), L^(1/2))."""
        if self.model.z_grid is not None:
            return self.model.z_grid
        return (2.0 * self.model.L ** (1 / 6), self.model.L**0.5)

    @property
    def pruning(self) -> Optional[PruneRule]:
        if not self.simulation.prune:
            return None
        return PruneRule(beta=self.simulation.prune_beta, K=self.simulation.prune_K)

    def validate(self, command: str) -> None:
        """
        Check every numeric range before anything is simulated.

        Raises:
            ConfigError: Naming the offending key, its value and the admissible range
        """
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
        m, s, mc, out = self.model, self.simulation, self.mc, self.output

        def require(ok: bool, message: str) -> None:
            if not ok:
                raise ConfigError(message)

        require(m.d >= 1, f"d={m.d} must be an integer >= 1")
        require(m.t > 1, f"t={m.t} must be > 1")
        require(m.L >= 1, f"L={m.L} must be >= 1")
        require(
            0 < s.window_inner < 0.25,
            f"window_inner={s.window_inner} outside (0, 1/4)",
        )
        require(
            0.5 < s.window_outer < 1,
            f"window_outer={s.window_outer} outside (1/2, 1)",
        )
        lo_z, hi_z = m.L**s.window_inner, m.L**s.window_outer
        if command in _WINDOW_ELL_COMMANDS:
            top_ell = m.L ** (1 / 6)
            require(
                1 <= m.ell <= top_ell + 1e-12,
                f"ell={m.ell} outside [1, L^(1/6)] = [1, {top_ell:.6g}]",
            )
        else:
            require(m.ell > 0, f"ell={m.ell} must be > 0")
        for name, z in [("z", self.z)] + [("z_grid", z) for z in self.z_grid]:
            require(
                lo_z - 1e-12 <= z <= hi_z + 1e-12,
                f"{name}={z:.6g} outside the window range [L^{s.window_inner:g}, L^{s.window_outer:g}] "
                f"= [{lo_z:.6g}, {hi_z:.6g}]",
            )
        if command == "right-tail":
            require(m.t > m.L, f"t={m.t} must exceed L={m.L}")
        if command == "mallein":
            top = math.sqrt(m.t)
            for y in m.y_grid:
                require(1 <= y <= top, f"y_grid value {y} outside [1, sqrt(t)] = [1, {top:.6g}]")
        require(s.grid_step > 0, f"grid_step={s.grid_step} must be > 0")
        require(s.path_grid_step > 0, f"path_grid_step={s.path_grid_step} must be > 0")
        require(s.population is None or s.population >= 1, f"population={s.population} must be >= 1")
        require(s.population_cap >= 1, f"population_cap={s.population_cap} must be >= 1")
        require(mc.n >= 1, f"n={mc.n} must be >= 1")
        require(mc.workers >= 1, f"workers={mc.workers} must be >= 1")
        require(0 <= mc.seed < 2**64, f"seed={mc.seed} must be a 64-bit unsigned integer")
        require(out.format in FORMATS, f"format={out.format!r} must be one of {', '.join(FORMATS)}")
        if command == "bramson":
            require(min(m.ell_grid, default=0) >= 8, f"ell_grid={m.ell_grid} must contain values >= 8")
        if command == "couple":
            require(m.x0 > 0, f"x0={m.x0} must be > 0")
