"""Run configuration: flat TOML file, command-line overrides on top."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cv import DEFAULT_SEEDS, SeedPlan
from .errors import ConfigError, DataIOError, ValidationError
from .forest import ForestConfig


@dataclass(frozen=True)
class RunConfig:
    dataset: str | None = None
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    n_folds: int = 5
    n_bags: int = 10
    n_trees: int = 500
    mtry: int | None = None
    min_node_size: int = 1
    max_depth: int | None = None
    bootstrap_fraction: float = 1.0
    corr_threshold: float = 0.75
    alpha_grid_step: float = 0.001
    median_window: int = 9
    bandwidth: str = "silverman"  # "silverman" or a positive number
    confidence_cutoff: float = 0.8
    output_dir: str = "out"
    threads: int = 1
    save_models: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        checks = [
            (self.n_folds >= 2, "n_folds must be >= 2"),
            (self.n_bags >= 1, "n_bags must be >= 1"),
            (0 < self.corr_threshold <= 1, "corr_threshold must lie in (0, 1]"),
            (0 < self.alpha_grid_step <= 0.1, "alpha_grid_step must lie in (0, 0.1]"),
            (self.median_window >= 1 and self.median_window % 2 == 1,
             "median_window must be odd and >= 1"),
            (0 <= self.confidence_cutoff <= 1, "confidence_cutoff must lie in [0, 1]"),
            (self.threads >= 1, "threads must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.bandwidth != "silverman":
            try:
                h = float(self.bandwidth)
            except ValueError:
                raise ConfigError(f"bandwidth must be 'silverman' or a number, got {self.bandwidth!r}")
            if not h > 0:
                raise ConfigError("bandwidth must be positive")
        try:
            self.forest_config()
            self.seed_plan()
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None

    def forest_config(self) -> ForestConfig:
        return ForestConfig(self.n_trees, self.mtry, self.min_node_size, self.max_depth,
                            self.bootstrap_fraction)

    def seed_plan(self) -> SeedPlan:
        return SeedPlan(self.seeds)

    def bandwidth_rule(self):
        return "silverman" if self.bandwidth == "silverman" else float(self.bandwidth)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


KEYS = {f.name for f in fields(RunConfig)}


_TYPES = {
    "dataset": (str,), "output_dir": (str,), "save_models": (bool,),
    "bootstrap_fraction": (int, float), "corr_threshold": (int, float),
    "alpha_grid_step": (int, float), "confidence_cutoff": (int, float),
}


def _coerce(key: str, value):
    if key == "seeds":
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, int) for v in value):
            raise ConfigError("seeds must be a list of integers")
        return tuple(value)
    if key == "bandwidth":
        return str(value)
    expected = _TYPES.get(key, (int,))
    if not isinstance(value, expected) or (isinstance(value, bool) and bool not in expected):
        raise ConfigError(f"{key}: unexpected value {value!r}")
    return value


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a flat TOML file (optional) and apply non-None overrides."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot read config {path}: {exc.strerror}") from exc
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        unknown = sorted(set(raw) - KEYS)
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
        values.update({k: _coerce(k, v) for k, v in raw.items()})
    for k, v in (overrides or {}).items():
        if v is not None:
            if k not in KEYS:
                raise ConfigError(f"unknown setting {k}")
            values[k] = _coerce(k, v)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
