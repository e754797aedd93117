"""Run configuration: a YAML file with model/time/grid/mc/check sections."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import yaml

from .coefficients import FAMILIES, CoefficientModel, from_family

__all__ = ["ConfigError", "RunConfig", "ModelSection", "TimeSection", "GridSection",
           "MCSection", "CheckSection", "CHECK_NAMES", "load_config", "dump_config"]

CHECK_NAMES = ("siegmund", "weak_identity", "weak_rate", "strong_bound", "gronwall",
               "zero_occupation", "property_suite")


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass
class ModelSection:
    family: str = "constant"
    params: dict = field(default_factory=lambda: {"sigma": 1.0, "b": 0.0})

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"model.family must be one of {sorted(FAMILIES)}")
        if not isinstance(self.params, dict):
            raise ConfigError("model.params must be a mapping")


@dataclass
class TimeSection:
    T: float = 1.0
    n: int = 64
    r: int = 6

    def validate(self):
        _positive("time.T", self.T)
        _positive_int("time.n", self.n)
        _nonneg_int("time.r", self.r)


@dataclass
class GridSection:
    x_max: float = 4.0
    grid_points: int = 1000
    min_point: float = 1e-3

    def validate(self):
        _positive("grid.x_max", self.x_max)
        _positive_int("grid.grid_points", self.grid_points)
        _positive("grid.min_point", self.min_point)
        if self.min_point >= self.x_max:
            raise ConfigError("grid.min_point must be below grid.x_max")


@dataclass
class MCSection:
    n_samples: int = 10_000
    seed: int = 0
    workers: Optional[int] = None

    def validate(self):
        _positive_int("mc.n_samples", self.n_samples)
        if self.n_samples < 2:
            raise ConfigError("mc.n_samples must be at least 2")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("mc.seed must be a nonnegative integer")
        if self.workers is not None:
            _positive_int("mc.workers", self.workers)


@dataclass
class CheckSection:
    checks: List[str] = field(default_factory=lambda: ["property_suite"])
    pairs: List[List[float]] = field(default_factory=lambda: [[0.5, 0.5]])
    joint: bool = False
    f_R: float = 2.0
    x: float = 0.5
    K: float = 1.0
    n_list: List[int] = field(default_factory=lambda: [4, 8, 16, 32, 64])
    b_prime_sup: Optional[float] = None
    t: float = 1.0
    x0: float = 0.1
    property_pairs: int = 1000

    def validate(self):
        if not self.checks:
            raise ConfigError("check.checks must list at least one check")
        for c in self.checks:
            if c not in CHECK_NAMES:
                raise ConfigError(f"unknown check {c!r}; choose from {list(CHECK_NAMES)}")
        for p in self.pairs:
            if len(p) != 2 or not all(_is_num(v) and v > 0 for v in p):
                raise ConfigError("check.pairs entries must be [x, y] with x, y > 0")
        for name in ("f_R", "x", "K", "t", "x0"):
            _positive(f"check.{name}", getattr(self, name))
        for v in self.n_list:
            _positive_int("check.n_list entry", v)
        if len(self.n_list) < 4 or sorted(set(self.n_list)) != list(self.n_list):
            raise ConfigError("check.n_list needs at least 4 strictly increasing entries")
        if any(v % self.n_list[0] or (v // self.n_list[0]) & (v // self.n_list[0] - 1)
               for v in self.n_list):
            raise ConfigError("check.n_list entries must be power-of-two multiples of the first")
        if self.b_prime_sup is not None and not (_is_num(self.b_prime_sup)
                                                 and self.b_prime_sup >= 0):
            raise ConfigError("check.b_prime_sup must be a nonnegative number")
        _positive_int("check.property_pairs", self.property_pairs)


_SECTIONS = {"model": ModelSection, "time": TimeSection, "grid": GridSection,
             "mc": MCSection, "check": CheckSection}


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    time: TimeSection = field(default_factory=TimeSection)
    grid: GridSection = field(default_factory=GridSection)
    mc: MCSection = field(default_factory=MCSection)
    check: CheckSection = field(default_factory=CheckSection)

    def validate(self) -> "RunConfig":
        for name in _SECTIONS:
            getattr(self, name).validate()
        try:
            self.build_model()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from None
        return self

    def build_model(self) -> CoefficientModel:
        return from_family(self.model.family, **self.model.params)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping of sections")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown section(s): {sorted(unknown)}")
        kw = {}
        for name, typ in _SECTIONS.items():
            sec = data.get(name) or {}
            if not isinstance(sec, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            allowed = {f.name for f in fields(typ)}
            bad = set(sec) - allowed
            if bad:
                raise ConfigError(f"unknown key(s) in {name}: {sorted(bad)}")
            kw[name] = typ(**sec)
        return cls(**kw).validate()


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive(name, v):
    if not _is_num(v) or not v > 0:
        raise ConfigError(f"{name} must be a positive number (got {v!r})")


def _positive_int(name, v):
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{name} must be a positive integer (got {v!r})")


def _nonneg_int(name, v):
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise ConfigError(f"{name} must be a nonnegative integer (got {v!r})")


def load_config(path=None, text: Optional[str] = None) -> RunConfig:
    """Parse a YAML config from ``path`` or ``text``; no source gives the defaults."""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    if text is None:
        return RunConfig().validate()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
