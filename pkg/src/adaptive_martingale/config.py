"""Run configuration: a flat file of dotted ``section.key = value`` lines.

The file is TOML restricted to dotted keys, e.g.::

    market.x0 = 100.0
    market.alpha = 0.04
    grid.T = 1.0
    output.formats = ["csv", "json"]

Overrides given as ``section.key=value`` strings take precedence over the
file. :func:`dump_config` writes the same flat form back, and parsing that
output reproduces the config exactly.
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import dataclass, field, fields, replace

from .errors import AdaptiveMartingaleError, UsageError
from .martingale import CondExpEstimator
from .stochastic import MarketParams, TimeGrid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(UsageError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class GridConfig:
    T: float = 1.0
    n_steps: int = 12


@dataclass(frozen=True)
class SimulationConfig:
    n_paths: int = 10_000
    seed: int = 12345
    threads: int = 1


@dataclass(frozen=True)
class OptimizerConfig:
    epsilon: float = 0.005
    max_iter: int = 15
    damping: float = 0.8


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class StrategyConfig:
    policy: str = ""


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams = field(default_factory=lambda: MarketParams(100.0, 0.08, 0.04, 0.05))
    grid: GridConfig = field(default_factory=GridConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    estimator: CondExpEstimator = field(default_factory=CondExpEstimator)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)

    def time_grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.grid.T, self.grid.n_steps)


_SECTIONS = {f.name: f.default_factory().__class__ for f in fields(RunConfig)}


def _coerce(section: str, key: str, value, where: str):
    cls = _SECTIONS[section]
    ftypes = {f.name: f.type for f in fields(cls)}
    if key not in ftypes:
        raise ConfigError(f"{where}unknown field '{section}.{key}'")
    ftype = str(ftypes[key])
    try:
        if ftype == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if ftype == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if ftype == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if ftype.startswith("tuple"):
            if isinstance(value, str):
                value = [value]
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise TypeError
            return tuple(value)
        if not isinstance(value, str):
            raise TypeError
        return value
    except TypeError:
        raise ConfigError(
            f"{where}field '{section}.{key}' expects {ftype}, got {value!r}"
        ) from None


def _line_of(text: str, dotted: str) -> int | None:
    pat = re.compile(r"^\s*" + re.escape(dotted) + r"\s*=")
    for n, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return n
    return None


def _flatten(doc: dict, text: str) -> dict[str, tuple]:
    flat = {}
    for section, body in doc.items():
        if section not in _SECTIONS:
            line = next(
                (n for n, s in enumerate(text.splitlines(), 1) if s.strip().startswith(section)),
                None,
            )
            where = f"line {line}: " if line else ""
            raise ConfigError(f"{where}unknown section '{section}'")
        if not isinstance(body, dict):
            raise ConfigError(f"'{section}' must be a section of dotted keys")
        for key, value in body.items():
            dotted = f"{section}.{key}"
            line = _line_of(text, dotted)
            flat[dotted] = (value, f"line {line}: " if line else "")
    return flat


def _parse_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    key, raw = item.split("=", 1)
    return key.strip(), _parse_value(raw.strip())


def build_config(text: str = "", overrides: dict | None = None) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    flat = _flatten(doc, text)
    for dotted, value in (overrides or {}).items():
        flat[dotted] = (value, "override: ")

    parts: dict[str, dict] = {name: {} for name in _SECTIONS}
    where_of: dict[str, str] = {}
    for dotted, (value, where) in flat.items():
        section, _, key = dotted.partition(".")
        if section not in _SECTIONS or not key:
            raise ConfigError(f"{where}unknown field '{dotted}'")
        parts[section][key] = _coerce(section, key, value, where)
        where_of[dotted] = where

    cfg = RunConfig()
    for section, values in parts.items():
        try:
            built = replace(getattr(cfg, section), **values)
        except AdaptiveMartingaleError as exc:
            # validation messages lead with the offending field name
            key = next((k for k in values if str(exc).startswith(k)), None)
            where = where_of.get(f"{section}.{key}", "")
            raise ConfigError(f"{where}section '{section}': {exc}") from None
        cfg = replace(cfg, **{section: built})
    _validate(cfg, where_of)
    return cfg


def _validate(cfg: RunConfig, where_of: dict[str, str]) -> None:
    checks = [
        (cfg.grid.T > 0, "grid.T must be > 0"),
        (cfg.grid.n_steps >= 1, "grid.n_steps must be >= 1"),
        (cfg.simulation.n_paths >= 1, "simulation.n_paths must be >= 1"),
        (0 <= cfg.simulation.seed < 2**64, "simulation.seed must be an unsigned 64-bit integer"),
        (cfg.simulation.threads >= 1, "simulation.threads must be >= 1"),
        (cfg.optimizer.epsilon > 0, "optimizer.epsilon must be > 0"),
        (cfg.optimizer.max_iter >= 1, "optimizer.max_iter must be >= 1"),
        (0 < cfg.optimizer.damping <= 1, "optimizer.damping must be in (0, 1]"),
        (
            len(cfg.output.formats) > 0 and set(cfg.output.formats) <= {"csv", "json"},
            "output.formats must be a non-empty subset of [\"csv\", \"json\"]",
        ),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(where_of.get(msg.split()[0], "") + msg)


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    text = ""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return build_config(text, overrides)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_toml_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"
