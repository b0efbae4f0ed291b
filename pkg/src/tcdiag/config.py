"""Experiment configuration: a TOML file with three blocks (physics, mc, io),
strict validation, command-line overrides, and a lossless echo."""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMANDS = ("moments", "threshold", "negativity", "coherent-info",
            "relative-entropy", "verify", "collapse")

OUT_DIR_ENV = "TCDIAG_OUT"


@dataclass
class PhysicsBlock:
    n: int = 2
    L: list[int] = field(default_factory=lambda: [16, 24, 32])
    p_grid: list[float] = field(default_factory=lambda: [0.16, 0.17, 0.18, 0.19, 0.2])
    error_kind: str = "x"           # which single error type drives the spin model
    model: str = "flavored"         # flavored | decoupled | rbim
    region_side: int = 2            # tripartition block side for negativity
    separations: list[int] = field(default_factory=lambda: [1, 2, 3])
    endpoints: list[list[int]] = field(default_factory=lambda: [[0, 0], [1, 1]])
    order: int = 4                  # negativity Renyi order (2n)


@dataclass
class MCBlock:
    sweeps_thermalize: int = 2000
    sweeps_measure: int = 40000
    measure_interval: int = 2
    chain_count: int = 4
    seed_base: int = 1
    n_blocks: int = 16


@dataclass
class IOBlock:
    out_dir: str = ""
    format: str = "csv"             # csv | jsonl
    figures: bool = True
    workers: int = 1


@dataclass
class ExperimentConfig:
    command: str = "verify"
    level: str = "quick"            # verify level: quick | full
    physics: PhysicsBlock = field(default_factory=PhysicsBlock)
    mc: MCBlock = field(default_factory=MCBlock)
    io: IOBlock = field(default_factory=IOBlock)

    def resolved_out_dir(self) -> str:
        if self.io.out_dir:
            return self.io.out_dir
        return os.environ.get(OUT_DIR_ENV, "tcdiag-results")

    def to_dict(self) -> dict:
        return {"command": self.command, "level": self.level,
                "physics": asdict(self.physics), "mc": asdict(self.mc),
                "io": asdict(self.io)}

    def echo_toml(self) -> str:
        """Fully resolved configuration as TOML text (round-trips losslessly)."""
        lines = [_toml_kv("command", self.command), _toml_kv("level", self.level), ""]
        for block_name in ("physics", "mc", "io"):
            lines.append(f"[{block_name}]")
            for key, val in asdict(getattr(self, block_name)).items():
                lines.append(_toml_kv(key, val))
            lines.append("")
        return "\n".join(lines)


def _toml_kv(key: str, val) -> str:
    if isinstance(val, bool):
        return f"{key} = {'true' if val else 'false'}"
    if isinstance(val, (int, float)):
        return f"{key} = {val!r}"
    if isinstance(val, str):
        return f'{key} = "{val}"'
    if isinstance(val, list):
        inner = ", ".join(_toml_value(v) for v in val)
        return f"{key} = [{inner}]"
    raise ConfigError(f"cannot serialize config value {key} = {val!r}")


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value {v!r}")


def _apply_block(block, data: dict, path: str):
    known = set(asdict(block).keys())
    for key, val in data.items():
        if key not in known:
            raise ConfigError(f"unknown key '{path}.{key}'")
        current = getattr(block, key)
        if isinstance(current, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"'{path}.{key}' must be a boolean, got {val!r}")
        elif isinstance(current, int) and isinstance(val, bool):
            raise ConfigError(f"'{path}.{key}' must be an integer, got {val!r}")
        elif isinstance(current, int):
            if not isinstance(val, int):
                raise ConfigError(f"'{path}.{key}' must be an integer, got {val!r}")
        elif isinstance(current, float):
            if not isinstance(val, (int, float)):
                raise ConfigError(f"'{path}.{key}' must be a number, got {val!r}")
            val = float(val)
        elif isinstance(current, str):
            if not isinstance(val, str):
                raise ConfigError(f"'{path}.{key}' must be a string, got {val!r}")
        elif isinstance(current, list):
            if not isinstance(val, list):
                raise ConfigError(f"'{path}.{key}' must be a list, got {val!r}")
        setattr(block, key, val)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {COMMANDS}")
    ph = cfg.physics
    if ph.n < 2:
        raise ConfigError("'physics.n' must be >= 2")
    if not ph.L or any(l < 2 for l in ph.L):
        raise ConfigError("'physics.L' must list sizes >= 2")
    if sorted(ph.L) != ph.L:
        raise ConfigError("'physics.L' must be ascending")
    if not ph.p_grid:
        raise ConfigError("'physics.p_grid' must not be empty")
    grid = ph.p_grid
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("'physics.p_grid' must be strictly ascending")
    if any(not 0.0 <= p <= 0.5 for p in grid):
        raise ConfigError("'physics.p_grid' entries must lie in [0, 1/2]")
    if ph.error_kind not in ("x", "z"):
        raise ConfigError("'physics.error_kind' must be 'x' or 'z'")
    if ph.model not in ("flavored", "decoupled", "rbim"):
        raise ConfigError("'physics.model' must be flavored, decoupled or rbim")
    if ph.order % 2 != 0 or ph.order < 4:
        raise ConfigError("'physics.order' must be an even integer >= 4")
    mc = cfg.mc
    for name in ("sweeps_measure", "measure_interval", "chain_count", "n_blocks"):
        if getattr(mc, name) < 1:
            raise ConfigError(f"'mc.{name}' must be positive")
    if mc.sweeps_thermalize < 0:
        raise ConfigError("'mc.sweeps_thermalize' must be non-negative")
    if not 0 <= mc.seed_base < 2 ** 64:
        raise ConfigError("'mc.seed_base' must be a 64-bit unsigned integer")
    if cfg.io.format not in ("csv", "jsonl"):
        raise ConfigError("'io.format' must be 'csv' or 'jsonl'")
    if cfg.io.workers < 1:
        raise ConfigError("'io.workers' must be positive")
    if cfg.level not in ("quick", "full"):
        raise ConfigError("'level' must be 'quick' or 'full'")
    return cfg


def load_config(path: str | None = None, overrides: dict | None = None,
                command: str | None = None) -> ExperimentConfig:
    """Build a validated config from an optional TOML file plus overrides
    (flags win over file values, which win over defaults)."""
    cfg = ExperimentConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}")
        for key in data:
            if key not in ("command", "level", "physics", "mc", "io"):
                raise ConfigError(f"unknown key '{key}'")
        if "command" in data:
            cfg.command = data["command"]
        if "level" in data:
            cfg.level = data["level"]
        for block in ("physics", "mc", "io"):
            if block in data:
                if not isinstance(data[block], dict):
                    raise ConfigError(f"'{block}' must be a table")
                _apply_block(getattr(cfg, block), data[block], block)
    if command is not None:
        cfg.command = command
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "seed":
            cfg.mc.seed_base = val
        elif key == "chains":
            cfg.mc.chain_count = val
        elif key == "out":
            cfg.io.out_dir = val
        elif key == "format":
            cfg.io.format = val
        elif key == "workers":
            cfg.io.workers = val
        elif key == "level":
            cfg.level = val
        else:
            raise ConfigError(f"unknown override {key!r}")
    return validate(cfg)
