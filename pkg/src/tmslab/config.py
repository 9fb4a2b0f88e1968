"""Experiment configuration: INI files, environment overrides and validation.

A configuration file looks like::

    [experiment]
    command = stm3
    id = stm3-alpha0

    [grid]
    n = 512
    p_min = 1e-4
    p_max = 1e4

    [physics]
    alpha = 0
    lambda = 1
    mass = 1
    ell = 0, 1
    levels = 4

    [tolerances]
    s0_spread = 0.01

    [run]
    out = results
    threads = 8

Unknown sections, keys and tolerance names are rejected before any
computation starts.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

from .errors import ParameterError

__all__ = [
    "COMMANDS",
    "TOLERANCE_DEFAULTS",
    "ENV_OUT",
    "ENV_THREADS",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "apply_environment",
]

COMMANDS = ("twobody", "stm3", "fermi21", "kvb", "report")
ENV_OUT = "TMSLAB_OUT"
ENV_THREADS = "TMSLAB_THREADS"

# acceptance thresholds per command, overridable with --tol-<name>
TOLERANCE_DEFAULTS = {
    "twobody": {"roundtrip": 1e-15, "tms_ratio": 1e-12, "bound_state": 1e-10,
                "shell": 1e-3, "decay_rate": 0.1},
    "stm3": {"s0_spread": 0.01, "danilov": 0.02, "rescale": 0.01},
    "fermi21": {"ball": 1e-3, "squared_ball": 1e-12, "scalar_product": 1e-6, "a_symmetry": 1e-10,
                "shell21": 1e-3, "bounded_variation": 0.05, "increments": 0.1,
                "norm_window": 0.1, "m_crit": 1e-2},
    "kvb": {"krein": 1e-12, "decomposition": 1e-8},
    "report": {},
}

_SCHEMA = {
    "experiment": {"command", "id"},
    "grid": {"n", "p_min", "p_max", "scheme"},
    "physics": {"alpha", "lambda", "mass", "ell", "levels", "seed"},
    "tolerances": None,  # checked against TOLERANCE_DEFAULTS
    "run": {"out", "threads"},
}


class ConfigError(ParameterError):
    """Malformed or inconsistent configuration."""


def _default_threads():
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    experiment_id: str = ""
    grid_n: int = 512
    p_min: float = 1e-4
    p_max: float = 1e4
    scheme: str = "gauss-legendre-composite"
    alpha: float = 0.0
    lam: float = 1.0
    mass: float = 1.0
    ell: tuple = (0, 1, 2, 3)
    levels: int = 4
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    out: str = "tmslab-out"
    threads: int = field(default_factory=_default_threads)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if not self.experiment_id:
            object.__setattr__(self, "experiment_id", self.command)
        if any(c in self.experiment_id for c in "/\\") or self.experiment_id in (".", ".."):
            raise ConfigError("experiment id must be a plain directory name")
        if self.grid_n < 8:
            raise ConfigError("grid n must be at least 8")
        if not 0 < self.p_min < self.p_max:
            raise ConfigError("need 0 < p_min < p_max")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if not self.mass > 0:
            raise ConfigError("mass must be positive")
        if self.levels < 1:
            raise ConfigError("levels must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        ell = tuple(int(e) for e in self.ell)
        if not ell or any(e < 0 for e in ell):
            raise ConfigError("ell must be a non-empty list of non-negative integers")
        object.__setattr__(self, "ell", ell)
        known = TOLERANCE_DEFAULTS[self.command]
        unknown = set(self.tolerances) - set(known)
        if unknown:
            raise ConfigError(f"unknown tolerance(s) for {self.command}: {sorted(unknown)}")
        object.__setattr__(self, "tolerances", {**known, **{k: float(v) for k, v in self.tolerances.items()}})

    def tol(self, name) -> float:
        return self.tolerances[name]

    def inputs(self) -> dict:
        """Echo of everything that determines the results (not output location or threads)."""
        return {
            "command": self.command,
            "grid": {"n": self.grid_n, "p_min": self.p_min, "p_max": self.p_max, "scheme": self.scheme},
            "physics": {"alpha": self.alpha, "lambda": self.lam, "mass": self.mass,
                        "ell": list(self.ell), "levels": self.levels, "seed": self.seed},
            "tolerances": dict(sorted(self.tolerances.items())),
        }


def _parse_ell(text):
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad ell list {text!r}") from exc


def _num(section, key, value, kind):
    try:
        return kind(value)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {value!r}") from exc


def load_config(path, command=None) -> dict:
    """Read an INI file into keyword arguments for :class:`ExperimentConfig`.

    ``command`` (from the command line) fills in a missing ``[experiment]
    command``; a file that names a different command is an error.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not parser.sections():
        raise ConfigError(f"{path}: no sections found")
    kw = {}
    tolerances = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        allowed = _SCHEMA[section]
        for key, value in parser.items(section):
            if allowed is not None and key not in allowed:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            if section == "tolerances":
                tolerances[key] = _num(section, key, value, float)
            elif section == "experiment":
                kw["command" if key == "command" else "experiment_id"] = value.strip()
            elif section == "grid":
                kw["grid_n" if key == "n" else key] = (
                    value.strip() if key == "scheme" else _num(section, key, value, int if key == "n" else float))
            elif section == "physics":
                if key == "ell":
                    kw["ell"] = _parse_ell(value)
                elif key in ("levels", "seed"):
                    kw[key] = _num(section, key, value, int)
                else:
                    kw["lam" if key == "lambda" else key] = _num(section, key, value, float)
            else:
                kw[key] = _num(section, key, value, int) if key == "threads" else value.strip()
    if tolerances:
        kw["tolerances"] = tolerances
    file_cmd = kw.get("command")
    if command is not None and file_cmd is not None and file_cmd != command:
        raise ConfigError(f"{path}: file is for {file_cmd!r}, not {command!r}")
    kw["command"] = file_cmd or command
    if kw["command"] is None:
        raise ConfigError(f"{path}: no command given")
    return kw


def apply_environment(config: ExperimentConfig, environ=None) -> ExperimentConfig:
    """Apply the output-directory and thread-count environment overrides."""
    environ = os.environ if environ is None else environ
    changes = {}
    if environ.get(ENV_OUT):
        changes["out"] = environ[ENV_OUT]
    if environ.get(ENV_THREADS):
        try:
            changes["threads"] = int(environ[ENV_THREADS])
        except ValueError as exc:
            raise ConfigError(f"{ENV_THREADS} must be an integer") from exc
    return replace(config, **changes) if changes else config
