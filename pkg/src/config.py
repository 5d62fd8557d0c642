"""
Configuration for solvers and the command line.
Settings come from built-in defaults, an INI config file, and flags.
"""

from __future__ import annotations

import configparser
import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_M_MAX = 200
DEFAULT_THETA_GRID = 33
DEFAULT_BOX_FLOOR = 1e-12
DEFAULT_SCAN_INTERVALS = 4096
DEFAULT_XTOL = 1e-12
DEFAULT_ENUM_BUDGET = 2 ** 24
DEFAULT_KEY_EPSILON = 1e-8
DEFAULT_STARTS = 100
DEFAULT_SEED = 0

# Only environment variable the tool reads
THREADS_ENV = "HC_THREADS"

MODEL_SECTIONS = ("diamond", "stick", "gun", "key")

DEFAULT_SETTINGS: Dict[str, Any] = {
    "k": 2,
    "tol": DEFAULT_TOL,
    "m_max": DEFAULT_M_MAX,
    "theta_grid": DEFAULT_THETA_GRID,
    "box_floor": DEFAULT_BOX_FLOOR,
    "intervals": DEFAULT_SCAN_INTERVALS,
    "budget": DEFAULT_ENUM_BUDGET,
    "epsilon": DEFAULT_KEY_EPSILON,
    "starts": DEFAULT_STARTS,
    "seed": DEFAULT_SEED,
    "n": 2,
}


def _unit_open(value: str) -> float:
    x = float(value)
    if not 0.0 < x < 1.0:
        raise ValueError(f"{x} not in (0,1)")
    return x


def _unit_closed(value: str) -> float:
    x = float(value)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{x} not in [0,1]")
    return x


def _positive_float(value: str) -> float:
    x = float(value)
    if not x > 0.0:
        raise ValueError(f"{x} not positive")
    return x


def _int_at_least(lower: int) -> Callable[[str], int]:
    def parse(value: str) -> int:
        n = int(value)
        if n < lower:
            raise ValueError(f"{n} < {lower}")
        return n
    return parse


VALIDATORS: Dict[str, Callable[[str], Any]] = {
    "alpha": _unit_open,
    "beta": _unit_open,
    "a": _unit_open,
    "b": _unit_open,
    "c": _unit_open,
    "d": _unit_closed,
    "k": _int_at_least(1),
    "n": _int_at_least(0),
    "tol": _positive_float,
    "m_max": _int_at_least(1),
    "theta_grid": _int_at_least(2),
    "box_floor": _positive_float,
    "intervals": _int_at_least(2),
    "budget": _int_at_least(1),
    "epsilon": _positive_float,
    "starts": _int_at_least(1),
    "seed": int,
}


def get_config_dir() -> Path:
    """Get the configuration directory path (``config/`` next to ``src/``)."""
    return Path(__file__).parent.parent / "config"


def load_config_file(file_path: str) -> Optional[configparser.ConfigParser]:
    """Load an INI config file. Returns None if the file is missing or unparsable."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except (FileNotFoundError, configparser.Error, IOError) as exc:
        logger.warning("Config file %s ignored: %s", file_path, exc)
        return None
    return parser


def _validated(section: Mapping[str, str], where: str) -> Dict[str, Any]:
    validated: Dict[str, Any] = {}
    for key, raw in section.items():
        parse = VALIDATORS.get(key)
        if parse is None:
            logger.warning("Unknown setting '%s' in [%s], ignored", key, where)
            continue
        try:
            validated[key] = parse(raw)
        except ValueError as exc:
            logger.warning("Invalid value for '%s' in [%s] (%s), using default", key, where, exc)
    return validated


def load_settings(model: Optional[str], file_path: Optional[str] = None,
                  overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """
    Resolve settings for ``model``.
    Precedence: overrides (flags) > [model] section > [defaults] section > built-ins.
    ``None`` values in overrides mean "flag not given".
    """
    settings = dict(DEFAULT_SETTINGS)
    if file_path:
        parser = load_config_file(file_path)
        if parser is not None:
            if parser.has_section("defaults"):
                settings.update(_validated(parser["defaults"], "defaults"))
            if model and parser.has_section(model):
                settings.update(_validated(parser[model], model))
    for key, value in (overrides or {}).items():
        if value is not None:
            settings[key] = value
    return settings


def thread_count() -> int:
    """Worker count from ``HC_THREADS``; falls back to 1 on bad values."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
        if n < 1:
            raise ValueError(raw)
        return n
    except ValueError:
        logger.warning("Invalid %s=%r, using 1 worker", THREADS_ENV, raw)
        return 1


EXAMPLE_CONFIG = """\
# Example configuration for hardcore.py
# Flags override these values; [model] sections override [defaults].

[defaults]
k = 2
tol = 1e-10
m_max = 200
theta_grid = 33
intervals = 4096

[diamond]
alpha = 0.85
beta = 0.55

[stick]
alpha = 0.9
beta = 0.1

[gun]
alpha = 0.05
beta = 0.05
a = 0.025
b = 0.025
c = 0.45
d = 0.45

[key]
alpha = 0.05
beta = 0.05
a = 0.025
b = 0.025
c = 0.95
epsilon = 1e-8
"""


def write_example_config(path: Optional[Path] = None) -> Path:
    """Write the example configuration file and return its path."""
    if path is None:
        config_dir = get_config_dir()
        config_dir.mkdir(exist_ok=True)
        path = config_dir / "hardcore_example.ini"
    with open(path, "w", encoding="utf-8") as f:
        f.write(EXAMPLE_CONFIG)
    return path
