"""Plain-text key-value configuration (INI syntax, SI units).

Every section and key must be known to the schema; unknown ones raise
:class:`ConfigError` so typos never fall back to defaults silently.
Vectors are written as comma-separated numbers, e.g. ``theta1 = 1, 0, 0``.
"""

from __future__ import annotations

import configparser
import hashlib
from pathlib import Path

from .errors import ConfigError

# section -> key -> parser
SCHEMA: dict = {}


def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    return int(s)


def _vector(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def _str(s: str) -> str:
    return s.strip()


def _floats(s: str) -> tuple:
    return _vector(s)


def _points(s: str) -> tuple:
    """``x1 y1; x2 y2`` -> ((x1, y1), (x2, y2))."""
    return tuple(tuple(float(c) for c in p.split()) for p in s.split(";") if p.strip())


SCHEMA["solution"] = {
    "omega0": _float,
    "P_L": _float,
    "theta1": _vector,
    "theta2": _vector,
    "vartheta": _float,
    "mu_rot": _vector,
    "theta3": _vector,
    "L": _float,
    "rho": _float,
    "dP_du": _float,
    "zeta": _vector,
}
SCHEMA["regime"] = {"rho_L": _float, "rho_S": _float}
SCHEMA["solver"] = {
    "case": _str,
    "n": _int,
    "nx": _int,
    "ny": _int,
    "nu": _float,
    "rho": _float,
    "dt": _float,
    "t_end": _float,
    "amplitude": _float,
    "G": _float,
    "half_width": _float,
    "length": _float,
    "probes": _points,
    "snapshot_every": _int,
    "max_steps": _int,
}
SCHEMA["audit"] = {
    "grid": _int,
    "refinements": _int,
    "stop_threshold": _float,
    "t0": _float,
    "k_gh": _float,
    "tolerance": _float,
    "seeds": _points,
    "flux": _float,
}


def load_config(path) -> dict:
    """Parse ``path`` into ``{section: {key: value}}`` with typed values."""
    text = Path(path).read_text()
    return parse_config(text, source=str(path))


def parse_config(text: str, source: str = "<string>") -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case-sensitive (P_L, G)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    out = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        keys = SCHEMA[section]
        values = {}
        for key, raw in cp.items(section):
            if key not in keys:
                raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")
            try:
                values[key] = keys[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {section}.{key}: {raw!r}") from exc
        out[section] = values
    return out


def config_hash(text: str | bytes) -> str:
    if isinstance(text, str):
        text = text.encode()
    return hashlib.sha256(text).hexdigest()
