"""Strict ``section.key = value`` text format shared by configs and scene specs."""

from __future__ import annotations

import math
from pathlib import Path


class ConfigError(ValueError):
    """Malformed or invalid configuration text."""


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``section.key = value`` lines into an ordered mapping.

    Blank lines and ``#`` comments are ignored. Duplicate keys, missing
    ``=`` and keys without a section prefix are errors.
    """
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in stripped.split("=", 1))
        parts = key.split(".")
        if len(parts) < 2 or not all(parts):
            raise ConfigError(f"{source}:{lineno}: key {key!r} needs a section prefix")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if value == "":
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        out[key] = value
    return out


def read_kv(path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{p}: not a text config") from exc
    return parse_kv(text, str(p))


def to_float(key: str, value: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: value must be finite")
    return x


def to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def to_bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def to_floats(key: str, value: str) -> tuple[float, ...]:
    return tuple(to_float(key, v.strip()) for v in value.split(","))


def to_ints(key: str, value: str) -> tuple[int, ...]:
    return tuple(to_int(key, v.strip()) for v in value.split(","))


def fmt(value) -> str:
    """Render a value back into the text dialect."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(fmt(v) for v in value)
    return str(value)
