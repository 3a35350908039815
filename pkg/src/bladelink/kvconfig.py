"""Flat ``name = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Values are returned as strings;
callers convert and validate them against their own key sets.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'name = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_kv(path: str | Path) -> dict[str, str]:
    path = Path(path)
    return parse_kv(path.read_text(), str(path))


def dump_kv(values: dict[str, object]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def check_keys(values: dict[str, str], allowed, source: str = "<config>") -> None:
    unknown = sorted(set(values) - set(allowed))
    if unknown:
        raise ConfigError(f"{source}: unknown keys: {', '.join(unknown)}")


def as_float(values: dict[str, str], key: str, source: str = "<config>") -> float:
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(f"{source}: {key} = {values[key]!r} is not a number") from None
