"""Plain-text ``key = value`` configuration with ``#`` comments.

Keys live in a flat dotted namespace (``simulate.dt = 0.001``).  Values stay
strings until a consumer converts them, so :func:`echo` followed by
:func:`parse` reproduces the same mapping exactly.
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import Mapping

from .errors import ConfigError

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*(\.[A-Za-z0-9_\-]+)*$")


def parse(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not _KEY.match(key):
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(text)


def echo(cfg: Mapping[str, str]) -> str:
    """Canonical text form: one sorted ``key = value`` line per entry."""
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))


class Section:
    """Typed access to the keys under one prefix, recording which were read."""

    def __init__(self, cfg: Mapping[str, str], prefix: str):
        self.cfg = cfg
        self.prefix = prefix
        self.used: set[str] = set()

    def _raw(self, name: str):
        key = f"{self.prefix}.{name}"
        if key in self.cfg:
            self.used.add(key)
            return self.cfg[key]
        return None

    def has(self, name: str) -> bool:
        return f"{self.prefix}.{name}" in self.cfg

    def get_str(self, name: str, default=None):
        v = self._raw(name)
        return default if v is None else v

    def get_float(self, name: str, default=None):
        v = self._raw(name)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{self.prefix}.{name}: not a number: {v!r}") from None

    def get_int(self, name: str, default=None):
        v = self._raw(name)
        if v is None:
            return default
        try:
            return int(v, 0)
        except ValueError:
            raise ConfigError(f"{self.prefix}.{name}: not an integer: {v!r}") from None

    def get_floats(self, name: str, default=None):
        v = self._raw(name)
        if v is None:
            return default
        return parse_floats(v, f"{self.prefix}.{name}")


def parse_floats(text: str, what: str = "value") -> list[float]:
    try:
        return [float(tok) for tok in re.split(r"[,\s]+", text.strip()) if tok]
    except ValueError:
        raise ConfigError(f"{what}: expected a comma-separated list of numbers, got {text!r}") from None


def reject_unknown(cfg: Mapping[str, str], used: set[str]) -> None:
    unknown = sorted(set(cfg) - used)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
