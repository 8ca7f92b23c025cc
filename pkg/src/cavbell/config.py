"""Flat ``key = value`` experiment files (one key per line, '#' comments)."""

from __future__ import annotations

import configparser
from pathlib import Path


class ConfigError(ValueError):
    pass


def read_flat(text: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), delimiters=("=", ":"))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return {k: v.strip() for k, v in cp["config"].items()}


def load_flat(path: str | Path) -> dict[str, str]:
    return read_flat(Path(path).read_text(encoding="utf-8"))
