"""Layered run configuration: built-in defaults < NORMGEN_SEED env var <
key = value config file < command-line flags. Every effective value keeps a
provenance tag so a run can report where each setting came from.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

ENV_SEED_VAR = "NORMGEN_SEED"


def parse_config_file(path) -> dict:
    """Parse a plain-text `key = value` file; # starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _coerce(key: str, raw, target_type):
    if isinstance(raw, target_type) and not isinstance(raw, str):
        return raw
    try:
        if target_type is bool:
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return target_type(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"config key {key!r}: cannot parse {raw!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    values: dict
    provenance: dict  # key -> "default" | "env" | "file" | "flag"

    def __getitem__(self, key):
        return self.values[key]

    def describe(self) -> str:
        width = max(len(k) for k in self.values)
        return "\n".join(
            f"{k:<{width}} = {self.values[k]}  [{self.provenance[k]}]"
            for k in sorted(self.values)
        )


def resolve(defaults: dict, file_values: dict | None = None, flag_values: dict | None = None,
            environ=None) -> RunConfig:
    """Merge the configuration layers.

    defaults maps key -> default value (its type drives coercion).
    flag_values entries that are None count as "not given".
    """
    environ = os.environ if environ is None else environ
    file_values = file_values or {}
    flag_values = flag_values or {}

    for key in file_values:
        if key not in defaults:
            raise ConfigurationError(f"unknown config key {key!r} in config file")

    values, provenance = {}, {}
    for key, default in defaults.items():
        target_type = type(default)
        value, source = default, "default"
        if key == "seed" and ENV_SEED_VAR in environ:
            value, source = _coerce(key, environ[ENV_SEED_VAR], target_type), "env"
        if key in file_values:
            value, source = _coerce(key, file_values[key], target_type), "file"
        if flag_values.get(key) is not None:
            value, source = _coerce(key, flag_values[key], target_type), "flag"
        values[key] = value
        provenance[key] = source
    return RunConfig(values=values, provenance=provenance)
