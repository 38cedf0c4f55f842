"""Run configuration: JSON file plus key=value overrides.

Each subcommand owns a defaults dict. A config file may set any subset
of those keys; `--set key=value` overrides win over the file. Unknown
keys are rejected, and the fully resolved config is echoed into the
output directory so a run can be reproduced from it.
"""

from __future__ import annotations

import json
from pathlib import Path


class ConfigError(ValueError):
    pass


def _coerce(value: str, template):
    """Parse an override string into the type of the default value."""
    if isinstance(template, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if isinstance(template, int) and not isinstance(template, bool):
        return int(value)
    if isinstance(template, float):
        return float(value)
    if isinstance(template, (list, tuple)):
        return json.loads(value)
    if template is None:
        try:
            return json.loads(value)
        except json.JSONDecodeError:
            return value
    return value


def resolve(defaults: dict, config_path=None, overrides=()) -> dict:
    """Merge defaults <- config file <- --set overrides."""
    cfg = dict(defaults)
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {config_path}: {e}")
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key not in defaults:
                raise ConfigError(f"unknown config key: {key!r}")
            cfg[key] = value
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in defaults:
            raise ConfigError(f"unknown config key: {key!r}")
        try:
            cfg[key] = _coerce(raw.strip(), defaults[key])
        except (ValueError, json.JSONDecodeError) as e:
            raise ConfigError(f"bad value for {key!r}: {e}")
    return cfg


def echo(cfg: dict, outdir) -> Path:
    """Write the resolved config next to the run outputs."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "config.json"
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return path
