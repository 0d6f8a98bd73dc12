"""Run configuration: channel, protocol and finite-size settings as flat key=value text."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, ValidationError

from mdi_keyrate.errors import ConfigurationError
from mdi_keyrate.finitekey import FiniteKeyConfig
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.protocol import EvaluationMode, ProtocolConfig

logger = logging.getLogger(__name__)

CHANNEL_KEYS = tuple(ChannelParams.model_fields)
PROTOCOL_KEYS = tuple(ProtocolConfig.model_fields)
FINITE_KEYS = tuple(FiniteKeyConfig.model_fields)
RUN_KEYS = ("mode", "output", "seed")

ALIASES: dict[str, tuple[str, ...]] = {
    "mu": ("mu_z", "mu_x"),
    "nu": ("nu_x",),
    "distance_per_arm": ("dist_a", "dist_b"),
}

YAML_SUFFIXES = (".yaml", ".yml")


class RunConfig(BaseModel):
    """Everything one evaluation needs besides process settings."""

    channel: ChannelParams = Field(default_factory=ChannelParams)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    finite: FiniteKeyConfig = Field(default_factory=FiniteKeyConfig)
    mode: EvaluationMode = Field(default=EvaluationMode.ASYMPTOTIC, description="Evaluation mode")
    output: Path | None = Field(default=None, description="Output path for scan results")
    seed: int = Field(default=7, description="Seed for quasi-random optimizer starts")

    def flat(self) -> dict[str, Any]:
        """Every setting as one flat mapping in file order, defaults included."""
        values: dict[str, Any] = {}
        values.update(self.channel.model_dump())
        values.update(self.protocol.model_dump())
        values.update(self.finite.model_dump())
        values.update({"mode": self.mode, "output": self.output, "seed": self.seed})
        return values


def _section_of(key: str) -> str:
    if key in CHANNEL_KEYS:
        return "channel"
    if key in PROTOCOL_KEYS:
        return "protocol"
    if key in FINITE_KEYS:
        return "finite"
    if key in RUN_KEYS:
        return "run"
    raise ConfigurationError(f"Unknown configuration key '{key}'", key=key)


def _expand(key: str, value: Any) -> list[tuple[str, Any]]:
    """Resolve aliases into concrete keys."""
    if key == "total_distance":
        try:
            half = float(value) / 2.0
        except (TypeError, ValueError):
            raise ConfigurationError(f"Cannot parse total_distance={value!r}", key=key) from None
        return [("dist_a", half), ("dist_b", half)]
    if key in ALIASES:
        return [(target, value) for target in ALIASES[key]]
    return [(key, value)]


def resolve_run_config(
    values: Iterable[tuple[str, Any]], base: RunConfig | None = None
) -> RunConfig:
    """Apply ``(key, value)`` pairs in order on top of ``base`` (defaults if None).

    Raises:
        ConfigurationError: On unknown keys or values that fail validation.
    """
    base = base or RunConfig()
    sections: dict[str, dict[str, Any]] = {
        "channel": base.channel.model_dump(),
        "protocol": base.protocol.model_dump(),
        "finite": base.finite.model_dump(),
        "run": {"mode": base.mode, "output": base.output, "seed": base.seed},
    }
    for raw_key, raw_value in values:
        for key, value in _expand(raw_key.strip(), raw_value):
            if key == "output" and value in ("", None):
                value = None
            sections[_section_of(key)][key] = value

    try:
        return RunConfig(
            channel=ChannelParams.model_validate(sections["channel"]),
            protocol=ProtocolConfig.model_validate(sections["protocol"]),
            finite=FiniteKeyConfig.model_validate(sections["finite"]),
            **sections["run"],
        )
    except ValidationError as e:
        error = e.errors()[0]
        loc = ".".join(str(part) for part in error["loc"]) or None
        raise ConfigurationError(f"Invalid configuration: {error['msg']}", key=loc) from e


def parse_key_values(text: str, source: str = "<text>") -> list[tuple[str, str]]:
    """Split ``key = value`` lines, dropping blanks, ``#`` comments and ``[section]`` headers.

    Raises:
        ConfigurationError: On a line without ``=`` or with an empty key.
    """
    pairs: list[tuple[str, str]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content or (content.startswith("[") and content.endswith("]")):
            continue
        key, sep, value = content.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"{source}:{line_no}: expected 'key = value', got {line!r}")
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_run_config(path: Path, base: RunConfig | None = None) -> RunConfig:
    """Load a run configuration; ``.yaml``/``.yml`` files hold a flat YAML mapping.

    Raises:
        ConfigurationError: If the file is missing, unreadable, unparsable or has
            invalid keys.
    """
    if not path.exists():
        raise ConfigurationError(f"Run configuration not found: {path}")

    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"Cannot read {path}: {e}") from e

    if path.suffix.lower() in YAML_SUFFIXES:
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse {path}: {e}") from e
        if not isinstance(data, Mapping):
            raise ConfigurationError(f"{path} must contain a flat mapping of settings")
        pairs: list[tuple[str, Any]] = [(str(k), v) for k, v in data.items()]
    else:
        pairs = list(parse_key_values(text, source=str(path)))

    config = resolve_run_config(pairs, base)
    logger.debug("Loaded run configuration from %s (%d keys)", path, len(pairs))
    return config


def apply_overrides(config: RunConfig, overrides: Iterable[str]) -> RunConfig:
    """Apply ``key=value`` strings, as given by ``--set`` on the command line."""
    pairs = []
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"Override must look like key=value, got {item!r}")
        pairs.append((key.strip(), value.strip()))
    return resolve_run_config(pairs, config)


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_run_config(config: RunConfig, *, comment_prefix: str = "") -> str:
    """Render every setting, defaults included, as key=value lines grouped by section.

    Section headers are ``[name]`` lines; with the default empty prefix they are
    not valid settings, so the loader skips lines that start with ``[``.
    With ``comment_prefix="# "`` the result is suitable as a CSV metadata header.
    """
    groups = (
        ("channel", CHANNEL_KEYS),
        ("protocol", PROTOCOL_KEYS),
        ("finite-size", FINITE_KEYS),
        ("run", RUN_KEYS),
    )
    flat = config.flat()
    lines: list[str] = []
    for title, keys in groups:
        lines.append(f"{comment_prefix}[{title}]")
        lines.extend(f"{comment_prefix}{key} = {_format_value(flat[key])}" for key in keys)
    return "\n".join(lines) + "\n"


def _yaml_value(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value


def save_run_config(path: Path, config: RunConfig) -> None:
    """Write a run configuration in the key=value format (YAML for ``.yaml``/``.yml``)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() in YAML_SUFFIXES:
        data = {
            key: _yaml_value(value) for key, value in config.flat().items() if value is not None
        }
        with open(path, "w", encoding="utf-8") as f:
            yaml.dump(data, f, default_flow_style=False, sort_keys=False)
        return
    path.write_text(dump_run_config(config), encoding="utf-8")
