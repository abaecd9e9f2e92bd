"""
Parsing, canonical serialization and hashing of simulation configurations.
"""

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from app.exceptions import ConfigurationError
from app.models.sim_config import SimConfig
from app.utils.logger import setup_logger

logger = setup_logger("config_parser")


def _dotted(loc: tuple[int | str, ...]) -> str:
    return ".".join(str(part) for part in loc) or "config"


class ConfigParser:
    """Reads TOML or JSON configuration text into a validated SimConfig."""

    def parse(self, text: str) -> SimConfig:
        """
        Parse configuration text.

        JSON is recognised by a leading '{'; anything else is read as TOML.

        Raises:
            ConfigurationError: On syntax errors, unknown keys or out-of-range
                values; the message starts with the dotted key path
        """
        data = self._load(text)
        try:
            config = SimConfig.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            key = _dotted(tuple(first["loc"]))
            message = first["msg"]
            if first["type"] == "extra_forbidden":
                message = "unknown key"
            logger.error("Invalid configuration at %s: %s", key, message)
            raise ConfigurationError(key, message) from e
        logger.debug("Parsed configuration with grid %s", config.grid.cells)
        return config

    @staticmethod
    def _load(text: str) -> dict[str, Any]:
        stripped = text.lstrip()
        try:
            if stripped.startswith("{"):
                data = json.loads(stripped)
            else:
                data = tomllib.loads(text)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
            logger.error("Configuration text is not valid TOML or JSON: %s", e)
            raise ConfigurationError("config", f"cannot parse configuration: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("config", "top level must be a table")
        return data

    @staticmethod
    def serialize(config: SimConfig) -> str:
        """Canonical JSON: every field, sorted keys, no trailing whitespace."""
        return json.dumps(config.model_dump(mode="json"), sort_keys=True, indent=2)

    def load(self, path: str | Path) -> SimConfig:
        """Read and parse a configuration file."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            logger.error("Cannot read configuration %s: %s", path, e)
            raise ConfigurationError("config", f"cannot read {path}: {e}") from e
        return self.parse(text)

    def config_hash(self, config: SimConfig) -> str:
        """SHA-256 hex digest of the canonical JSON form."""
        return hashlib.sha256(self.serialize(config).encode("utf-8")).hexdigest()


_parser = ConfigParser()


def parse_config(text: str) -> SimConfig:
    return _parser.parse(text)


def serialize_config(config: SimConfig) -> str:
    return _parser.serialize(config)


def load_config(path: str | Path) -> SimConfig:
    return _parser.load(path)


def config_hash(config: SimConfig) -> str:
    return _parser.config_hash(config)
