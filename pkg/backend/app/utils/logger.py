"""
Logging configuration for the Keller-Segel laboratory.
"""

import logging
import sys
from pathlib import Path

from app.constants import LOG_DATE_FORMAT, LOG_FORMAT, ROOT_LOGGER_NAME

# level chosen when the project logger was configured; set_quiet(False) returns to it
_configured_level = logging.INFO


def _configure_root(level: str, log_to_file: bool) -> logging.Logger:
    global _configured_level
    root = logging.getLogger(ROOT_LOGGER_NAME)

    # Prevent duplicate handlers if logger already exists
    if root.handlers:
        return root

    _configured_level = getattr(logging, level.upper(), logging.INFO)
    root.setLevel(_configured_level)
    root.propagate = False

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATE_FORMAT)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    if log_to_file:
        try:
            log_dir = Path("logs")
            log_dir.mkdir(exist_ok=True)

            file_handler = logging.FileHandler(log_dir / "ks_lab.log")
            file_handler.setFormatter(formatter)
            root.addHandler(file_handler)
        except (OSError, PermissionError):
            # If we can't write to file, continue with console logging only
            root.warning("Could not create file handler, using console logging only")

    return root


def setup_logger(name: str = ROOT_LOGGER_NAME, level: str = "INFO") -> logging.Logger:
    """
    Set up a child of the project logger with consistent formatting.

    Args:
        name: Logger name, nested under the project logger
        level: Logging level used when the project logger is first configured

    Returns:
        Configured logger instance
    """
    # lazy: settings are read after the environment is loaded
    from app.config import get_settings

    settings = get_settings()
    root = _configure_root(settings.log_level or level, settings.log_to_file)
    if name == ROOT_LOGGER_NAME:
        return root
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")


def set_quiet(quiet: bool = True) -> None:
    """Raise the project logger threshold to WARNING (or back to the configured level)."""
    logging.getLogger(ROOT_LOGGER_NAME).setLevel(
        max(logging.WARNING, _configured_level) if quiet else _configured_level
    )


# Create default logger
logger = setup_logger()
