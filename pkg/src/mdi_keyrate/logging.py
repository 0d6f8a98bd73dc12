"""Per-command rotating log files plus one shared error log.

Layout inside the log directory:
- mdi-keyrate-<command>.log: everything a CLI command and the library log while it runs
- mdi-keyrate-error.log: ERROR+ records of every command, prefixed with ``[command]``

Library modules never attach handlers themselves; they call
``logging.getLogger(__name__)`` and inherit the level of the ``mdi_keyrate`` logger.

Usage:
    from mdi_keyrate.logging import get_run_logger, setup_logging

    setup_logging(log_dir=settings.log_dir, log_level="DEBUG")
    logger = get_run_logger("scan")
    logger.info("Sweep started")
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from logging.handlers import RotatingFileHandler
from pathlib import Path

DEFAULT_LOG_DIR = Path.home() / ".local" / "state" / "mdi-keyrate" / "logs"
DEFAULT_MAX_BYTES = 5 * 1024 * 1024
DEFAULT_BACKUP_COUNT = 3

PACKAGE_LOGGER = "mdi_keyrate"
ERROR_LOG_NAME = "mdi-keyrate-error.log"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


@dataclass
class _LogState:
    """Where logs go and which handlers this module attached."""

    log_dir: Path = DEFAULT_LOG_DIR
    max_bytes: int = DEFAULT_MAX_BYTES
    backup_count: int = DEFAULT_BACKUP_COUNT
    configured: bool = False
    error_logger: logging.Logger | None = None
    run_loggers: dict[str, logging.Logger] = field(default_factory=dict)
    package_handlers: list[logging.Handler] = field(default_factory=list)

    def rotating_handler(self, filename: str) -> RotatingFileHandler:
        handler = RotatingFileHandler(
            self.log_dir / filename, maxBytes=self.max_bytes, backupCount=self.backup_count
        )
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        return handler


_state = _LogState()


class ErrorMirrorHandler(logging.Handler):
    """Copies ERROR+ records of one command into the shared error log."""

    def __init__(self, command: str) -> None:
        super().__init__(level=logging.ERROR)
        self.command = command

    def emit(self, record: logging.LogRecord) -> None:
        mirrored = logging.makeLogRecord(record.__dict__)
        mirrored.msg = f"[{self.command}] {record.getMessage()}"
        mirrored.args = None
        get_error_logger().handle(mirrored)


def setup_logging(
    log_dir: Path | None = None,
    log_level: str = "INFO",
    max_bytes: int | None = None,
    backup_count: int | None = None,
) -> None:
    """Set the log directory, rotation limits and the package log level.

    Args:
        log_dir: Directory for log files (default: ~/.local/state/mdi-keyrate/logs)
        log_level: Minimum level for ``mdi_keyrate.*`` loggers (default: INFO)
        max_bytes: Size at which a file rotates (default: 5MB)
        backup_count: Rotated files kept per log (default: 3)
    """
    _state.log_dir = log_dir or DEFAULT_LOG_DIR
    _state.max_bytes = max_bytes or DEFAULT_MAX_BYTES
    _state.backup_count = DEFAULT_BACKUP_COUNT if backup_count is None else backup_count
    _state.log_dir.mkdir(parents=True, exist_ok=True)

    level = getattr(logging, log_level.upper(), logging.INFO)
    logging.getLogger(PACKAGE_LOGGER).setLevel(level)
    _state.configured = True


def _ensure_configured() -> None:
    if not _state.configured:
        setup_logging()


def get_error_logger() -> logging.Logger:
    """The shared ERROR+ logger writing mdi-keyrate-error.log."""
    if _state.error_logger is not None:
        return _state.error_logger
    _ensure_configured()

    logger = logging.getLogger(f"{PACKAGE_LOGGER}.errors")
    logger.setLevel(logging.ERROR)
    logger.propagate = False
    if not logger.handlers:
        handler = _state.rotating_handler(ERROR_LOG_NAME)
        handler.setLevel(logging.ERROR)
        logger.addHandler(handler)

    _state.error_logger = logger
    return logger


def get_run_logger(command: str) -> logging.Logger:
    """Logger of one CLI command, writing mdi-keyrate-<command>.log.

    The command's file handler is also attached to the package logger, so
    library diagnostics land next to the command's own records.
    """
    cached = _state.run_loggers.get(command)
    if cached is not None:
        return cached
    _ensure_configured()

    safe_name = "".join(c if c.isalnum() else "-" for c in command)
    logger = logging.getLogger(f"{PACKAGE_LOGGER}.run.{safe_name}")
    logger.propagate = False

    if not logger.handlers:
        command_file = _state.rotating_handler(f"mdi-keyrate-{safe_name}.log")
        logger.addHandler(command_file)
        logger.addHandler(ErrorMirrorHandler(safe_name))
        logging.getLogger(PACKAGE_LOGGER).addHandler(command_file)
        _state.package_handlers.append(command_file)

    logger.setLevel(logging.getLogger(PACKAGE_LOGGER).level or logging.INFO)
    _state.run_loggers[command] = logger
    return logger


def reset_logging() -> None:
    """Close every handler this module attached and forget all state (tests)."""
    global _state

    package = logging.getLogger(PACKAGE_LOGGER)
    for handler in _state.package_handlers:
        package.removeHandler(handler)

    loggers = list(_state.run_loggers.values())
    if _state.error_logger is not None:
        loggers.append(_state.error_logger)
    for logger in loggers:
        for handler in logger.handlers[:]:
            handler.close()
            logger.removeHandler(handler)

    _state = _LogState()
