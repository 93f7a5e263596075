"""
FSR3D - Logging Configuration
Console logging on standard error (standard output carries run manifests),
an optional rotating debug file, and solver-tagged loggers.
"""

import logging
import sys
from pathlib import Path
from typing import Optional, TextIO
from logging.handlers import RotatingFileHandler

CONSOLE_FORMAT = '%(asctime)s | %(levelname)s | %(name)s | %(message)s'
FILE_FORMAT = '%(asctime)s | %(levelname)s | %(name)s | %(funcName)s:%(lineno)d | %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
LOG_FILE_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5


class ColoredFormatter(logging.Formatter):
    """Level names colored for terminals"""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
    }
    RESET = '\033[0m'

    def format(self, record):
        record = logging.makeLogRecord(record.__dict__)
        record.levelname = f"{self.COLORS.get(record.levelname, '')}{record.levelname}{self.RESET}"
        return super().format(record)


def _level(name: str) -> int:
    level = logging.getLevelName(str(name).upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level {name!r}")
    return level


def setup_logging(
    level: str = "INFO",
    log_file: Optional[str] = None,
    enable_colors: bool = True,
    stream: Optional[TextIO] = None
) -> None:
    """
    Replace the root handlers with a console handler and, when ``log_file``
    is set, a rotating file handler that always records DEBUG.

    Colors are only used when ``stream`` is a terminal, so piped logs and
    manifests stay plain text.
    """
    stream = stream or sys.stderr
    console_level = _level(level)

    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        if isinstance(handler, logging.FileHandler):
            handler.close()

    console_handler = logging.StreamHandler(stream)
    console_handler.setLevel(console_level)
    if enable_colors and getattr(stream, 'isatty', lambda: False)():
        console_handler.setFormatter(ColoredFormatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
    else:
        console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
    root_logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(log_path, maxBytes=LOG_FILE_BYTES, backupCount=LOG_FILE_BACKUPS)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        root_logger.addHandler(file_handler)
        root_logger.setLevel(logging.DEBUG)
    else:
        root_logger.setLevel(console_level)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


class LoggerAdapter(logging.LoggerAdapter):
    """Prefixes every message with ``[context]``"""

    def process(self, msg, kwargs):
        return f"[{self.extra['context']}] {msg}", kwargs


def get_context_logger(name: str, context: str) -> LoggerAdapter:
    """Logger tagged with a solver or subcommand name, e.g. ``[admm-tv]``"""
    return LoggerAdapter(get_logger(name), {'context': context})
