"""
FSR3D - Core Module
Centralized configuration, logging, errors and shared utilities
"""

from .config import AppConfig, get_config, reload_config, validate_config
from .logging import setup_logging, get_logger, get_context_logger
from .exceptions import (
    FsrError, ParameterError, ShapeError, BoundsError, SizeGuardError,
    SingularityError, NumericError, VolumeFormatError, ConfigurationError
)
from .utils import Timer, parse_triple, ensure_directory, format_bytes

__all__ = [
    'AppConfig',
    'get_config',
    'reload_config',
    'validate_config',
    'setup_logging',
    'get_logger',
    'get_context_logger',
    'FsrError',
    'ParameterError',
    'ShapeError',
    'BoundsError',
    'SizeGuardError',
    'SingularityError',
    'NumericError',
    'VolumeFormatError',
    'ConfigurationError',
    'Timer',
    'parse_triple',
    'ensure_directory',
    'format_bytes'
]
