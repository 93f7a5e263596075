"""
FSR3D - Utility Functions
Shared helpers for flag parsing, paths and timing
"""

import time
from pathlib import Path
from typing import Callable, Tuple, TypeVar, Union
from core.logging import get_logger
from core.exceptions import ParameterError

logger = get_logger(__name__)

T = TypeVar('T', int, float)


def parse_triple(text: str, cast: Callable[[str], T] = int, name: str = "value") -> Tuple[T, T, T]:
    """
    Parse an ``a,b,c`` flag into a 3-tuple

    Args:
        text: Comma separated string; a single value is broadcast to all axes
        cast: Element type (int or float)
        name: Flag name used in error messages

    Returns:
        Tuple of three parsed values

    Raises:
        ParameterError: If the text does not hold one or three parseable values
    """
    parts = [p.strip() for p in str(text).split(',') if p.strip()]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ParameterError(f"{name} expects 1 or 3 comma separated values, got {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError:
        raise ParameterError(f"{name} has a non-numeric entry: {text!r}")


def ensure_directory(path: Union[str, Path]) -> Path:
    """
    Ensure a directory exists, creating it if necessary

    Args:
        path: Directory path

    Returns:
        Path object for the directory
    """
    path_obj = Path(path)
    path_obj.mkdir(parents=True, exist_ok=True)
    return path_obj


def format_bytes(size: float) -> str:
    """
    Format bytes as human readable string

    Args:
        size: Size in bytes

    Returns:
        Formatted string (e.g., "1.5 MB")
    """
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if size < 1024.0:
            return f"{size:.1f} {unit}"
        size /= 1024.0
    return f"{size:.1f} PB"


class Timer:
    """Context manager for timing operations"""

    def __init__(self, description: str = "Operation"):
        self.description = description
        self.start_time = None
        self.end_time = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        logger.debug(f"Starting: {self.description}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end_time = time.perf_counter()
        logger.debug(f"Completed: {self.description} in {self.duration:.4f}s")

    @property
    def duration(self) -> float:
        """Get the duration in seconds"""
        if self.start_time is not None and self.end_time is not None:
            return self.end_time - self.start_time
        return 0.0
