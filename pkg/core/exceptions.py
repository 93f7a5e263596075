"""
FSR3D - Custom Exceptions
Centralized exception definitions shared by the numeric core and the CLI
"""


class FsrError(Exception):
    """Base exception for all FSR3D errors"""

    exit_code = 1

    def __init__(self, message: str, code: str = None, details: dict = None):
        self.message = message
        self.code = code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)

    def __str__(self):
        return f"{self.code}: {self.message}"


class ParameterError(FsrError):
    """Raised when a scalar parameter is out of its admissible range"""
    exit_code = 2


class ShapeError(FsrError):
    """Raised when volume dims disagree or an axis is not divisible by its rate"""
    exit_code = 2


class BoundsError(FsrError):
    """Raised when a voxel index falls outside the grid"""
    exit_code = 2


class SizeGuardError(FsrError):
    """Raised when a dense oracle would exceed the configured voxel limit"""
    exit_code = 2


class SingularityError(FsrError):
    """Raised when a spectral inverse is undefined"""
    pass


class NumericError(FsrError):
    """Raised when a result is non-finite or keeps a large imaginary residue"""
    pass


class VolumeFormatError(FsrError):
    """Raised when a volume file pair is missing or malformed"""
    exit_code = 2


class ConfigurationError(FsrError):
    """Raised when configuration is invalid"""
    exit_code = 2
