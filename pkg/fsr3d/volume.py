#!/usr/bin/env python3
"""
Volume Value Types
FSR3D - 3D single-image super-resolution toolkit

Immutable real and complex voxel grids, the lexicographic voxel ordering
(first axis fastest), the unitary 3D Fourier transform pair, PSNR and the
raw ``.volhdr`` / ``.vol`` file pair.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.fft

from core.config import get_config
from core.exceptions import (
    BoundsError, NumericError, ParameterError, ShapeError, VolumeFormatError
)
from core.logging import get_logger
from core.utils import ensure_directory

logger = get_logger(__name__)

Dims = Tuple[int, int, int]

HEADER_SUFFIX = ".volhdr"
PAYLOAD_SUFFIX = ".vol"
HEADER_KEYS = ("dims", "dtype", "order")
PAYLOAD_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def _check_dims(dims) -> Dims:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ShapeError(f"Volume dims must be three positive integers, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class Volume3D:
    """
    Real 64-bit voxel grid of shape (m, n, s).

    The array is stored read-only; ``flat()`` returns the lexicographic
    vector (index i + m*j + m*n*k).
    """
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if np.iscomplexobj(arr):
            raise NumericError("Volume3D holds real values; use ComplexVolume3D for spectra")
        if arr.ndim != 3:
            raise ShapeError(f"Volume3D needs a 3D array, got {arr.ndim} dims")
        _check_dims(arr.shape)
        arr = np.array(arr, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(arr)):
            raise NumericError("Volume3D contains NaN or Inf values")
        arr.setflags(write=False)
        object.__setattr__(self, 'data', arr)

    @property
    def dims(self) -> Dims:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def flat(self) -> np.ndarray:
        """Lexicographic vector of the voxels"""
        return self.data.ravel(order='F')

    @classmethod
    def from_flat(cls, values: np.ndarray, dims) -> 'Volume3D':
        dims = _check_dims(dims)
        values = np.asarray(values)
        if values.size != dims[0] * dims[1] * dims[2]:
            raise ShapeError(f"{values.size} values cannot fill dims {dims}")
        return cls(values.reshape(dims, order='F'))

    @classmethod
    def zeros(cls, dims) -> 'Volume3D':
        return cls(np.zeros(_check_dims(dims)))

    @classmethod
    def constant(cls, dims, value: float) -> 'Volume3D':
        return cls(np.full(_check_dims(dims), float(value)))

    def __repr__(self):
        return f"Volume3D(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class ComplexVolume3D:
    """Complex 128-bit grid of shape (m, n, s) holding spectra"""
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeError(f"ComplexVolume3D needs a 3D array, got {arr.ndim} dims")
        _check_dims(arr.shape)
        arr = np.array(arr, dtype=np.complex128, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, 'data', arr)

    @property
    def dims(self) -> Dims:
        return tuple(self.data.shape)

    def flat(self) -> np.ndarray:
        return self.data.ravel(order='F')

    def __repr__(self):
        return f"ComplexVolume3D(dims={self.dims})"


AnyVolume = Union[Volume3D, ComplexVolume3D]


def require_same_dims(a, b, what: str = "volumes") -> None:
    """Raise ShapeError unless both objects share dims"""
    if tuple(a.dims) != tuple(b.dims):
        raise ShapeError(f"Dims mismatch between {what}: {tuple(a.dims)} vs {tuple(b.dims)}")


def lex_index(i: int, j: int, k: int, dims) -> int:
    """Flat lexicographic index of voxel (i, j, k), first axis fastest"""
    m, n, s = _check_dims(dims)
    for name, value, bound in (("i", i, m), ("j", j, n), ("k", k, s)):
        if not 0 <= value < bound:
            raise BoundsError(f"Index {name}={value} outside [0, {bound}) for dims {(m, n, s)}")
    return i + m * j + m * n * k


def unitary_fftn(arr: np.ndarray) -> np.ndarray:
    """Array-level unitary 3D transform used by the solver loops"""
    return scipy.fft.fftn(arr, norm="ortho", workers=get_config().numerics.fft_workers)


def unitary_ifftn(arr: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(arr, norm="ortho", workers=get_config().numerics.fft_workers)


def fft3(v: AnyVolume) -> ComplexVolume3D:
    """Unitary 3D Fourier transform"""
    return ComplexVolume3D(unitary_fftn(v.data))


def ifft3(v: AnyVolume) -> ComplexVolume3D:
    """Inverse of ``fft3``"""
    return ComplexVolume3D(unitary_ifftn(v.data))


def to_real(v: Union[ComplexVolume3D, np.ndarray], tol: Optional[float] = None) -> Volume3D:
    """
    Drop the imaginary part of a spatial-domain result.

    Raises NumericError when the imaginary residue exceeds ``tol`` relative
    to the real part; that only happens on a spectral bookkeeping bug.
    """
    arr = v.data if isinstance(v, ComplexVolume3D) else np.asarray(v)
    if tol is None:
        tol = get_config().numerics.residue_tol
    real = arr.real
    imag_norm = float(np.linalg.norm(arr.imag))
    real_norm = float(np.linalg.norm(real))
    if imag_norm > tol * max(real_norm, np.finfo(float).tiny):
        raise NumericError(
            f"Imaginary residue {imag_norm:.3e} exceeds {tol:g} relative to real norm {real_norm:.3e}",
            details={"imag_norm": imag_norm, "real_norm": real_norm}
        )
    return Volume3D(real)


def mse(reference: Volume3D, estimate: Volume3D) -> float:
    require_same_dims(reference, estimate, "reference and estimate")
    return float(np.mean((reference.data - estimate.data) ** 2))


def psnr(reference: Volume3D, estimate: Volume3D, peak: Optional[float] = None) -> float:
    """
    Peak signal-to-noise ratio in dB.

    ``peak`` defaults to the maximum of ``reference``; zero MSE gives +inf.
    """
    err = mse(reference, estimate)
    if peak is None:
        peak = float(reference.data.max())
    if not peak > 0:
        raise ParameterError(f"PSNR peak must be positive, got {peak}")
    if err == 0.0:
        return float('inf')
    return float(10.0 * np.log10(peak ** 2 / err))


def extract_slice(vol: Volume3D, axis: int, index: int) -> Volume3D:
    """Axis-aligned plane kept as a volume with a singleton ``axis``"""
    if axis not in (0, 1, 2):
        raise ParameterError(f"Slice axis must be 0, 1 or 2, got {axis}")
    if not 0 <= index < vol.dims[axis]:
        raise BoundsError(f"Slice index {index} outside [0, {vol.dims[axis]}) on axis {axis}")
    return Volume3D(np.take(vol.data, [index], axis=axis))


def _file_pair(path: Union[str, Path]) -> Tuple[Path, Path]:
    path = Path(path)
    if path.suffix in (HEADER_SUFFIX, PAYLOAD_SUFFIX):
        path = path.with_suffix("")
    return (path.parent / (path.name + HEADER_SUFFIX),
            path.parent / (path.name + PAYLOAD_SUFFIX))


def write_volume(path: Union[str, Path], vol: Volume3D, dtype: str = "f64") -> Tuple[Path, Path]:
    """
    Write ``<name>.volhdr`` and ``<name>.vol``.

    Returns the (header, payload) paths.
    """
    if dtype not in PAYLOAD_DTYPES:
        raise ParameterError(f"Payload dtype must be one of {list(PAYLOAD_DTYPES)}, got {dtype!r}")
    header_path, payload_path = _file_pair(path)
    ensure_directory(header_path.parent)
    m, n, s = vol.dims
    header = f"dims={m},{n},{s}\ndtype={dtype}\norder=lex\n"
    header_path.write_text(header, encoding="utf-8")
    payload_path.write_bytes(vol.flat().astype(PAYLOAD_DTYPES[dtype]).tobytes())
    logger.debug(f"Wrote {vol.dims} {dtype} volume to {payload_path}")
    return header_path, payload_path


def _parse_header(header_path: Path) -> dict:
    try:
        text = header_path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise VolumeFormatError(f"Volume header not found: {header_path}", details={"path": str(header_path)})
    except UnicodeDecodeError:
        raise VolumeFormatError(f"Volume header is not UTF-8: {header_path}")

    fields = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if '=' not in line:
            raise VolumeFormatError(f"Malformed header line {line!r} in {header_path}")
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in HEADER_KEYS:
            raise VolumeFormatError(f"Unknown header key {key!r} in {header_path}")
        if key in fields:
            raise VolumeFormatError(f"Duplicate header key {key!r} in {header_path}")
        fields[key] = value

    missing = [k for k in HEADER_KEYS if k not in fields]
    if missing:
        raise VolumeFormatError(f"Header {header_path} lacks keys {missing}")
    if fields["order"] != "lex":
        raise VolumeFormatError(f"Unsupported voxel order {fields['order']!r} in {header_path}")
    if fields["dtype"] not in PAYLOAD_DTYPES:
        raise VolumeFormatError(f"Unsupported dtype {fields['dtype']!r} in {header_path}")
    try:
        dims = _check_dims(int(p) for p in fields["dims"].split(','))
    except (ValueError, ShapeError):
        raise VolumeFormatError(f"Bad dims {fields['dims']!r} in {header_path}")
    return {"dims": dims, "dtype": fields["dtype"]}


def read_volume(path: Union[str, Path]) -> Volume3D:
    """Read a volume file pair; 32-bit payloads are promoted to 64-bit"""
    header_path, payload_path = _file_pair(path)
    header = _parse_header(header_path)
    dims, dtype = header["dims"], PAYLOAD_DTYPES[header["dtype"]]
    try:
        payload = payload_path.read_bytes()
    except FileNotFoundError:
        raise VolumeFormatError(f"Volume payload not found: {payload_path}", details={"path": str(payload_path)})

    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    if len(payload) != expected:
        raise VolumeFormatError(
            f"Payload {payload_path} has {len(payload)} bytes, expected {expected} for dims {dims}"
        )
    values = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    logger.debug(f"Read {dims} {header['dtype']} volume from {payload_path}")
    return Volume3D.from_flat(values, dims)
