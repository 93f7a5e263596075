#!/usr/bin/env python3
"""
Forward-Model Operators
FSR3D - 3D single-image super-resolution toolkit

Cyclic blur H, decimation D, their adjoints, periodic finite differences,
their Fourier diagonals, and dense matrix oracles for small grids.

Axis naming: ``h`` differences act along axis 0, ``v`` along axis 1 and
``s`` along axis 2 (the slice axis, slowest in lexicographic order).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.fft

from core.config import get_config
from core.exceptions import ParameterError, ShapeError, SizeGuardError
from core.logging import get_logger
from core.utils import format_bytes

from .volume import ComplexVolume3D, Dims, Volume3D, fft3, ifft3, require_same_dims, to_real

logger = get_logger(__name__)

AXIS_NAMES = ("row", "column", "slice")


@dataclass(frozen=True)
class DecimationSpec:
    """Integer decimation rates binding an HR grid to an LR grid"""
    rates: Tuple[int, int, int]
    hr_dims: Dims

    def __post_init__(self):
        rates = tuple(int(r) for r in self.rates)
        hr_dims = tuple(int(d) for d in self.hr_dims)
        if len(rates) != 3 or any(r < 1 for r in rates):
            raise ParameterError(f"Decimation rates must be three positive integers, got {self.rates}")
        if len(hr_dims) != 3 or any(d < 1 for d in hr_dims):
            raise ShapeError(f"HR dims must be three positive integers, got {self.hr_dims}")
        for axis, (dim, rate) in enumerate(zip(hr_dims, rates)):
            if dim % rate:
                raise ShapeError(
                    f"Axis {axis} ({AXIS_NAMES[axis]}) has length {dim}, not divisible by rate {rate}",
                    details={"axis": axis, "length": dim, "rate": rate}
                )
        object.__setattr__(self, 'rates', rates)
        object.__setattr__(self, 'hr_dims', hr_dims)

    @classmethod
    def from_hr(cls, hr_dims, rates) -> 'DecimationSpec':
        return cls(rates=tuple(rates), hr_dims=tuple(hr_dims))

    @classmethod
    def from_lr(cls, lr_dims, rates) -> 'DecimationSpec':
        return cls(rates=tuple(rates), hr_dims=tuple(int(l) * int(r) for l, r in zip(lr_dims, rates)))

    @property
    def lr_dims(self) -> Dims:
        return tuple(d // r for d, r in zip(self.hr_dims, self.rates))

    @property
    def total_rate(self) -> int:
        d_r, d_c, d_s = self.rates
        return d_r * d_c * d_s

    @property
    def n_high(self) -> int:
        return int(np.prod(self.hr_dims))

    @property
    def n_low(self) -> int:
        return int(np.prod(self.lr_dims))


@dataclass(frozen=True, eq=False)
class SpectrumDiag:
    """Per-frequency diagonal of a circulant operator on the HR grid"""
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.complex128, copy=True)
        if arr.ndim != 3:
            raise ShapeError(f"SpectrumDiag needs a 3D array, got {arr.ndim} dims")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("SpectrumDiag entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, 'values', arr)

    @property
    def dims(self) -> Dims:
        return tuple(self.values.shape)

    def conj(self) -> 'SpectrumDiag':
        return SpectrumDiag(np.conj(self.values))

    def power(self) -> np.ndarray:
        """|values|^2 as a real array"""
        return self.values.real ** 2 + self.values.imag ** 2

    @classmethod
    def ones(cls, dims) -> 'SpectrumDiag':
        return cls(np.ones(tuple(dims), dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class PsfSpec:
    """
    Separable Gaussian PSF description, or explicit kernel weights.

    A standard deviation of 0 along an axis yields a delta along that axis.
    """
    kernel_size: Tuple[int, int, int] = (9, 9, 9)
    sigma: Tuple[float, float, float] = (3.0, 3.0, 3.0)
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        size = tuple(int(k) for k in self.kernel_size)
        if self.weights is not None:
            w = np.array(self.weights, dtype=np.float64, copy=True)
            if w.ndim != 3:
                raise ParameterError("Explicit PSF weights must be a 3D array")
            if np.any(w < 0) or not w.sum() > 0:
                raise ParameterError("PSF weights must be nonnegative with a positive sum")
            size = tuple(w.shape)
            w = w / w.sum()
            w.setflags(write=False)
            object.__setattr__(self, 'weights', w)
        if len(size) != 3 or any(k < 1 for k in size):
            raise ParameterError(f"Kernel size must be three positive integers, got {self.kernel_size}")
        if any(k % 2 == 0 for k in size):
            raise ParameterError(f"Kernel size must be odd along every axis, got {size}")
        sigma = tuple(float(s) for s in self.sigma)
        if len(sigma) != 3 or any(s < 0 for s in sigma):
            raise ParameterError(f"Standard deviations must be three nonnegative values, got {self.sigma}")
        object.__setattr__(self, 'kernel_size', size)
        object.__setattr__(self, 'sigma', sigma)

    def kernel(self) -> np.ndarray:
        """Normalized kernel of shape ``kernel_size``, centered on its middle voxel"""
        if self.weights is not None:
            return np.array(self.weights)
        profiles = []
        for k, s in zip(self.kernel_size, self.sigma):
            offsets = np.arange(k) - k // 2
            if s == 0:
                profile = (offsets == 0).astype(np.float64)
            else:
                profile = np.exp(-offsets ** 2 / (2.0 * s ** 2))
            profiles.append(profile)
        kernel = np.einsum('i,j,k->ijk', *profiles)
        return kernel / kernel.sum()


def make_gaussian_psf(spec: PsfSpec, hr_dims) -> Volume3D:
    """
    Zero-padded PSF with its center circularly shifted to voxel (0, 0, 0).

    This is the first column of the circulant blur matrix.
    """
    hr_dims = tuple(int(d) for d in hr_dims)
    if any(k > d for k, d in zip(spec.kernel_size, hr_dims)):
        raise ParameterError(f"Kernel {spec.kernel_size} does not fit in volume {hr_dims}")
    padded = np.zeros(hr_dims)
    kr, kc, ks = spec.kernel_size
    padded[:kr, :kc, :ks] = spec.kernel()
    padded = np.roll(padded, shift=(-(kr // 2), -(kc // 2), -(ks // 2)), axis=(0, 1, 2))
    return Volume3D(padded)


def psf_to_spectrum(psf: Volume3D) -> SpectrumDiag:
    """
    Unnormalized DFT of the zero-padded PSF.

    With the unitary ``fft3`` / ``ifft3`` pair, ``ifft3(values * fft3(x))``
    is exactly cyclic convolution with the PSF, so H = F^H diag(values) F.
    """
    workers = get_config().numerics.fft_workers
    return SpectrumDiag(scipy.fft.fftn(psf.data, workers=workers))


def spectral_apply(x: Volume3D, diag: SpectrumDiag, conjugate: bool = False) -> Volume3D:
    """Apply the circulant operator F^H diag F (or its adjoint) to ``x``"""
    require_same_dims(x, diag, "volume and spectrum")
    values = np.conj(diag.values) if conjugate else diag.values
    return to_real(ifft3(ComplexVolume3D(values * fft3(x).data)))


def blur_apply(x: Volume3D, otf: SpectrumDiag, conjugate: bool = False) -> Volume3D:
    """Cyclic blur H x (H^H x when ``conjugate``)"""
    return spectral_apply(x, otf, conjugate)


def decimate(x: Volume3D, spec: DecimationSpec) -> Volume3D:
    """Keep voxels (i*d_r, j*d_c, k*d_s)"""
    if x.dims != spec.hr_dims:
        raise ShapeError(f"Decimation expects HR dims {spec.hr_dims}, got {x.dims}")
    d_r, d_c, d_s = spec.rates
    return Volume3D(x.data[::d_r, ::d_c, ::d_s])


def decimate_adjoint(y: Volume3D, spec: DecimationSpec) -> Volume3D:
    """Zero interpolation: y's samples at the retained positions, zeros elsewhere"""
    if y.dims != spec.lr_dims:
        raise ShapeError(f"Decimation adjoint expects LR dims {spec.lr_dims}, got {y.dims}")
    d_r, d_c, d_s = spec.rates
    out = np.zeros(spec.hr_dims)
    out[::d_r, ::d_c, ::d_s] = y.data
    return Volume3D(out)


def decimation_mask(spec: DecimationSpec) -> np.ndarray:
    """Diagonal of D^H D as an HR array of zeros and ones"""
    d_r, d_c, d_s = spec.rates
    mask = np.zeros(spec.hr_dims)
    mask[::d_r, ::d_c, ::d_s] = 1.0
    return mask


def zero_fill_upsample(y: Volume3D, spec: DecimationSpec) -> Volume3D:
    """d * D^H y: zero interpolation rescaled to preserve the mean"""
    return Volume3D(spec.total_rate * decimate_adjoint(y, spec).data)


def nearest_upsample(y: Volume3D, spec: DecimationSpec) -> Volume3D:
    """Replicate every LR voxel into its d_r x d_c x d_s HR block"""
    if y.dims != spec.lr_dims:
        raise ShapeError(f"Upsampling expects LR dims {spec.lr_dims}, got {y.dims}")
    out = y.data
    for axis, rate in enumerate(spec.rates):
        out = np.repeat(out, rate, axis=axis)
    return Volume3D(out)


def _difference_kernel(hr_dims: Dims, axis: int) -> np.ndarray:
    # (D x)[i] = x[i+1] - x[i] with wrap-around, written as a convolution kernel
    kernel = np.zeros(hr_dims)
    kernel[0, 0, 0] -= 1.0
    index = [0, 0, 0]
    index[axis] = -1
    kernel[tuple(index)] += 1.0
    return kernel


def finite_diff_spectra(hr_dims) -> Tuple[SpectrumDiag, SpectrumDiag, SpectrumDiag]:
    """Fourier diagonals (Sigma_h, Sigma_v, Sigma_s) of the periodic forward differences"""
    hr_dims = tuple(int(d) for d in hr_dims)
    workers = get_config().numerics.fft_workers
    return tuple(
        SpectrumDiag(scipy.fft.fftn(_difference_kernel(hr_dims, axis), workers=workers))
        for axis in range(3)
    )


def gradient_stack(x: np.ndarray) -> np.ndarray:
    """(3, m, n, s) stack of periodic forward differences of a raw array"""
    return np.stack([np.roll(x, -1, axis=axis) - x for axis in range(3)])


def gradient_stack_adjoint(g: np.ndarray) -> np.ndarray:
    out = np.zeros(g.shape[1:])
    for axis in range(3):
        out += np.roll(g[axis], 1, axis=axis) - g[axis]
    return out


def forward_differences(x: Volume3D) -> Tuple[Volume3D, Volume3D, Volume3D]:
    """Periodic forward differences (D_h x, D_v x, D_s x) by direct stencils"""
    return tuple(Volume3D(g) for g in gradient_stack(x.data))


def forward_differences_adjoint(gh: Volume3D, gv: Volume3D, gs: Volume3D) -> Volume3D:
    """D_h^T gh + D_v^T gv + D_s^T gs by direct stencils"""
    require_same_dims(gh, gv, "difference components")
    require_same_dims(gh, gs, "difference components")
    return Volume3D(gradient_stack_adjoint(np.stack([gh.data, gv.data, gs.data])))


def dense_guard(n: int, what: str) -> None:
    limit = get_config().numerics.dense_limit
    if n > limit:
        raise SizeGuardError(
            f"Dense {what} needs N_h={n} > limit {limit} ({format_bytes(8.0 * n * n)} per matrix)",
            details={"n": n, "limit": limit}
        )
    logger.debug(f"Building dense {what}: {n}x{n} ({format_bytes(8.0 * n * n)})")


def build_dense_decimation(spec: DecimationSpec) -> np.ndarray:
    """N_l x N_h selection matrix in lexicographic order"""
    dense_guard(spec.n_high, "decimation")
    retained = np.flatnonzero(decimation_mask(spec).ravel(order='F'))
    dense = np.zeros((spec.n_low, spec.n_high))
    dense[np.arange(spec.n_low), retained] = 1.0
    return dense


def _dense_circulant(kernel: np.ndarray) -> np.ndarray:
    dims = kernel.shape
    n = kernel.size
    dense = np.empty((n, n))
    # column q is the kernel circularly shifted to voxel q
    for q in range(n):
        shift = np.unravel_index(q, dims, order='F')
        dense[:, q] = np.roll(kernel, shift, axis=(0, 1, 2)).ravel(order='F')
    return dense


def build_dense_blur(psf: Volume3D) -> np.ndarray:
    """N_h x N_h circulant matrix built from shifted PSF columns"""
    dense_guard(psf.size, "blur")
    return _dense_circulant(psf.data)


def build_dense_differences(hr_dims) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense periodic forward-difference matrices (D_h, D_v, D_s)"""
    hr_dims = tuple(int(d) for d in hr_dims)
    dense_guard(int(np.prod(hr_dims)), "differences")
    return tuple(_dense_circulant(_difference_kernel(hr_dims, axis)) for axis in range(3))
