#!/usr/bin/env python3
"""
Decimation in the Fourier Domain
FSR3D - 3D single-image super-resolution toolkit

Under the unitary transform F, the zero-interpolation mask D^H D becomes a
Kronecker product of per-axis blocks:

    F D^H D F^H = (1/d_s)(J_ds x I_sl) x (1/d_c)(J_dc x I_nl) x (1/d_r)(J_dr x I_ml)

HR frequencies along an axis split into ``rate`` contiguous chunks of the
LR length; the chunk offsets of one frequency are its aliases. Summing the
aliases is ``alias_fold``, replicating an LR spectrum is ``alias_expand``,
and the folded blur spectrum is kept as d LR-sized diagonal blocks.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from core.exceptions import ShapeError
from core.logging import get_logger

from .operators import DecimationSpec, SpectrumDiag, dense_guard, build_dense_decimation
from .volume import ComplexVolume3D, Volume3D, fft3

logger = get_logger(__name__)


def _alias_shape(spec: DecimationSpec) -> tuple:
    d_r, d_c, d_s = spec.rates
    m_l, n_l, s_l = spec.lr_dims
    return (d_r, m_l, d_c, n_l, d_s, s_l)


# LR-sized arrays broadcast against the alias shape through this index
_LR_BROADCAST = (None, slice(None), None, slice(None), None, slice(None))
_ALIAS_AXES = (0, 2, 4)


def _split_blocks(arr: np.ndarray, spec: DecimationSpec) -> np.ndarray:
    """HR array -> (d_r, d_c, d_s, m_l, n_l, s_l) view of contiguous frequency chunks"""
    return arr.reshape(_alias_shape(spec)).transpose(0, 2, 4, 1, 3, 5)


def _merge_blocks(blocks: np.ndarray, spec: DecimationSpec) -> np.ndarray:
    return blocks.transpose(0, 3, 1, 4, 2, 5).reshape(spec.hr_dims)


def _require_hr(dims, spec: DecimationSpec, what: str) -> None:
    if tuple(dims) != spec.hr_dims:
        raise ShapeError(f"{what} expects HR dims {spec.hr_dims}, got {tuple(dims)}")


def _require_lr(dims, spec: DecimationSpec, what: str) -> None:
    if tuple(dims) != spec.lr_dims:
        raise ShapeError(f"{what} expects LR dims {spec.lr_dims}, got {tuple(dims)}")


@dataclass(frozen=True, eq=False)
class FoldedSpectrum:
    """
    Folded blur spectrum as d diagonal LR-sized blocks.

    ``blocks[b_r, b_c, b_s]`` at LR frequency (g_r, g_c, g_s) holds the HR
    diagonal at (g_r + b_r*m_l, g_c + b_c*n_l, g_s + b_s*s_l).

    The products with HR spectra run on a copy kept in HR memory order,
    reshaped so that the aliases of a frequency sit on axes 0, 2 and 4;
    HR arrays then fold and expand without transposed copies.
    """
    spec: DecimationSpec
    blocks: np.ndarray

    def __post_init__(self):
        expected = tuple(self.spec.rates) + tuple(self.spec.lr_dims)
        if self.blocks.shape != expected:
            raise ShapeError(f"Folded blocks must have shape {expected}, got {self.blocks.shape}")
        blocks = np.array(self.blocks, dtype=np.complex128, copy=True)
        blocks.setflags(write=False)
        object.__setattr__(self, 'blocks', blocks)

        aliased = np.ascontiguousarray(blocks.transpose(0, 3, 1, 4, 2, 5))
        aliased_conj = np.conj(aliased)
        aliased.setflags(write=False)
        aliased_conj.setflags(write=False)
        object.__setattr__(self, '_aliased', aliased)
        object.__setattr__(self, '_aliased_conj', aliased_conj)

    def block(self, b_r: int, b_c: int, b_s: int) -> np.ndarray:
        return self.blocks[b_r, b_c, b_s]

    @property
    def n_entries(self) -> int:
        return int(self.blocks.size)

    def apply_array(self, v_hat: np.ndarray) -> np.ndarray:
        _require_hr(v_hat.shape, self.spec, "Folded operator")
        return (self._aliased * v_hat.reshape(_alias_shape(self.spec))).sum(axis=_ALIAS_AXES)

    def apply_adjoint_array(self, w_hat: np.ndarray) -> np.ndarray:
        _require_lr(w_hat.shape, self.spec, "Folded adjoint")
        return (self._aliased_conj * w_hat[_LR_BROADCAST]).reshape(self.spec.hr_dims)

    def apply(self, v_hat: ComplexVolume3D) -> ComplexVolume3D:
        """Folded operator times an HR spectrum: alias_fold(Lambda * v_hat)"""
        return ComplexVolume3D(self.apply_array(v_hat.data))

    def apply_adjoint(self, w_hat: ComplexVolume3D) -> ComplexVolume3D:
        """Adjoint of ``apply``: conj(Lambda) * alias_expand(w_hat)"""
        return ComplexVolume3D(self.apply_adjoint_array(w_hat.data))

    def to_spectrum(self) -> SpectrumDiag:
        """Unfold back to the HR diagonal"""
        return SpectrumDiag(_merge_blocks(self.blocks, self.spec))


def alias_fold(hr_spectrum: ComplexVolume3D, spec: DecimationSpec) -> ComplexVolume3D:
    """Sum every HR frequency into its LR alias"""
    _require_hr(hr_spectrum.dims, spec, "alias_fold")
    d_r, d_c, d_s = spec.rates
    m_l, n_l, s_l = spec.lr_dims
    folded = hr_spectrum.data.reshape(d_r, m_l, d_c, n_l, d_s, s_l).sum(axis=(0, 2, 4))
    return ComplexVolume3D(folded)


def alias_expand(lr_spectrum: ComplexVolume3D, spec: DecimationSpec) -> ComplexVolume3D:
    """Replicate an LR spectrum into every frequency block (adjoint of alias_fold)"""
    _require_lr(lr_spectrum.dims, spec, "alias_expand")
    return ComplexVolume3D(np.tile(lr_spectrum.data, spec.rates))


def fold_lambda(otf: SpectrumDiag, spec: DecimationSpec) -> FoldedSpectrum:
    _require_hr(otf.dims, spec, "fold_lambda")
    return FoldedSpectrum(spec=spec, blocks=_split_blocks(otf.values, spec))


def gram_diag(folded: FoldedSpectrum) -> np.ndarray:
    """Diagonal of the folded Gram matrix: per LR frequency, sum of |block|^2"""
    return (folded.blocks.real ** 2 + folded.blocks.imag ** 2).sum(axis=(0, 1, 2))


def weighted_gram_diag(folded: FoldedSpectrum, weights: np.ndarray) -> np.ndarray:
    """Per LR frequency, sum of weight * |block|^2 for a real HR weight array"""
    _require_hr(weights.shape, folded.spec, "weighted_gram_diag")
    power = folded.blocks.real ** 2 + folded.blocks.imag ** 2
    return (_split_blocks(np.asarray(weights, dtype=np.float64), folded.spec) * power).sum(axis=(0, 1, 2))


def zero_fill_spectrum(y: Volume3D, spec: DecimationSpec) -> ComplexVolume3D:
    """
    F D^H y computed with an LR-sized transform.

    Zero interpolation replicates the LR spectrum across blocks, scaled by
    1/sqrt(d) in the unitary convention.
    """
    _require_lr(y.dims, spec, "zero_fill_spectrum")
    expanded = alias_expand(fft3(y), spec)
    return ComplexVolume3D(expanded.data / np.sqrt(spec.total_rate))


# -- dense constructions for small grids -------------------------------------

def dense_dft_matrix(dims) -> np.ndarray:
    """Unitary 3D DFT matrix acting on lexicographic vectors"""
    m, n, s = (int(d) for d in dims)
    dense_guard(m * n * s, "DFT")
    f_r, f_c, f_s = (scipy.linalg.dft(k, scale='sqrtn') for k in (m, n, s))
    return np.kron(f_s, np.kron(f_c, f_r))


def dense_fold_matrix(spec: DecimationSpec) -> np.ndarray:
    """The N_l x N_h structural matrix (1^T x I) x (1^T x I) x (1^T x I)"""
    dense_guard(spec.n_high, "fold structure")
    factors = [np.kron(np.ones((1, d)), np.eye(l)) for d, l in zip(spec.rates, spec.lr_dims)]
    return np.kron(factors[2], np.kron(factors[1], factors[0]))


def dense_folded_lambda(otf: SpectrumDiag, spec: DecimationSpec) -> np.ndarray:
    """Dense N_l x N_h folded blur matrix"""
    _require_hr(otf.dims, spec, "dense_folded_lambda")
    return dense_fold_matrix(spec) * otf.values.ravel(order='F')[None, :]


def dense_mask_kronecker(spec: DecimationSpec) -> np.ndarray:
    """Per-axis Kronecker form of F D^H D F^H, slice factor outermost"""
    dense_guard(spec.n_high, "mask spectrum")
    factors = [
        np.kron(np.ones((d, d)), np.eye(l)) / d
        for d, l in zip(spec.rates, spec.lr_dims)
    ]
    return np.kron(factors[2], np.kron(factors[1], factors[0]))


def _dense_mask_spectrum(spec: DecimationSpec) -> np.ndarray:
    f = dense_dft_matrix(spec.hr_dims)
    dense_d = build_dense_decimation(spec)
    return f @ (dense_d.T @ dense_d) @ f.conj().T


def verify_decimation_identity(spec: DecimationSpec) -> float:
    """
    Max abs deviation between the numerically transformed mask
    F D^H D F^H and its Kronecker form.
    """
    deviation = float(np.max(np.abs(_dense_mask_spectrum(spec) - dense_mask_kronecker(spec))))
    logger.debug(f"Mask identity for rates {spec.rates} on {spec.hr_dims}: {deviation:.3e}")
    return deviation


def verify_folded_gram(otf: SpectrumDiag, spec: DecimationSpec) -> float:
    """
    Max abs deviation between (1/d) folded^H folded and Lambda^H F D^H D F^H Lambda.
    """
    folded = dense_folded_lambda(otf, spec)
    lhs = folded.conj().T @ folded / spec.total_rate
    diag = otf.values.ravel(order='F')
    rhs = np.conj(diag)[:, None] * _dense_mask_spectrum(spec) * diag[None, :]
    return float(np.max(np.abs(lhs - rhs)))

