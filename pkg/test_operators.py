#!/usr/bin/env python3
"""
Forward-Model Operator Test Script
FSR3D - 3D single-image super-resolution toolkit

Tests the PSF, blur, decimation and finite-difference operators against
direct formulas and dense matrices.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from core.exceptions import ParameterError, ShapeError, SizeGuardError
from fsr3d.operators import (
    DecimationSpec, PsfSpec, SpectrumDiag, blur_apply, build_dense_blur, build_dense_decimation,
    build_dense_differences, decimate, decimate_adjoint, decimation_mask, finite_diff_spectra,
    forward_differences, forward_differences_adjoint, make_gaussian_psf, nearest_upsample,
    psf_to_spectrum, spectral_apply, zero_fill_upsample
)
from fsr3d.volume import Volume3D


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# -- DecimationSpec ----------------------------------------------------------

def test_decimation_spec_dims():
    spec = DecimationSpec.from_hr((8, 6, 4), (2, 3, 1))
    assert spec.lr_dims == (4, 2, 4)
    assert spec.total_rate == 6
    assert spec.n_high == spec.n_low * spec.total_rate
    assert DecimationSpec.from_lr((4, 2, 4), (2, 3, 1)).hr_dims == (8, 6, 4)


def test_decimation_spec_names_bad_axis():
    with pytest.raises(ShapeError) as excinfo:
        DecimationSpec.from_hr((8, 7, 4), (2, 2, 2))
    assert "Axis 1" in str(excinfo.value)
    assert "column" in str(excinfo.value)
    with pytest.raises(ParameterError):
        DecimationSpec.from_hr((8, 8, 8), (0, 1, 1))


# -- PSF ---------------------------------------------------------------------

def test_psf_validation():
    with pytest.raises(ParameterError):
        PsfSpec(kernel_size=(4, 3, 3))
    with pytest.raises(ParameterError):
        make_gaussian_psf(PsfSpec(kernel_size=(9, 9, 9)), (8, 8, 8))
    with pytest.raises(ParameterError):
        PsfSpec(weights=-np.ones((3, 3, 3)))


def test_delta_psf_is_identity(rng):
    psf = make_gaussian_psf(PsfSpec(kernel_size=(1, 1, 1)), (4, 5, 6))
    assert psf.data[0, 0, 0] == 1.0
    assert np.count_nonzero(psf.data) == 1
    otf = psf_to_spectrum(psf)
    assert np.allclose(otf.values, 1.0, atol=1e-15)
    x = Volume3D(rng.standard_normal((4, 5, 6)))
    assert _rel(blur_apply(x, otf).data, x.data) < 1e-14


def test_gaussian_kernel_symmetry_and_sum():
    kernel = PsfSpec(kernel_size=(9, 9, 9), sigma=(3.0, 3.0, 3.0)).kernel()
    assert kernel.sum() == pytest.approx(1.0, abs=1e-12)
    for axis in range(3):
        assert np.allclose(kernel, np.flip(kernel, axis=axis), atol=1e-15)


def test_anisotropic_kernel_matches_formula():
    spec = PsfSpec(kernel_size=(9, 9, 3), sigma=(5.8, 5.3, 0.9))
    kernel = spec.kernel()
    expected = np.zeros((9, 9, 3))
    for i in range(9):
        for j in range(9):
            for k in range(3):
                a, b, c = i - 4, j - 4, k - 1
                expected[i, j, k] = np.exp(-a * a / (2 * 5.8 ** 2) - b * b / (2 * 5.3 ** 2) - c * c / (2 * 0.9 ** 2))
    expected /= expected.sum()
    assert np.max(np.abs(kernel - expected)) < 1e-14


def test_psf_centered_at_origin():
    psf = make_gaussian_psf(PsfSpec(kernel_size=(3, 3, 3), sigma=(1, 1, 1)), (8, 8, 8)).data
    assert psf[0, 0, 0] == psf.max()
    assert psf[1, 0, 0] == pytest.approx(psf[-1, 0, 0])
    assert psf[4, 4, 4] == 0.0


def test_symmetric_psf_spectrum_is_real():
    otf = psf_to_spectrum(make_gaussian_psf(PsfSpec(), (16, 16, 16)))
    assert otf.values[0, 0, 0] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(otf.values.imag)) < 1e-12


def test_spectrum_matches_dense_circulant_eigenvalues():
    psf = make_gaussian_psf(PsfSpec(kernel_size=(3, 3, 1), sigma=(1.0, 0.7, 0.0)), (4, 4, 2))
    dense = build_dense_blur(psf)
    assert np.allclose(dense, dense.T, atol=1e-15)
    eig = np.sort(np.linalg.eigvalsh(dense))
    otf = np.sort(psf_to_spectrum(psf).values.real.ravel())
    assert np.max(np.abs(eig - otf)) < 1e-10


# -- blur --------------------------------------------------------------------

def test_blur_identity_spectrum(rng):
    x = Volume3D(rng.standard_normal((4, 4, 4)))
    assert _rel(blur_apply(x, SpectrumDiag.ones((4, 4, 4))).data, x.data) < 1e-14


def test_blur_adjoint(rng):
    psf = make_gaussian_psf(PsfSpec(weights=rng.random((3, 5, 3))), (6, 8, 4))
    otf = psf_to_spectrum(psf)
    x = Volume3D(rng.standard_normal((6, 8, 4)))
    z = Volume3D(rng.standard_normal((6, 8, 4)))
    lhs = np.vdot(blur_apply(x, otf).data, z.data)
    rhs = np.vdot(x.data, blur_apply(z, otf, conjugate=True).data)
    assert abs(lhs - rhs) / abs(lhs) < 1e-10


def test_blur_matches_dense_circulant(rng):
    psf = make_gaussian_psf(PsfSpec(weights=rng.random((3, 3, 3))), (8, 8, 8))
    x = Volume3D(rng.standard_normal((8, 8, 8)))
    dense = build_dense_blur(psf) @ x.flat()
    fast = blur_apply(x, psf_to_spectrum(psf)).flat()
    assert _rel(fast, dense) < 1e-10


def test_dense_blur_row_sums():
    psf = make_gaussian_psf(PsfSpec(kernel_size=(3, 3, 3), sigma=(1, 2, 1)), (4, 4, 4))
    assert np.allclose(build_dense_blur(psf).sum(axis=1), 1.0, atol=1e-12)


def test_blur_dims_mismatch():
    with pytest.raises(ShapeError):
        blur_apply(Volume3D.zeros((4, 4, 4)), SpectrumDiag.ones((4, 4, 2)))


# -- decimation --------------------------------------------------------------

def test_decimation_identity_rate(rng):
    x = Volume3D(rng.standard_normal((3, 4, 5)))
    assert np.array_equal(decimate(x, DecimationSpec.from_hr(x.dims, (1, 1, 1))).data, x.data)


def test_decimation_index_arithmetic():
    i, j, k = np.meshgrid(np.arange(4), np.arange(4), np.arange(4), indexing='ij')
    x = Volume3D((i + 4 * j + 16 * k).astype(float))
    y = decimate(x, DecimationSpec.from_hr((4, 4, 4), (2, 2, 2))).data
    li, lj, lk = np.meshgrid(np.arange(2), np.arange(2), np.arange(2), indexing='ij')
    assert np.array_equal(y, 2 * li + 8 * lj + 32 * lk)


def test_decimation_matches_dense(rng):
    spec = DecimationSpec.from_hr((6, 4, 2), (3, 2, 1))
    x = Volume3D(rng.standard_normal(spec.hr_dims))
    dense = build_dense_decimation(spec)
    assert dense.shape == (spec.n_low, spec.n_high)
    assert np.array_equal(dense.sum(axis=1), np.ones(spec.n_low))
    assert np.array_equal(dense @ x.flat(), decimate(x, spec).flat())
    mask_diag = np.diag(dense.T @ dense)
    assert np.array_equal(mask_diag, decimation_mask(spec).ravel(order='F'))


@pytest.mark.parametrize("seed", range(6))
def test_decimation_adjoint_properties(seed):
    rng = np.random.default_rng(seed)
    rates = tuple(int(r) for r in rng.integers(1, 4, size=3))
    lr = tuple(int(n) for n in rng.integers(1, 5, size=3))
    spec = DecimationSpec.from_lr(lr, rates)
    y = Volume3D(rng.standard_normal(spec.lr_dims))
    x = Volume3D(rng.standard_normal(spec.hr_dims))
    up = decimate_adjoint(y, spec)
    assert np.array_equal(decimate(up, spec).data, y.data)
    assert np.count_nonzero(up.data) == np.count_nonzero(y.data)
    lhs = np.vdot(decimate(x, spec).data, y.data)
    rhs = np.vdot(x.data, up.data)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_upsampling_baselines(rng):
    spec = DecimationSpec.from_hr((4, 4, 2), (2, 2, 1))
    y = Volume3D(rng.standard_normal(spec.lr_dims))
    zf = zero_fill_upsample(y, spec).data
    assert zf.mean() == pytest.approx(y.data.mean())
    nn = nearest_upsample(y, spec).data
    assert nn.shape == spec.hr_dims
    assert nn[1, 1, 0] == y.data[0, 0, 0]
    assert nn[3, 2, 1] == y.data[1, 1, 1]


def test_decimation_dims_mismatch():
    spec = DecimationSpec.from_hr((4, 4, 4), (2, 2, 2))
    with pytest.raises(ShapeError):
        decimate(Volume3D.zeros((4, 4, 2)), spec)
    with pytest.raises(ShapeError):
        decimate_adjoint(Volume3D.zeros((4, 4, 4)), spec)


# -- finite differences ------------------------------------------------------

def test_differences_of_constant_vanish():
    for g in forward_differences(Volume3D.constant((4, 5, 3), 2.5)):
        assert np.all(g.data == 0.0)
    for sigma in finite_diff_spectra((4, 5, 3)):
        assert sigma.values[0, 0, 0] == 0.0


def test_difference_spectrum_magnitude_on_axis():
    sigma_h = finite_diff_spectra((4, 1, 1))[0].values[:, 0, 0]
    f = np.arange(4)
    assert np.allclose(np.abs(sigma_h), 2 * np.abs(np.sin(np.pi * f / 4)), atol=1e-14)


def test_spectral_differences_match_stencils(rng):
    x = Volume3D(rng.standard_normal((8, 8, 8)))
    for sigma, direct in zip(finite_diff_spectra(x.dims), forward_differences(x)):
        assert _rel(spectral_apply(x, sigma).data, direct.data) < 1e-10


def test_difference_adjoints(rng):
    x = Volume3D(rng.standard_normal((5, 6, 4)))
    g = tuple(Volume3D(rng.standard_normal((5, 6, 4))) for _ in range(3))
    lhs = sum(np.vdot(a.data, b.data) for a, b in zip(forward_differences(x), g))
    rhs = np.vdot(x.data, forward_differences_adjoint(*g).data)
    assert abs(lhs - rhs) / abs(lhs) < 1e-10
    for sigma, gi in zip(finite_diff_spectra(x.dims), g):
        lhs = np.vdot(spectral_apply(x, sigma).data, gi.data)
        rhs = np.vdot(x.data, spectral_apply(gi, sigma, conjugate=True).data)
        assert abs(lhs - rhs) / abs(lhs) < 1e-10


def test_dense_differences_match_stencils(rng):
    x = Volume3D(rng.standard_normal((4, 3, 2)))
    for dense, direct in zip(build_dense_differences(x.dims), forward_differences(x)):
        assert np.allclose(dense @ x.flat(), direct.flat(), atol=1e-14)


def test_dense_guard(monkeypatch):
    monkeypatch.setenv("FSR_DENSE_LIMIT", "64")
    from core.config import reload_config
    reload_config()
    with pytest.raises(SizeGuardError):
        build_dense_decimation(DecimationSpec.from_hr((8, 8, 8), (2, 2, 2)))
    build_dense_decimation(DecimationSpec.from_hr((4, 4, 4), (2, 2, 2)))
