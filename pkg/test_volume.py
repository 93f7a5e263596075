#!/usr/bin/env python3
"""
Volume Test Script
FSR3D - 3D single-image super-resolution toolkit

Tests voxel ordering, the unitary transform pair, PSNR and the file format.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from core.exceptions import BoundsError, NumericError, ParameterError, ShapeError, VolumeFormatError
from fsr3d.volume import (
    ComplexVolume3D, Volume3D, extract_slice, fft3, ifft3, lex_index, mse, psnr,
    read_volume, to_real, write_volume
)


def test_lex_index_examples():
    assert lex_index(0, 0, 0, (4, 4, 4)) == 0
    assert lex_index(1, 0, 0, (4, 4, 4)) == 1
    assert lex_index(1, 2, 3, (4, 5, 6)) == 69


def test_lex_index_is_bijective_and_matches_flat():
    dims = (3, 4, 2)
    indices = {lex_index(i, j, k, dims) for i in range(3) for j in range(4) for k in range(2)}
    assert indices == set(range(24))
    vol = Volume3D(np.arange(24.0).reshape(dims))
    flat = vol.flat()
    for i, j, k in [(0, 0, 0), (2, 1, 0), (1, 3, 1)]:
        assert flat[lex_index(i, j, k, dims)] == vol.data[i, j, k]


def test_lex_index_bounds():
    with pytest.raises(BoundsError):
        lex_index(4, 0, 0, (4, 4, 4))
    with pytest.raises(BoundsError):
        lex_index(0, -1, 0, (4, 4, 4))


def test_volume_invariants():
    with pytest.raises(NumericError):
        Volume3D(np.array([[[np.nan]]]))
    with pytest.raises(ShapeError):
        Volume3D(np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        Volume3D.from_flat(np.zeros(7), (2, 2, 2))
    vol = Volume3D.constant((2, 3, 4), 1.5)
    assert vol.dims == (2, 3, 4)
    assert vol.size == 24
    with pytest.raises(ValueError):
        vol.data[0, 0, 0] = 3.0


def test_from_flat_inverts_flat(rng):
    vol = Volume3D(rng.standard_normal((3, 5, 2)))
    assert np.array_equal(Volume3D.from_flat(vol.flat(), vol.dims).data, vol.data)


def test_fft_dc_of_constant():
    dims = (4, 6, 3)
    spectrum = fft3(Volume3D.constant(dims, 2.0)).data
    assert spectrum[0, 0, 0] == pytest.approx(2.0 * np.sqrt(72))
    spectrum[0, 0, 0] = 0.0
    assert np.max(np.abs(spectrum)) < 1e-12


@pytest.mark.parametrize("dims", [(8, 8, 8), (5, 7, 3), (6, 1, 9)])
def test_fft_roundtrip_and_parseval(rng, dims):
    vol = Volume3D(rng.standard_normal(dims))
    spectrum = fft3(vol)
    back = ifft3(spectrum).data
    assert np.linalg.norm(back - vol.data) / np.linalg.norm(vol.data) < 1e-12
    energy = np.sum(vol.data ** 2)
    assert abs(np.sum(np.abs(spectrum.data) ** 2) - energy) / energy < 1e-12


def test_to_real_rejects_imaginary_residue():
    arr = np.ones((2, 2, 2)) + 1e-3j
    with pytest.raises(NumericError):
        to_real(ComplexVolume3D(arr))
    assert np.array_equal(to_real(ComplexVolume3D(np.ones((2, 2, 2)) + 0j)).data, np.ones((2, 2, 2)))


def test_psnr_examples():
    ref = Volume3D(np.linspace(0.0, 1.0, 27).reshape(3, 3, 3))
    assert psnr(ref, ref) == float('inf')
    shifted = Volume3D(ref.data + 0.1)
    assert psnr(ref, shifted, peak=1.0) == pytest.approx(20.0)
    with pytest.raises(ParameterError):
        psnr(ref, shifted, peak=0.0)
    with pytest.raises(ShapeError):
        psnr(ref, Volume3D.zeros((3, 3, 2)))


def test_psnr_symmetric_only_with_fixed_peak(rng):
    a = Volume3D(rng.random((4, 4, 4)))
    b = Volume3D(2.0 * rng.random((4, 4, 4)))
    assert psnr(a, b, peak=1.0) == pytest.approx(psnr(b, a, peak=1.0))
    assert psnr(a, b) != pytest.approx(psnr(b, a))


def test_psnr_matches_recomputation(rng):
    ref = Volume3D(rng.random((6, 6, 6)))
    est = Volume3D(ref.data + 0.05 * rng.standard_normal((6, 6, 6)))
    expected = 10 * np.log10(ref.data.max() ** 2 / mse(ref, est))
    assert psnr(ref, est) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("dtype", ["f64", "f32"])
def test_file_roundtrip(tmp_path, rng, dtype):
    vol = Volume3D(rng.standard_normal((5, 4, 3)))
    header, payload = write_volume(tmp_path / "vol", vol, dtype=dtype)
    assert header.name == "vol.volhdr"
    assert payload.name == "vol.vol"
    assert header.read_text() == "dims=5,4,3\ndtype=%s\norder=lex\n" % dtype
    back = read_volume(tmp_path / "vol")
    if dtype == "f64":
        assert np.array_equal(back.data, vol.data)
        assert payload.read_bytes() == vol.flat().astype("<f8").tobytes()
    else:
        assert np.array_equal(back.data, vol.data.astype(np.float32).astype(np.float64))


def test_payload_is_lexicographic(tmp_path):
    vol = Volume3D(np.arange(8.0).reshape(2, 2, 2))
    _, payload = write_volume(tmp_path / "v", vol)
    values = np.frombuffer(payload.read_bytes(), dtype="<f8")
    assert values[1] == vol.data[1, 0, 0]
    assert values[2] == vol.data[0, 1, 0]
    assert values[4] == vol.data[0, 0, 1]


@pytest.mark.parametrize("header", [
    "dims=2,2,2\ndtype=f64\norder=lex\ncolor=red\n",
    "dims=2,2,2\ndtype=f64\norder=col\n",
    "dims=2,2,2\ndtype=i16\norder=lex\n",
    "dims=2,2\ndtype=f64\norder=lex\n",
    "dims=2,2,2\norder=lex\n",
    "dims=2,2,2\ndims=2,2,2\ndtype=f64\norder=lex\n",
])
def test_reader_rejects_bad_headers(tmp_path, header):
    (tmp_path / "bad.volhdr").write_text(header)
    (tmp_path / "bad.vol").write_bytes(np.zeros(8).tobytes())
    with pytest.raises(VolumeFormatError):
        read_volume(tmp_path / "bad")


def test_reader_rejects_wrong_payload_length(tmp_path):
    write_volume(tmp_path / "v", Volume3D.zeros((2, 2, 2)))
    (tmp_path / "v.vol").write_bytes(np.zeros(7).tobytes())
    with pytest.raises(VolumeFormatError):
        read_volume(tmp_path / "v")


def test_missing_file_names_path(tmp_path):
    with pytest.raises(VolumeFormatError) as excinfo:
        read_volume(tmp_path / "absent")
    assert "absent.volhdr" in str(excinfo.value)


def test_extract_slice(rng):
    vol = Volume3D(rng.standard_normal((4, 5, 6)))
    plane = extract_slice(vol, 2, 3)
    assert plane.dims == (4, 5, 1)
    assert np.array_equal(plane.data[:, :, 0], vol.data[:, :, 3])
    with pytest.raises(BoundsError):
        extract_slice(vol, 0, 4)
    with pytest.raises(ParameterError):
        extract_slice(vol, 3, 0)
