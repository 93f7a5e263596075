#!/usr/bin/env python3
"""
Synthetic Data Test Script
FSR3D - 3D single-image super-resolution toolkit

Tests phantom generation and the blur, decimate and noise degradation.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config import PHANTOM_GREY_LEVELS, PHANTOM_LAYERS, phantom_palette
from core.exceptions import ConfigurationError, ParameterError, ShapeError
from fsr3d.operators import DecimationSpec, PsfSpec, blur_apply, decimate, make_gaussian_psf, psf_to_spectrum
from fsr3d.sim import (
    DegradationRecipe, PhantomFactory, degrade, degrade_detailed, make_phantom, make_rng
)
from fsr3d.solvers import TvAdmmConfig
from fsr3d.volume import Volume3D


def _recipe(hr_dims, rates=(2, 2, 2), bsnr_db=30.0, seed=0, kernel=(9, 9, 9), sigma=(3.0, 3.0, 3.0)):
    return DegradationRecipe(
        psf=PsfSpec(kernel_size=kernel, sigma=sigma),
        spec=DecimationSpec.from_hr(hr_dims, rates),
        bsnr_db=bsnr_db,
        rng_seed=seed,
    )


def test_constant_phantom():
    vol = make_phantom((3, 4, 5), kind="constant", value=0.5)
    assert vol.dims == (3, 4, 5)
    assert np.all(vol.data == 0.5)


def test_nested_ellipsoids_use_the_palette():
    vol = make_phantom((32, 32, 32), seed=4)
    values = set(np.unique(vol.data).tolist())
    assert values <= set(phantom_palette())
    assert len(values) == len(phantom_palette())
    assert vol.data[0, 0, 0] == 0.0


def test_palette_steps_outlast_default_tv_shrinkage():
    palette = sorted(phantom_palette())
    relative = sorted([0.0] + [layer[3] for layer in PHANTOM_LAYERS])
    assert palette == [PHANTOM_GREY_LEVELS * v for v in relative]
    assert palette[-1] == 255.0
    cfg = TvAdmmConfig()
    assert min(np.diff(palette)) > 10 * cfg.lam / cfg.mu


def test_phantoms_are_deterministic():
    a = make_phantom((16, 16, 16), seed=7)
    b = make_phantom((16, 16, 16), seed=7)
    assert np.array_equal(a.data, b.data)
    c = make_phantom((16, 16, 16), kind="random-smooth", seed=7)
    d = make_phantom((16, 16, 16), kind="random-smooth", seed=8)
    assert not np.array_equal(c.data, d.data)


def test_nested_ellipsoids_need_room():
    with pytest.raises(ShapeError):
        make_phantom((4, 4, 4))
    with pytest.raises(ShapeError):
        make_phantom((0, 4, 4), kind="constant")


def test_random_smooth_range():
    vol = make_phantom((12, 10, 8), kind="random-smooth", seed=2)
    assert vol.data.min() == pytest.approx(0.0)
    assert vol.data.max() == pytest.approx(PHANTOM_GREY_LEVELS)


def test_unknown_kind_and_rng():
    with pytest.raises(ParameterError):
        make_phantom((8, 8, 8), kind="sphere")
    with pytest.raises(ParameterError):
        make_rng(0, "Xorshift")
    with pytest.raises(ParameterError):
        make_rng(-1)
    assert {"nested-ellipsoids", "random-smooth", "constant"} <= set(PhantomFactory.available_kinds())


def test_rng_algorithms_differ():
    a = make_rng(5, "PCG64").standard_normal(4)
    b = make_rng(5, "Philox").standard_normal(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, make_rng(5).standard_normal(4))


def test_identity_degradation_is_exact(rng):
    x = Volume3D(rng.random((6, 5, 4)))
    recipe = DegradationRecipe.from_preset("identity", x.dims)
    assert recipe.noiseless
    y = degrade(x, recipe)
    assert np.array_equal(y.data, x.data)


def test_noiseless_degradation_matches_operators(rng):
    x = Volume3D(rng.random((12, 12, 12)))
    recipe = _recipe(x.dims, bsnr_db=None, kernel=(5, 5, 5), sigma=(1.5, 1.5, 1.5))
    result = degrade_detailed(x, recipe)
    otf = psf_to_spectrum(make_gaussian_psf(recipe.psf, x.dims))
    expected = decimate(blur_apply(x, otf), recipe.spec)
    assert result.observation.dims == (6, 6, 6)
    assert np.array_equal(result.observation.data, expected.data)
    assert result.noise_sigma == 0.0
    assert result.measured_bsnr_db == float('inf')


def test_bsnr_calibration():
    x = make_phantom((64, 64, 64), seed=1)
    result = degrade_detailed(x, _recipe(x.dims, bsnr_db=30.0, seed=11))
    assert 29.5 <= result.measured_bsnr_db <= 30.5
    expected_sigma = np.sqrt(np.var(result.clean.data) / 10 ** 3.0)
    assert result.noise_sigma == pytest.approx(expected_sigma, rel=1e-12)
    assert abs(np.mean(result.noise.data)) < 4 * result.noise_sigma / np.sqrt(result.noise.size)
    assert np.array_equal(result.observation.data, result.clean.data + result.noise.data)


def test_noise_is_seeded():
    x = make_phantom((16, 16, 16), seed=1)
    a = degrade(x, _recipe(x.dims, seed=3, kernel=(5, 5, 5)))
    b = degrade(x, _recipe(x.dims, seed=3, kernel=(5, 5, 5)))
    c = degrade(x, _recipe(x.dims, seed=4, kernel=(5, 5, 5)))
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_constant_signal_gets_no_noise():
    x = Volume3D.constant((8, 8, 8), 0.5)
    result = degrade_detailed(x, _recipe(x.dims, kernel=(3, 3, 3)))
    assert result.noise_sigma < 1e-12
    assert np.allclose(result.observation.data, 0.5)


def test_degrade_checks_dims():
    with pytest.raises(ShapeError):
        degrade(Volume3D.zeros((8, 8, 8)), _recipe((16, 16, 16)))


def test_recipe_from_preset_and_flags():
    recipe = DegradationRecipe.from_preset("synthetic", (64, 64, 64), seed=9)
    assert recipe.psf.kernel_size == (9, 9, 9)
    assert recipe.psf.sigma == (3.0, 3.0, 3.0)
    assert recipe.spec.lr_dims == (32, 32, 32)
    assert recipe.bsnr_db == 30.0
    assert recipe.to_flags() == {
        "psf_size": "9,9,9",
        "psf_sigma": "3,3,3",
        "decim": "2,2,2",
        "bsnr": "30",
        "seed": "9",
        "rng": "PCG64",
    }
    cbct = DegradationRecipe.from_preset("cbct", (36, 36, 12))
    assert cbct.psf.sigma == (5.8, 5.3, 0.9)
    assert DegradationRecipe.from_preset("identity", (4, 4, 4)).to_flags()["bsnr"] == "none"
    with pytest.raises(ConfigurationError):
        DegradationRecipe.from_preset("mri", (8, 8, 8))


def test_recipe_validation():
    with pytest.raises(ParameterError):
        _recipe((8, 8, 8), bsnr_db=float('inf'), kernel=(3, 3, 3))
    with pytest.raises(ParameterError):
        _recipe((8, 8, 8), seed=-2, kernel=(3, 3, 3))
