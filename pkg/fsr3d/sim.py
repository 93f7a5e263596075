#!/usr/bin/env python3
"""
Synthetic Data
FSR3D - 3D single-image super-resolution toolkit

Ground-truth phantoms and the blur, decimate, add-noise degradation with
noise calibrated to a blurred signal-to-noise ratio (BSNR).
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from config import (
    PHANTOM_BACKGROUND, PHANTOM_CENTER_JITTER, PHANTOM_GREY_LEVELS, PHANTOM_LAYERS, PHANTOM_MIN_DIMS,
    RANDOM_SMOOTH_SIGMA, get_degradation_preset
)
from core.exceptions import ParameterError, ShapeError
from core.logging import get_logger

from .operators import (
    DecimationSpec, PsfSpec, blur_apply, decimate, make_gaussian_psf, psf_to_spectrum
)
from .volume import Volume3D

logger = get_logger(__name__)

RNG_ALGORITHMS = ("PCG64", "MT19937", "Philox", "SFC64")

PhantomBuilder = Callable[[tuple, np.random.Generator, float], np.ndarray]


def make_rng(seed: int, algorithm: str = "PCG64") -> np.random.Generator:
    """Seeded generator with an explicit bit-generator algorithm"""
    if algorithm not in RNG_ALGORITHMS:
        raise ParameterError(f"Unknown RNG algorithm '{algorithm}'. Available: {list(RNG_ALGORITHMS)}")
    if int(seed) < 0:
        raise ParameterError(f"RNG seed must be nonnegative, got {seed}")
    return np.random.Generator(getattr(np.random, algorithm)(int(seed)))


# -- phantoms ----------------------------------------------------------------

def _normalized_grid(dims) -> List[np.ndarray]:
    # voxel centers mapped to [-1, 1] along each axis
    axes = [(2.0 * np.arange(d) + 1.0) / d - 1.0 for d in dims]
    return np.meshgrid(*axes, indexing='ij')


def _nested_ellipsoids(dims, rng: np.random.Generator, value: float) -> np.ndarray:
    if any(d < m for d, m in zip(dims, PHANTOM_MIN_DIMS)):
        raise ShapeError(f"Nested-ellipsoid phantom needs dims >= {PHANTOM_MIN_DIMS}, got {tuple(dims)}")
    grid = _normalized_grid(dims)
    jitter = rng.uniform(-PHANTOM_CENTER_JITTER, PHANTOM_CENTER_JITTER, size=3)
    out = np.full(dims, PHANTOM_GREY_LEVELS * PHANTOM_BACKGROUND)
    for name, semi_axes, center, intensity in PHANTOM_LAYERS:
        radius = sum(((g - c - j) / a) ** 2 for g, a, c, j in zip(grid, semi_axes, center, jitter))
        out[radius <= 1.0] = PHANTOM_GREY_LEVELS * intensity
    return out


def _random_smooth(dims, rng: np.random.Generator, value: float) -> np.ndarray:
    noise = rng.standard_normal(dims)
    smooth = gaussian_filter(noise, sigma=RANDOM_SMOOTH_SIGMA, mode='wrap')
    span = smooth.max() - smooth.min()
    if span == 0:
        return np.zeros(dims)
    return PHANTOM_GREY_LEVELS * (smooth - smooth.min()) / span


def _constant(dims, rng: np.random.Generator, value: float) -> np.ndarray:
    return np.full(dims, float(value))


class PhantomFactory:
    """Registry of phantom builders keyed by kind"""

    _builders: Dict[str, PhantomBuilder] = {}

    @classmethod
    def register(cls, kind: str, builder: PhantomBuilder):
        cls._builders[kind] = builder

    @classmethod
    def create(cls, kind: str, dims, rng: np.random.Generator, value: float = 0.5) -> Volume3D:
        if kind not in cls._builders:
            available = list(cls._builders.keys())
            raise ParameterError(f"Unknown phantom kind '{kind}'. Available: {available}")
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ShapeError(f"Phantom dims must be three positive integers, got {dims}")
        return Volume3D(cls._builders[kind](dims, rng, value))

    @classmethod
    def available_kinds(cls) -> List[str]:
        return list(cls._builders.keys())


PhantomFactory.register("nested-ellipsoids", _nested_ellipsoids)
PhantomFactory.register("random-smooth", _random_smooth)
PhantomFactory.register("constant", _constant)


def make_phantom(dims, kind: str = "nested-ellipsoids", seed: int = 0, value: float = 0.5,
                 rng_algorithm: str = "PCG64") -> Volume3D:
    """
    Deterministic ground-truth volume.

    Nested ellipsoids and random-smooth volumes span 8-bit grey levels,
    0 to ``PHANTOM_GREY_LEVELS``. ``value`` is only read by the constant kind.
    """
    phantom = PhantomFactory.create(kind, dims, make_rng(seed, rng_algorithm), value)
    logger.debug(f"Built {kind} phantom {phantom.dims} with seed {seed}")
    return phantom


# -- degradation -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DegradationRecipe:
    """Blur, decimation and noise settings; ``bsnr_db=None`` means noiseless"""
    psf: PsfSpec
    spec: DecimationSpec
    bsnr_db: Optional[float] = None
    rng_seed: int = 0
    rng_algorithm: str = "PCG64"

    def __post_init__(self):
        if self.bsnr_db is not None:
            if not math.isfinite(float(self.bsnr_db)):
                raise ParameterError(f"BSNR must be finite, got {self.bsnr_db}")
            object.__setattr__(self, 'bsnr_db', float(self.bsnr_db))
        if int(self.rng_seed) < 0:
            raise ParameterError(f"RNG seed must be nonnegative, got {self.rng_seed}")
        if self.rng_algorithm not in RNG_ALGORITHMS:
            raise ParameterError(f"Unknown RNG algorithm '{self.rng_algorithm}'")
        object.__setattr__(self, 'rng_seed', int(self.rng_seed))

    @property
    def noiseless(self) -> bool:
        return self.bsnr_db is None

    @classmethod
    def from_preset(cls, name: str, hr_dims, seed: int = 0) -> 'DegradationRecipe':
        preset = get_degradation_preset(name)
        return cls(
            psf=PsfSpec(kernel_size=preset["psf_size"], sigma=preset["psf_sigma"]),
            spec=DecimationSpec.from_hr(hr_dims, preset["decimation"]),
            bsnr_db=preset["bsnr_db"],
            rng_seed=seed,
        )

    def to_flags(self) -> Dict[str, str]:
        """The recipe as the degrade subcommand's flag values"""
        return {
            "psf_size": ",".join(str(k) for k in self.psf.kernel_size),
            "psf_sigma": ",".join(f"{s:g}" for s in self.psf.sigma),
            "decim": ",".join(str(r) for r in self.spec.rates),
            "bsnr": "none" if self.noiseless else f"{self.bsnr_db:g}",
            "seed": str(self.rng_seed),
            "rng": self.rng_algorithm,
        }


@dataclass(frozen=True, eq=False)
class DegradationResult:
    observation: Volume3D
    clean: Volume3D
    noise: Volume3D
    noise_sigma: float

    @property
    def measured_bsnr_db(self) -> float:
        noise_var = float(np.var(self.noise.data))
        if noise_var == 0:
            return float('inf')
        return float(10.0 * np.log10(np.var(self.clean.data) / noise_var))


def _is_delta(psf: PsfSpec) -> bool:
    return int(np.count_nonzero(psf.kernel())) == 1


def degrade_detailed(x: Volume3D, recipe: DegradationRecipe) -> DegradationResult:
    """y = D H x + n with the clean signal and the noise kept apart"""
    spec = recipe.spec
    if x.dims != spec.hr_dims:
        raise ShapeError(f"Ground truth has dims {x.dims}, recipe expects {spec.hr_dims}")

    if _is_delta(recipe.psf):
        blurred = x
    else:
        otf = psf_to_spectrum(make_gaussian_psf(recipe.psf, spec.hr_dims))
        blurred = blur_apply(x, otf)
    clean = decimate(blurred, spec)

    if recipe.noiseless:
        return DegradationResult(observation=clean, clean=clean,
                                 noise=Volume3D.zeros(spec.lr_dims), noise_sigma=0.0)

    signal_var = float(np.var(clean.data))
    if signal_var == 0:
        logger.warning("Blurred-decimated signal is constant; BSNR calibration gives zero noise")
    sigma = math.sqrt(signal_var / 10.0 ** (recipe.bsnr_db / 10.0))
    rng = make_rng(recipe.rng_seed, recipe.rng_algorithm)
    noise = sigma * rng.standard_normal(spec.lr_dims)
    logger.debug(f"BSNR {recipe.bsnr_db:g} dB -> noise sigma {sigma:.4e}")
    return DegradationResult(observation=Volume3D(clean.data + noise), clean=clean,
                             noise=Volume3D(noise), noise_sigma=sigma)


def degrade(x: Volume3D, recipe: DegradationRecipe) -> Volume3D:
    """Observed LR volume D H x + n"""
    return degrade_detailed(x, recipe).observation
