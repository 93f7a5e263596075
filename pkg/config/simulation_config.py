#!/usr/bin/env python3
"""
Simulation Configuration
FSR3D - 3D single-image super-resolution toolkit

Static presets for the synthetic degradation protocol, the phantom
geometry and the benchmark harness.
"""

from typing import Dict, Any, List

from core.exceptions import ConfigurationError

# Degradation protocols
DEGRADATION_PRESETS = {
    "synthetic": {
        "description": "Gaussian blur 9x9x9 sigma 3, decimation 2 per axis, BSNR 30 dB",
        "psf_size": (9, 9, 9),
        "psf_sigma": (3.0, 3.0, 3.0),
        "decimation": (2, 2, 2),
        "bsnr_db": 30.0,
    },
    "cbct": {
        "description": "Anisotropic Gaussian PSF estimated for dental CBCT",
        "psf_size": (9, 9, 3),
        "psf_sigma": (5.8, 5.3, 0.9),
        "decimation": (2, 2, 2),
        "bsnr_db": 30.0,
    },
    "identity": {
        "description": "No blur, no decimation, no noise",
        "psf_size": (1, 1, 1),
        "psf_sigma": (1.0, 1.0, 1.0),
        "decimation": (1, 1, 1),
        "bsnr_db": None,
    },
}

# Nested ellipsoid phantom: (name, semi-axes, center, relative intensity), painted in order.
# Coordinates are normalized to [-1, 1] along each axis. Relative intensities in
# [0, 1] are stored as 8-bit grey levels, the scale the TV defaults are tuned on.
PHANTOM_GREY_LEVELS = 255.0
PHANTOM_LAYERS = [
    ("crown", (0.80, 0.70, 0.90), (0.0, 0.0, 0.0), 1.00),
    ("dentin", (0.62, 0.52, 0.78), (0.0, 0.0, 0.0), 0.60),
    ("canal", (0.20, 0.20, 0.65), (0.0, 0.0, 0.05), 0.15),
]
PHANTOM_BACKGROUND = 0.0
PHANTOM_MIN_DIMS = (8, 8, 8)
PHANTOM_CENTER_JITTER = 0.05

# Random smooth phantom
RANDOM_SMOOTH_SIGMA = 2.0

# Benchmark harness
BENCH_CONFIG = {
    "sizes": [32, 64, 128],
    "decimation": (2, 2, 2),
    "admm_max_size": 64,
    "admm_iters": 2000,
    "admm_rel_tol": 1e-10,
    "repeats": 3,
    "seed": 1,
}


def phantom_palette() -> List[float]:
    """Grey levels a nested-ellipsoid phantom can take"""
    return [PHANTOM_GREY_LEVELS * v for v in [PHANTOM_BACKGROUND] + [layer[3] for layer in PHANTOM_LAYERS]]


def get_degradation_preset(name: str) -> Dict[str, Any]:
    """Look up a degradation preset by name"""
    if name not in DEGRADATION_PRESETS:
        available = list(DEGRADATION_PRESETS.keys())
        raise ConfigurationError(f"Unknown degradation preset '{name}'. Available: {available}")
    return dict(DEGRADATION_PRESETS[name])


def get_preset_names() -> List[str]:
    """Names of all degradation presets"""
    return list(DEGRADATION_PRESETS.keys())
