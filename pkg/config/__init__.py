"""
Configuration Package
FSR3D - 3D single-image super-resolution toolkit

Static presets for simulation and benchmarking.
"""

from .simulation_config import (
    DEGRADATION_PRESETS, PHANTOM_LAYERS, PHANTOM_BACKGROUND, PHANTOM_GREY_LEVELS, PHANTOM_MIN_DIMS,
    PHANTOM_CENTER_JITTER, RANDOM_SMOOTH_SIGMA, BENCH_CONFIG,
    phantom_palette, get_degradation_preset, get_preset_names
)

__all__ = [
    'DEGRADATION_PRESETS', 'PHANTOM_LAYERS', 'PHANTOM_BACKGROUND', 'PHANTOM_GREY_LEVELS', 'PHANTOM_MIN_DIMS',
    'PHANTOM_CENTER_JITTER', 'RANDOM_SMOOTH_SIGMA', 'BENCH_CONFIG',
    'phantom_palette', 'get_degradation_preset', 'get_preset_names'
]
