"""
FSR3D - 3D single-image super-resolution toolkit

Fast frequency-domain super-resolution of volumes: closed-form Tikhonov
and ADMM total-variation solvers built on the aliasing structure of
decimation in the Fourier domain.
"""

__version__ = "1.0.0"
