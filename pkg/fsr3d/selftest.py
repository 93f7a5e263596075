#!/usr/bin/env python3
"""
Oracle Self-Test
FSR3D - 3D single-image super-resolution toolkit

Dense brute-force checks of the fast spectral machinery on small grids.
Each check returns a maximum deviation that is compared to a tolerance;
the CLI prints one line per check and fails if any deviation is too large.
"""

from dataclasses import dataclass
from itertools import product
from typing import Callable, List, Tuple

import numpy as np

from core.logging import get_logger
from core.utils import Timer

from .operators import (
    DecimationSpec, PsfSpec, SpectrumDiag, blur_apply, decimate, decimate_adjoint, finite_diff_spectra,
    forward_differences, forward_differences_adjoint, gradient_stack_adjoint, make_gaussian_psf,
    psf_to_spectrum
)
from .solvers import (
    TikhonovConfig, dense_tikhonov, dense_tv_x_update, make_gamma, tikhonov_fast, tv_shrink, tv_x_update
)
from .spectral import (
    FoldedSpectrum, dense_folded_lambda, fold_lambda, verify_decimation_identity, verify_folded_gram
)
from .volume import Volume3D, unitary_fftn

logger = get_logger(__name__)

SWEEP_LENGTHS = (2, 4, 6)
SWEEP_RATES = (1, 2, 3)

# (hr_dims, rates, psf kernel size) instances for the solver oracles
SOLVER_CASES = [
    ((8, 8, 8), (2, 2, 2), (3, 3, 3)),
    ((6, 4, 2), (3, 2, 1), (3, 3, 1)),
    ((4, 4, 4), (1, 2, 2), (3, 3, 3)),
    ((4, 6, 4), (2, 3, 2), (3, 3, 3)),
    ((6, 6, 6), (2, 1, 3), (5, 3, 3)),
]


@dataclass
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.deviation) and self.deviation < self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} max_dev={self.deviation:.3e} tol={self.tolerance:.0e}"


def sweep_specs(lengths=SWEEP_LENGTHS, rates=SWEEP_RATES) -> List[DecimationSpec]:
    """Every spec whose axis lengths come from ``lengths`` and rates divide them"""
    per_axis = [(n, r) for n in lengths for r in rates if n % r == 0]
    specs = []
    for (m, dr), (n, dc), (s, ds) in product(per_axis, repeat=3):
        specs.append(DecimationSpec.from_hr((m, n, s), (dr, dc, ds)))
    return specs


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny))


def _random_psf(rng: np.random.Generator, kernel_size, hr_dims) -> Volume3D:
    return make_gaussian_psf(PsfSpec(weights=rng.random(kernel_size)), hr_dims)


def _perturbed(folded: FoldedSpectrum) -> FoldedSpectrum:
    # rotate the block order so every block lands on the wrong alias offset
    flat = folded.blocks.reshape((-1,) + folded.blocks.shape[3:])
    rolled = np.roll(flat, 1, axis=0).reshape(folded.blocks.shape)
    return FoldedSpectrum(spec=folded.spec, blocks=rolled)


def check_decimation_identity(rng, perturb_blocks: bool = False) -> float:
    return max(verify_decimation_identity(spec) for spec in sweep_specs())


def check_folded_gram(rng, perturb_blocks: bool = False) -> float:
    deviation = 0.0
    for hr_dims, rates, _ in SOLVER_CASES[:3]:
        spec = DecimationSpec.from_hr(hr_dims, rates)
        otf = SpectrumDiag(rng.standard_normal(hr_dims) + 1j * rng.standard_normal(hr_dims))
        deviation = max(deviation, verify_folded_gram(otf, spec))
    return deviation


def check_folded_operator(rng, perturb_blocks: bool = False) -> float:
    deviation = 0.0
    for hr_dims, rates, _ in SOLVER_CASES:
        spec = DecimationSpec.from_hr(hr_dims, rates)
        otf = SpectrumDiag(rng.standard_normal(hr_dims) + 1j * rng.standard_normal(hr_dims))
        folded = fold_lambda(otf, spec)
        if perturb_blocks:
            folded = _perturbed(folded)
        v_hat = rng.standard_normal(hr_dims) + 1j * rng.standard_normal(hr_dims)
        fast = folded.apply_array(v_hat).ravel(order='F')
        dense = dense_folded_lambda(otf, spec) @ v_hat.ravel(order='F')
        deviation = max(deviation, _rel(fast, dense))
    return deviation


def check_tikhonov(rng, perturb_blocks: bool = False) -> float:
    deviation = 0.0
    for hr_dims, rates, kernel_size in SOLVER_CASES:
        spec = DecimationSpec.from_hr(hr_dims, rates)
        psf = _random_psf(rng, kernel_size, hr_dims)
        y = Volume3D(rng.standard_normal(spec.lr_dims))
        cfg = TikhonovConfig(xbar=Volume3D(rng.standard_normal(hr_dims)), lam=float(rng.uniform(0.005, 0.5)))
        fast = tikhonov_fast(y, psf_to_spectrum(psf), spec, cfg)
        dense = dense_tikhonov(y, psf, spec, cfg)
        deviation = max(deviation, _rel(fast.data, dense.data))
    return deviation


def check_tv_x_update(rng, perturb_blocks: bool = False) -> float:
    deviation = 0.0
    for hr_dims, rates, kernel_size in SOLVER_CASES:
        spec = DecimationSpec.from_hr(hr_dims, rates)
        psf = _random_psf(rng, kernel_size, hr_dims)
        otf = psf_to_spectrum(psf)
        mu = 0.1
        tau = 1e-8 * mu
        y = Volume3D(rng.standard_normal(spec.lr_dims))
        rho = tuple(Volume3D(rng.standard_normal(hr_dims)) for _ in range(3))
        theta_hat = unitary_fftn(gradient_stack_adjoint(np.stack([r.data for r in rho])))
        gamma = make_gamma(finite_diff_spectra(hr_dims), tau)
        fast = tv_x_update(y, fold_lambda(otf, spec), otf, spec, mu, theta_hat, gamma)
        dense = dense_tv_x_update(y, psf, spec, mu, rho, tau)
        deviation = max(deviation, _rel(fast.data, dense.data))
    return deviation


def _adjoint_gap(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.finfo(float).tiny)


def check_adjoints(rng, perturb_blocks: bool = False) -> float:
    spec = DecimationSpec.from_hr((6, 8, 4), (3, 2, 2))
    x = Volume3D(rng.standard_normal(spec.hr_dims))
    z = Volume3D(rng.standard_normal(spec.hr_dims))
    y = Volume3D(rng.standard_normal(spec.lr_dims))
    otf = psf_to_spectrum(_random_psf(rng, (3, 5, 3), spec.hr_dims))

    gaps = [
        _adjoint_gap(np.vdot(blur_apply(x, otf).data, z.data), np.vdot(x.data, blur_apply(z, otf, True).data)),
        _adjoint_gap(np.vdot(decimate(x, spec).data, y.data), np.vdot(x.data, decimate_adjoint(y, spec).data)),
    ]
    g = tuple(Volume3D(rng.standard_normal(spec.hr_dims)) for _ in range(3))
    lhs = sum(np.vdot(a.data, b.data) for a, b in zip(forward_differences(x), g))
    gaps.append(_adjoint_gap(lhs, np.vdot(x.data, forward_differences_adjoint(*g).data)))
    return max(gaps)


def check_shrink(rng, perturb_blocks: bool = False) -> float:
    dims = (1, 1, 1)
    cases = [
        ((3.0, 0.0, 0.0), 1.0, (2.0, 0.0, 0.0)),
        ((0.3, -0.4, 0.0), 1.0, (0.0, 0.0, 0.0)),
        ((0.0, 0.0, 0.0), 0.5, (0.0, 0.0, 0.0)),
        ((0.0, 6.0, -8.0), 5.0, (0.0, 3.0, -4.0)),
    ]
    deviation = 0.0
    for nu, threshold, expected in cases:
        out = tv_shrink(*(Volume3D.constant(dims, c) for c in nu), threshold)
        deviation = max(deviation, max(abs(o.data[0, 0, 0] - e) for o, e in zip(out, expected)))
    return deviation


CHECKS: List[Tuple[str, float, Callable]] = [
    ("decimation_identity_sweep", 1e-10, check_decimation_identity),
    ("folded_gram_substitution", 1e-10, check_folded_gram),
    ("folded_operator_vs_dense", 1e-12, check_folded_operator),
    ("tikhonov_fast_vs_dense", 1e-8, check_tikhonov),
    ("tv_x_update_vs_dense", 1e-6, check_tv_x_update),
    ("adjoint_inner_products", 1e-10, check_adjoints),
    ("tv_shrink_closed_form", 1e-12, check_shrink),
]


def run_selftest(seed: int = 0, perturb_blocks: bool = False) -> List[CheckResult]:
    """Run every oracle check; ``perturb_blocks`` corrupts the folded block order"""
    rng = np.random.default_rng(seed)
    results = []
    for name, tolerance, check in CHECKS:
        with Timer(name) as timer:
            deviation = check(rng, perturb_blocks=perturb_blocks)
        result = CheckResult(name=name, deviation=deviation, tolerance=tolerance, seconds=timer.duration)
        (logger.info if result.passed else logger.error)(result.line())
        results.append(result)
    return results
