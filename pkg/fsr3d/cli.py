#!/usr/bin/env python3
"""
FSR3D Command-Line Interface

Subcommands: phantom, degrade, tikhonov, tv, psnr, bench, selftest, slice.

Every run prints a ``key=value`` manifest on standard output (and to
``--manifest PATH`` when given); logs go to standard error. Exit codes:
0 success, 1 numeric failure, 2 usage or I/O error.
"""

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import BENCH_CONFIG, get_degradation_preset, get_preset_names
from core.config import get_config, validate_config
from core.exceptions import FsrError, ParameterError
from core.logging import get_logger, setup_logging
from core.utils import Timer, ensure_directory, parse_triple

from . import __version__
from .operators import (
    AXIS_NAMES, DecimationSpec, PsfSpec, make_gaussian_psf, nearest_upsample, psf_to_spectrum,
    zero_fill_upsample
)
from .selftest import run_selftest
from .sim import DegradationRecipe, PhantomFactory, degrade_detailed, make_phantom
from .solvers import TikhonovConfig, TikhonovPlan, TvAdmmConfig, admm_l2l2, admm_tv
from .volume import Volume3D, extract_slice, psnr, read_volume, write_volume

logger = get_logger(__name__)

# wall-clock derived manifest fields; everything else is deterministic
TIMING_SUFFIXES = ("seconds", "speedup", "scaling_ratio")


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12g}"
    if isinstance(value, (tuple, list)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


@dataclass
class RunManifest:
    """Line-oriented record of one CLI run"""
    command: str
    flags: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0
    status: str = "ok"
    version: str = __version__

    def to_lines(self) -> List[str]:
        # metrics keep insertion order so bench rows stay ordered by size
        lines = [f"command={self.command}", f"version={self.version}", f"status={self.status}"]
        lines += [f"flag.{k}={_format_value(v)}" for k, v in sorted(self.flags.items())]
        lines += [f"input.{k}={v}" for k, v in sorted(self.inputs.items())]
        lines += [f"output.{k}={v}" for k, v in sorted(self.outputs.items())]
        lines += [f"metric.{k}={_format_value(v)}" for k, v in self.metrics.items()]
        lines.append(f"seconds={self.seconds:.6f}")
        return lines

    def render(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    def emit(self, manifest_path: Optional[str] = None) -> None:
        text = self.render()
        sys.stdout.write(text)
        sys.stdout.flush()
        if manifest_path:
            path = Path(manifest_path)
            ensure_directory(path.parent)
            path.write_text(text, encoding="utf-8")


def parse_manifest(text: str) -> Dict[str, str]:
    """Manifest text back into a dict"""
    entries = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition('=')
            entries[key] = value
    return entries


def strip_timing(entries: Dict[str, str]) -> Dict[str, str]:
    """Drop wall-clock fields, leaving the deterministic part of a manifest"""
    return {k: v for k, v in entries.items() if not k.endswith(TIMING_SUFFIXES)}


# -- flag helpers ------------------------------------------------------------

def _flags(args) -> Dict[str, Any]:
    skip = {"func", "command", "manifest", "log_level"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _bsnr(text: str) -> Optional[float]:
    if str(text).lower() in ("none", "noiseless", "inf"):
        return None
    try:
        return float(text)
    except ValueError:
        raise ParameterError(f"--bsnr expects a number or 'none', got {text!r}")


def _resolve_psf(args) -> PsfSpec:
    preset = get_degradation_preset(args.preset)
    size = parse_triple(args.psf_size, int, "--psf-size") if args.psf_size else preset["psf_size"]
    sigma = parse_triple(args.psf_sigma, float, "--psf-sigma") if args.psf_sigma else preset["psf_sigma"]
    return PsfSpec(kernel_size=size, sigma=sigma)


def _resolve_rates(args):
    if args.decim:
        return parse_triple(args.decim, int, "--decim")
    return get_degradation_preset(args.preset)["decimation"]


def _reference_metrics(manifest: RunManifest, args, estimate: Volume3D) -> Optional[Volume3D]:
    if not getattr(args, "ref", None):
        return None
    reference = read_volume(args.ref)
    manifest.inputs["ref"] = args.ref
    manifest.metrics["psnr_db"] = psnr(reference, estimate, args.peak)
    return reference


# -- subcommands -------------------------------------------------------------

def cmd_phantom(args) -> RunManifest:
    """Write a synthetic ground-truth volume"""
    manifest = RunManifest("phantom", flags=_flags(args))
    dims = parse_triple(args.dims, int, "--dims")
    phantom = make_phantom(dims, kind=args.kind, seed=args.seed, value=args.value)
    _, payload = write_volume(args.out, phantom, dtype=args.dtype)
    manifest.outputs["volume"] = str(payload)
    manifest.metrics.update({"dims": phantom.dims, "min": float(phantom.data.min()),
                             "max": float(phantom.data.max())})
    return manifest


def cmd_degrade(args) -> RunManifest:
    """Blur, decimate and add noise to an HR volume"""
    manifest = RunManifest("degrade", flags=_flags(args))
    x = read_volume(args.input)
    manifest.inputs["volume"] = args.input
    bsnr = get_degradation_preset(args.preset)["bsnr_db"] if args.bsnr is None else _bsnr(args.bsnr)
    recipe = DegradationRecipe(
        psf=_resolve_psf(args),
        spec=DecimationSpec.from_hr(x.dims, _resolve_rates(args)),
        bsnr_db=bsnr,
        rng_seed=args.seed,
    )
    result = degrade_detailed(x, recipe)
    _, payload = write_volume(args.out, result.observation, dtype=args.dtype)
    manifest.outputs["volume"] = str(payload)
    manifest.metrics.update({
        "hr_dims": x.dims,
        "lr_dims": result.observation.dims,
        "noise_sigma": result.noise_sigma,
        "measured_bsnr_db": result.measured_bsnr_db,
    })
    return manifest


def _load_problem(args, manifest: RunManifest):
    y = read_volume(args.input)
    manifest.inputs["observation"] = args.input
    spec = DecimationSpec.from_lr(y.dims, _resolve_rates(args))
    psf = make_gaussian_psf(_resolve_psf(args), spec.hr_dims)
    return y, spec, psf


def cmd_tikhonov(args) -> RunManifest:
    """Closed-form Tikhonov super-resolution"""
    manifest = RunManifest("tikhonov", flags=_flags(args))
    y, spec, psf = _load_problem(args, manifest)
    lam = args.lam if args.lam is not None else get_config().solver.tikhonov_lambda
    if args.xbar == "zerofill":
        cfg = TikhonovConfig.with_zero_fill_prior(y, spec, lam)
    else:
        cfg = TikhonovConfig(xbar=read_volume(args.xbar), lam=lam)
        manifest.inputs["xbar"] = args.xbar

    with Timer("tikhonov plan") as plan_timer:
        plan = TikhonovPlan.build(psf_to_spectrum(psf), spec, cfg.lam)
    with Timer("tikhonov solve") as timer:
        x = plan.solve(y, cfg.xbar)
    _, payload = write_volume(args.out, x, dtype=args.dtype)
    manifest.outputs["volume"] = str(payload)
    manifest.metrics.update({
        "lambda": cfg.lam,
        "hr_dims": x.dims,
        "plan_seconds": plan_timer.duration,
        "solve_seconds": timer.duration,
    })
    _reference_metrics(manifest, args, x)
    return manifest


def cmd_tv(args) -> RunManifest:
    """ADMM total-variation super-resolution"""
    manifest = RunManifest("tv", flags=_flags(args))
    y, spec, psf = _load_problem(args, manifest)

    init, init_volume = args.init, None
    if init not in ("zero", "upsampled"):
        init_volume = read_volume(init)
        manifest.inputs["init"] = init
        init = "provided"
    cfg = TvAdmmConfig.from_defaults(
        lam=args.lam, mu=args.mu, max_iters=args.iters, rel_tol=args.tol, tau=args.tau,
        init=init, init_volume=init_volume, isotropic=not args.anisotropic, progress=args.progress,
    )

    x, report = admm_tv(y, psf, spec, cfg)
    _, payload = write_volume(args.out, x, dtype=args.dtype)
    manifest.outputs["volume"] = str(payload)
    manifest.metrics.update({
        "lambda": cfg.lam,
        "mu": cfg.mu,
        "max_iters": cfg.max_iters,
        "tau": cfg.effective_tau,
        "iterations": report.iterations,
        "converged": report.converged,
        "initial_objective": report.initial_objective,
        "final_objective": report.final_objective,
        "final_primal_residual": report.primal_residual[-1],
        "solve_seconds": report.seconds,
    })
    reference = _reference_metrics(manifest, args, x)
    if reference is not None:
        manifest.metrics["zerofill_psnr_db"] = psnr(reference, zero_fill_upsample(y, spec), args.peak)
        manifest.metrics["nearest_psnr_db"] = psnr(reference, nearest_upsample(y, spec), args.peak)
    return manifest


def cmd_psnr(args) -> RunManifest:
    """PSNR of an estimate against a reference"""
    manifest = RunManifest("psnr", flags=_flags(args))
    reference, estimate = read_volume(args.ref), read_volume(args.est)
    manifest.inputs.update({"ref": args.ref, "est": args.est})
    manifest.metrics["psnr_db"] = psnr(reference, estimate, args.peak)
    return manifest


def cmd_bench(args) -> RunManifest:
    """Time the closed-form solver against the iterative baseline across sizes"""
    manifest = RunManifest("bench", flags=_flags(args))
    sizes = sorted({int(s) for s in str(args.sizes).split(',') if s.strip()})
    if not sizes or sizes[0] < 1:
        raise ParameterError(f"--sizes expects positive integers, got {args.sizes!r}")
    rates = parse_triple(args.decim, int, "--decim")
    repeats = max(1, int(args.repeats))
    preset = get_degradation_preset(args.preset)

    previous = None
    for row, n in enumerate(sizes):
        recipe = DegradationRecipe(psf=_resolve_psf(args), spec=DecimationSpec.from_hr((n, n, n), rates),
                                   bsnr_db=preset["bsnr_db"], rng_seed=args.seed)
        truth = make_phantom((n, n, n), seed=args.seed)
        y = degrade_detailed(truth, recipe).observation
        otf = psf_to_spectrum(make_gaussian_psf(recipe.psf, recipe.spec.hr_dims))
        cfg = TikhonovConfig.with_zero_fill_prior(y, recipe.spec)

        with Timer(f"tikhonov plan {n}^3") as plan_timer:
            plan = TikhonovPlan.build(otf, recipe.spec, cfg.lam)
        timings = []
        for _ in range(repeats):
            with Timer(f"tikhonov solve {n}^3") as timer:
                x_fast = plan.solve(y, cfg.xbar)
            timings.append(timer.duration)
        fast_seconds = min(timings)
        key = f"row{row}"
        manifest.metrics[f"{key}.size"] = n
        manifest.metrics[f"{key}.plan_seconds"] = plan_timer.duration
        manifest.metrics[f"{key}.tikhonov_seconds"] = fast_seconds
        manifest.metrics[f"{key}.tikhonov_psnr_db"] = psnr(truth, x_fast)

        if previous is not None:
            manifest.metrics[f"{key}.scaling_ratio"] = fast_seconds / max(previous, 1e-12)
        previous = fast_seconds

        if n <= args.admm_max_size:
            x_admm, report = admm_l2l2(y, otf, recipe.spec, cfg, iters=args.admm_iters, rel_tol=args.admm_tol)
            manifest.metrics[f"{key}.admm_iterations"] = report.iterations
            manifest.metrics[f"{key}.admm_seconds"] = report.seconds
            manifest.metrics[f"{key}.admm_psnr_db"] = psnr(truth, x_admm)
            manifest.metrics[f"{key}.psnr_gap_db"] = abs(psnr(truth, x_admm) - psnr(truth, x_fast))
            manifest.metrics[f"{key}.speedup"] = report.seconds / max(fast_seconds, 1e-12)
        logger.info(f"{n}^3: tikhonov solve {fast_seconds:.4f}s")
    return manifest


def cmd_selftest(args) -> RunManifest:
    """Dense-oracle verification suite"""
    manifest = RunManifest("selftest", flags=_flags(args))
    results = run_selftest(seed=args.seed, perturb_blocks=args.perturb_blocks)
    for result in results:
        manifest.metrics[f"{result.name}.max_dev"] = float(result.deviation)
        manifest.metrics[f"{result.name}.passed"] = result.passed
    failed = [r.name for r in results if not r.passed]
    manifest.metrics["failed"] = len(failed)
    if failed:
        manifest.status = "fail"
    return manifest


def cmd_slice(args) -> RunManifest:
    """Export an axis-aligned plane in the volume format"""
    manifest = RunManifest("slice", flags=_flags(args))
    vol = read_volume(args.input)
    manifest.inputs["volume"] = args.input
    axis = AXIS_NAMES.index(args.axis) if args.axis in AXIS_NAMES else int(args.axis)
    plane = extract_slice(vol, axis, args.index)
    _, payload = write_volume(args.out, plane, dtype=args.dtype)
    manifest.outputs["volume"] = str(payload)
    manifest.metrics["dims"] = plane.dims
    return manifest


# -- parser ------------------------------------------------------------------

def _add_forward_model(sub):
    sub.add_argument("--preset", default="synthetic", choices=get_preset_names(),
                     help="Degradation preset supplying defaults for the flags below")
    sub.add_argument("--psf-size", help="Kernel size r,c,s (odd)")
    sub.add_argument("--psf-sigma", help="Gaussian standard deviations a,b,c")
    sub.add_argument("--decim", help="Decimation rates dr,dc,ds")


def _add_output(sub):
    sub.add_argument("--out", required=True, help="Output volume path (without suffix)")
    sub.add_argument("--dtype", default="f64", choices=["f32", "f64"], help="Payload precision")


def _add_reference(sub):
    sub.add_argument("--ref", help="Ground-truth volume for PSNR")
    sub.add_argument("--peak", type=float, help="PSNR peak (default: reference max)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="Also write the manifest to this path")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Override FSR_LOG_LEVEL")

    parser = argparse.ArgumentParser(prog="fsr3d", description="3D single-image super-resolution toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    phantom = subparsers.add_parser("phantom", parents=[common], help="Create a synthetic phantom")
    _add_output(phantom)
    phantom.add_argument("--dims", default="64,64,64", help="Volume dims m,n,s")
    phantom.add_argument("--kind", default="nested-ellipsoids", choices=PhantomFactory.available_kinds())
    phantom.add_argument("--seed", type=int, default=0)
    phantom.add_argument("--value", type=float, default=0.5, help="Value of the constant kind")
    phantom.set_defaults(func=cmd_phantom)

    degrade = subparsers.add_parser("degrade", parents=[common], help="Blur, decimate and add noise")
    degrade.add_argument("--in", dest="input", required=True, help="HR input volume")
    _add_output(degrade)
    _add_forward_model(degrade)
    degrade.add_argument("--bsnr", help="Noise level in dB, or 'none' for noiseless")
    degrade.add_argument("--seed", type=int, default=0)
    degrade.set_defaults(func=cmd_degrade)

    tikhonov = subparsers.add_parser("tikhonov", parents=[common], help="Closed-form Tikhonov solve")
    tikhonov.add_argument("--in", dest="input", required=True, help="LR observation")
    _add_output(tikhonov)
    _add_forward_model(tikhonov)
    tikhonov.add_argument("--lambda", dest="lam", type=float, help="Regularization weight")
    tikhonov.add_argument("--xbar", default="zerofill", help="Prior volume path or 'zerofill'")
    _add_reference(tikhonov)
    tikhonov.set_defaults(func=cmd_tikhonov)

    tv = subparsers.add_parser("tv", parents=[common], help="ADMM total-variation solve")
    tv.add_argument("--in", dest="input", required=True, help="LR observation")
    _add_output(tv)
    _add_forward_model(tv)
    tv.add_argument("--lambda", dest="lam", type=float, help="TV weight (default 0.06)")
    tv.add_argument("--mu", type=float, help="ADMM penalty (default 0.1)")
    tv.add_argument("--iters", type=int, help="Maximum iterations (default 30)")
    tv.add_argument("--tol", type=float, help="Relative x-change stopping tolerance")
    tv.add_argument("--tau", type=float, help="Zero-frequency floor (default 1e-8*mu)")
    tv.add_argument("--init", default="zero", help="zero, upsampled or a volume path")
    tv.add_argument("--anisotropic", action="store_true", help="Componentwise TV")
    tv.add_argument("--progress", action="store_true", help="Show a progress bar")
    _add_reference(tv)
    tv.set_defaults(func=cmd_tv)

    psnr_parser = subparsers.add_parser("psnr", parents=[common], help="PSNR between two volumes")
    psnr_parser.add_argument("--ref", required=True)
    psnr_parser.add_argument("--est", required=True)
    psnr_parser.add_argument("--peak", type=float)
    psnr_parser.set_defaults(func=cmd_psnr)

    bench = subparsers.add_parser("bench", parents=[common], help="Timing harness")
    bench.add_argument("--sizes", default=",".join(str(s) for s in BENCH_CONFIG["sizes"]),
                       help="Comma separated HR edge lengths")
    bench.add_argument("--preset", default="synthetic", choices=get_preset_names())
    bench.add_argument("--psf-size", help="Kernel size r,c,s (odd)")
    bench.add_argument("--psf-sigma", help="Gaussian standard deviations a,b,c")
    bench.add_argument("--decim", default=",".join(str(r) for r in BENCH_CONFIG["decimation"]))
    bench.add_argument("--admm-max-size", type=int, default=BENCH_CONFIG["admm_max_size"],
                       help="Skip the iterative baseline above this edge length")
    bench.add_argument("--admm-iters", type=int, default=BENCH_CONFIG["admm_iters"])
    bench.add_argument("--admm-tol", type=float, default=BENCH_CONFIG["admm_rel_tol"])
    bench.add_argument("--repeats", type=int, default=BENCH_CONFIG["repeats"])
    bench.add_argument("--seed", type=int, default=BENCH_CONFIG["seed"])
    bench.set_defaults(func=cmd_bench)

    selftest = subparsers.add_parser("selftest", parents=[common], help="Dense-oracle checks")
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--perturb-blocks", action="store_true",
                          help="Corrupt the folded block order; the suite must then fail")
    selftest.set_defaults(func=cmd_selftest)

    slice_parser = subparsers.add_parser("slice", parents=[common], help="Export a 2D plane")
    slice_parser.add_argument("--in", dest="input", required=True)
    _add_output(slice_parser)
    slice_parser.add_argument("--axis", default="slice", choices=list(AXIS_NAMES) + ["0", "1", "2"])
    slice_parser.add_argument("--index", type=int, required=True)
    slice_parser.set_defaults(func=cmd_slice)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if not args.command:
        parser.print_help(sys.stderr)
        return 2

    try:
        config = get_config()
        validate_config()
    except FsrError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    setup_logging(level=args.log_level or config.log_level, log_file=config.log_file,
                  enable_colors=config.enable_colors, stream=sys.stderr)

    try:
        with Timer(args.command) as timer:
            manifest = args.func(args)
        manifest.seconds = timer.duration
        manifest.emit(args.manifest)
        return 0 if manifest.status == "ok" else 1
    except FsrError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("Operation cancelled by user", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
