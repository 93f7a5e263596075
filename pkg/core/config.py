"""
FSR3D - Configuration Management
Centralized configuration with environment variable handling and validation
"""

import os
from typing import Optional, List
from dataclasses import dataclass, field
from pathlib import Path

from core.exceptions import ConfigurationError


@dataclass
class NumericsConfig:
    """Numeric kernel settings"""
    fft_workers: int = 1
    dense_limit: int = 4096
    residue_tol: float = 1e-8


@dataclass
class SolverDefaults:
    """Default hyperparameters of the reconstruction solvers"""
    tikhonov_lambda: float = 0.01
    tv_lambda: float = 0.06
    tv_mu: float = 0.1
    tv_iters: int = 30
    tv_rel_tol: float = 1e-6
    tau_scale: float = 1e-8
    l2l2_iters: int = 2000
    l2l2_rel_tol: float = 1e-10


@dataclass
class AppConfig:
    """Main application configuration"""

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None
    enable_colors: bool = True

    # Sub-configurations
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    solver: SolverDefaults = field(default_factory=SolverDefaults)

    @classmethod
    def from_env(cls) -> 'AppConfig':
        """Create configuration from environment variables"""

        # Load .env file if it exists
        env_file = Path(__file__).parent.parent / '.env'
        if env_file.exists():
            from dotenv import load_dotenv
            load_dotenv(env_file)

        try:
            numerics = NumericsConfig(
                fft_workers=int(os.getenv('FSR_FFT_WORKERS', '1')),
                dense_limit=int(os.getenv('FSR_DENSE_LIMIT', '4096')),
                residue_tol=float(os.getenv('FSR_RESIDUE_TOL', '1e-8'))
            )

            solver = SolverDefaults(
                tikhonov_lambda=float(os.getenv('FSR_TIKHONOV_LAMBDA', '0.01')),
                tv_lambda=float(os.getenv('FSR_TV_LAMBDA', '0.06')),
                tv_mu=float(os.getenv('FSR_TV_MU', '0.1')),
                tv_iters=int(os.getenv('FSR_TV_ITERS', '30')),
                tv_rel_tol=float(os.getenv('FSR_TV_TOL', '1e-6')),
                tau_scale=float(os.getenv('FSR_TAU_SCALE', '1e-8')),
                l2l2_iters=int(os.getenv('FSR_L2L2_ITERS', '2000')),
                l2l2_rel_tol=float(os.getenv('FSR_L2L2_TOL', '1e-10'))
            )
        except ValueError as e:
            raise ConfigurationError(f"Malformed numeric environment variable: {e}")

        return cls(
            log_level=os.getenv('FSR_LOG_LEVEL', 'INFO'),
            log_file=os.getenv('FSR_LOG_FILE') or None,
            enable_colors=os.getenv('FSR_LOG_COLORS', 'true').lower() == 'true',
            numerics=numerics,
            solver=solver
        )

    def validate(self) -> List[str]:
        """Validate configuration and return list of errors"""
        errors = []

        if self.log_level.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            errors.append(f"FSR_LOG_LEVEL has unknown level {self.log_level!r}")

        if self.numerics.fft_workers < 1:
            errors.append("FSR_FFT_WORKERS must be at least 1")

        if self.numerics.dense_limit < 1:
            errors.append("FSR_DENSE_LIMIT must be positive")

        if not 0 < self.numerics.residue_tol < 1:
            errors.append("FSR_RESIDUE_TOL must lie in (0, 1)")

        if self.solver.tikhonov_lambda <= 0 or self.solver.tv_lambda <= 0:
            errors.append("Regularization weights must be positive")

        if self.solver.tv_mu <= 0:
            errors.append("FSR_TV_MU must be positive")

        if self.solver.tv_iters < 1 or self.solver.l2l2_iters < 1:
            errors.append("Iteration counts must be at least 1")

        if self.solver.tau_scale < 0:
            errors.append("FSR_TAU_SCALE must be nonnegative")

        return errors


# Global configuration instance
_config: Optional[AppConfig] = None


def get_config() -> AppConfig:
    """Get the global configuration instance"""
    global _config
    if _config is None:
        _config = AppConfig.from_env()
    return _config


def reload_config() -> AppConfig:
    """Reload configuration from environment"""
    global _config
    _config = AppConfig.from_env()
    return _config


def validate_config() -> None:
    """Validate current configuration and raise if invalid"""
    config = get_config()
    errors = config.validate()

    if errors:
        error_msg = "Configuration validation failed:\n" + "\n".join(f"- {error}" for error in errors)
        raise ConfigurationError(error_msg)
