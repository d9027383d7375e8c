"""Configuration management untuk estimation toolkit"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import psutil
import yaml
from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

# Load environment variables
load_dotenv()


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == 'true'


class Config:
    """Centralized configuration management"""

    # Logging
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')
    LOG_TO_FILE: bool = _env_bool('LOG_TO_FILE', 'false')
    LOG_DIR: str = os.getenv('LOG_DIR', 'logs')

    # Inner (Lagrange multiplier) solver
    INNER_TOL: float = float(os.getenv('INNER_TOL', '1e-10'))
    INNER_MAX_ITER: int = int(os.getenv('INNER_MAX_ITER', '100'))
    LAMBDA_DIVERGENCE: float = float(os.getenv('LAMBDA_DIVERGENCE', '1e8'))
    HULL_PENALTY: float = float(os.getenv('HULL_PENALTY', '1e10'))

    # Outer (MELE) loop
    OUTER_TOL: float = float(os.getenv('OUTER_TOL', '1e-8'))
    OBJECTIVE_TOL: float = float(os.getenv('OBJECTIVE_TOL', '1e-10'))
    OUTER_MAX_ITER: int = int(os.getenv('OUTER_MAX_ITER', '50'))
    BFGS_GTOL: float = float(os.getenv('BFGS_GTOL', '1e-8'))
    BFGS_MAX_ITER: int = int(os.getenv('BFGS_MAX_ITER', '200'))

    # Auxiliary basis reduction
    RANK_TOL: float = float(os.getenv('RANK_TOL', '1e-8'))

    # Working covariance
    WORKING_COV: str = os.getenv('WORKING_COV', 'exchangeable')
    RHO_MARGIN: float = float(os.getenv('RHO_MARGIN', '1e-6'))
    COV_FREEZE_TOL: float = float(os.getenv('COV_FREEZE_TOL', '1e-6'))

    # Simulation
    WORKER_THREADS: int = int(os.getenv('WORKER_THREADS', str(psutil.cpu_count() or 1)))
    FAILURE_ALARM: float = float(os.getenv('FAILURE_ALARM', '0.02'))

    # Monitoring
    METRICS_ENABLED: bool = _env_bool('METRICS_ENABLED', 'true')

    @classmethod
    def validate(cls) -> bool:
        """Validate configuration"""
        for name in ('INNER_TOL', 'OUTER_TOL', 'OBJECTIVE_TOL', 'BFGS_GTOL',
                     'RANK_TOL', 'RHO_MARGIN', 'COV_FREEZE_TOL', 'HULL_PENALTY'):
            if getattr(cls, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if cls.WORKER_THREADS < 1:
            raise ValueError("WORKER_THREADS must be at least 1")
        if cls.WORKING_COV not in ('independence', 'exchangeable', 'ar1'):
            raise ValueError(f"WORKING_COV has unknown structure {cls.WORKING_COV!r}")
        return True


@dataclass(frozen=True)
class FitConfig:
    """Numeric settings consumed by the estimators"""
    working_cov: str = field(default_factory=lambda: Config.WORKING_COV)
    inner_tol: float = field(default_factory=lambda: Config.INNER_TOL)
    inner_max_iter: int = field(default_factory=lambda: Config.INNER_MAX_ITER)
    outer_tol: float = field(default_factory=lambda: Config.OUTER_TOL)
    objective_tol: float = field(default_factory=lambda: Config.OBJECTIVE_TOL)
    outer_max_iter: int = field(default_factory=lambda: Config.OUTER_MAX_ITER)
    bfgs_gtol: float = field(default_factory=lambda: Config.BFGS_GTOL)
    bfgs_max_iter: int = field(default_factory=lambda: Config.BFGS_MAX_ITER)
    rank_tol: float = field(default_factory=lambda: Config.RANK_TOL)
    hull_penalty: float = field(default_factory=lambda: Config.HULL_PENALTY)
    lambda_divergence: float = field(default_factory=lambda: Config.LAMBDA_DIVERGENCE)
    rho_margin: float = field(default_factory=lambda: Config.RHO_MARGIN)
    cov_freeze_tol: float = field(default_factory=lambda: Config.COV_FREEZE_TOL)


Command = Literal['fit', 'ci', 'diagnose', 'simulate']
Method = Literal['proposed', 'lin', 'gee-naive', 'el-naive']


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run"""

    model_config = ConfigDict(extra='forbid')

    command: Command
    input: Optional[Path] = None
    layout: Optional[Path] = None
    method: Method = 'proposed'
    working_cov: Literal['independence', 'exchangeable', 'ar1'] = Field(
        default_factory=lambda: Config.WORKING_COV)

    inner_tol: float = Field(default_factory=lambda: Config.INNER_TOL)
    outer_tol: float = Field(default_factory=lambda: Config.OUTER_TOL)
    rank_tol: float = Field(default_factory=lambda: Config.RANK_TOL)
    inner_max_iter: int = Field(default_factory=lambda: Config.INNER_MAX_ITER)
    outer_max_iter: int = Field(default_factory=lambda: Config.OUTER_MAX_ITER)

    level: float = 0.95
    coords: Optional[List[str]] = None
    ci_method: Optional[Literal['profile', 'wald']] = None

    scenario: Optional[str] = None
    n: Optional[int] = None
    reps: int = 100
    methods: List[Method] = Field(default_factory=lambda: ['gee-naive', 'el-naive', 'lin', 'proposed'])
    seed: int = 0
    threads: int = Field(default_factory=lambda: Config.WORKER_THREADS)
    percent_units: bool = False
    dump_data: Optional[Path] = None

    center: Optional[List[str]] = None
    out: Optional[Path] = None
    format: Literal['csv', 'json'] = 'csv'
    log_level: Optional[str] = None

    @field_validator('coords', 'methods', 'center', mode='before')
    @classmethod
    def _split_names(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(',') if part.strip()]
        return value

    @field_validator('inner_tol', 'outer_tol', 'rank_tol')
    @classmethod
    def _positive_tolerance(cls, value: float, info) -> float:
        if not value > 0:
            raise ValueError(f"{info.field_name} must be positive")
        return value

    @field_validator('inner_max_iter', 'outer_max_iter', 'reps', 'threads')
    @classmethod
    def _positive_count(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be at least 1")
        return value

    @field_validator('level')
    @classmethod
    def _level_in_unit_interval(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("level must lie in (0, 1)")
        return value

    @field_validator('seed')
    @classmethod
    def _seed_64bit(cls, value: int) -> int:
        if not 0 <= value < 2 ** 64:
            raise ValueError("seed must be a non-negative 64-bit integer")
        return value

    def fit_config(self) -> FitConfig:
        """Numeric subset handed to the estimators"""
        return FitConfig(
            working_cov=self.working_cov,
            inner_tol=self.inner_tol,
            inner_max_iter=self.inner_max_iter,
            outer_tol=self.outer_tol,
            outer_max_iter=self.outer_max_iter,
            rank_tol=self.rank_tol,
        )


def read_key_values(path) -> Dict[str, Any]:
    """Read a flat key-value file (dotenv syntax) or a YAML mapping"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    if path.suffix.lower() in ('.yaml', '.yml'):
        with open(path, encoding='utf-8') as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path} must contain a mapping at top level")
        return dict(data)
    return {k.strip().lower().replace('-', '_'): v for k, v in dotenv_values(path).items()}


# Initialize configuration on import
Config.validate()
