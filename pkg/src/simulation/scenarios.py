"""
Simulation scenarios dengan replicate measurement errors
Y = β0 + β1 X1 + β2 X2 + ε, X1 observed through K noisy replicates
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np

from ..data.dataset import ColumnLayout, LongitudinalDataset, SubjectRecord
from ..estimation.covariance import CovarianceStructure, WorkingCovariance, materialize
from ..utils.config import read_key_values
from ..utils.errors import DataError

SEED_LIMIT = 2 ** 64


class DistKind(str, Enum):
    NORMAL = "normal"
    STUDENT_T = "t"
    EXPONENTIAL = "exp"


@dataclass(frozen=True)
class ErrorDist:
    """
    Replicate error distribution: Normal(0, sd), Student t(df), or an
    Exponential(rate) shifted by its mean 1/rate
    """
    kind: DistKind
    param: float

    def __post_init__(self):
        object.__setattr__(self, 'kind', DistKind(self.kind))
        object.__setattr__(self, 'param', float(self.param))
        if self.kind == DistKind.NORMAL and not self.param >= 0:
            raise DataError(f"normal sd must be non-negative, got {self.param}")
        if self.kind != DistKind.NORMAL and not self.param > 0:
            raise DataError(f"{self.kind.value} parameter must be positive, got {self.param}")

    @classmethod
    def parse(cls, text: str) -> 'ErrorDist':
        """'normal:0.6', 't:4' or 'exp:2'"""
        kind, sep, value = str(text).strip().partition(':')
        if not sep:
            raise DataError(f"error distribution {text!r} must look like 'normal:0.6', 't:4' or 'exp:2'")
        try:
            return cls(DistKind(kind.strip().lower()), float(value))
        except ValueError as exc:
            raise DataError(f"invalid error distribution {text!r}: {exc}") from exc

    @property
    def variance(self) -> float:
        if self.kind == DistKind.NORMAL:
            return self.param ** 2
        if self.kind == DistKind.STUDENT_T:
            return self.param / (self.param - 2.0) if self.param > 2 else float('inf')
        return 1.0 / self.param ** 2

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == DistKind.NORMAL:
            return self.param * rng.standard_normal(size)
        if self.kind == DistKind.STUDENT_T:
            # ratio of a normal to sqrt(chi-square/df)
            z = rng.standard_normal(size)
            return z / np.sqrt(rng.chisquare(self.param, size) / self.param)
        # inverse CDF, centered
        u = rng.random(size)
        return -np.log1p(-u) / self.param - 1.0 / self.param

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.param:g}"


def _as_floats(value) -> Tuple[float, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(',') if v.strip()]
    return tuple(float(v) for v in value)


def _as_dists(value) -> Tuple[ErrorDist, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(',') if v.strip()]
    return tuple(v if isinstance(v, ErrorDist) else ErrorDist.parse(v) for v in value)


@dataclass(frozen=True)
class Scenario:
    """Simulation setting with an exchangeable response error"""
    name: str
    n: int
    m: int = 6
    beta_true: Tuple[float, ...] = (1.0, 1.0, 1.0)
    rho: float = 0.6
    sigma_e2: float = 0.8
    error_dists: Tuple[ErrorDist, ...] = field(
        default_factory=lambda: (ErrorDist(DistKind.NORMAL, 0.6), ErrorDist(DistKind.NORMAL, 0.6)))

    def __post_init__(self):
        object.__setattr__(self, 'beta_true', _as_floats(self.beta_true))
        object.__setattr__(self, 'error_dists', _as_dists(self.error_dists))
        object.__setattr__(self, 'n', int(self.n))
        object.__setattr__(self, 'm', int(self.m))
        if self.n < 2:
            raise DataError(f"scenario needs at least 2 subjects, got n={self.n}")
        if self.m < 1:
            raise DataError(f"scenario needs at least 1 visit, got m={self.m}")
        if len(self.beta_true) != 3:
            raise DataError(f"beta_true must hold (intercept, x1, x2), got {self.beta_true}")
        if len(self.error_dists) < 2:
            raise DataError(f"at least 2 replicate error distributions are required, got {len(self.error_dists)}")
        if not self.sigma_e2 > 0:
            raise DataError(f"sigma_e2 must be positive, got {self.sigma_e2}")
        lower = -1.0 / (self.m - 1) if self.m > 1 else -1.0
        if not lower < self.rho < 1.0:
            raise DataError(f"rho={self.rho} outside the exchangeable range ({lower:.4g}, 1) for m={self.m}")

    @property
    def K(self) -> int:
        return len(self.error_dists)

    @property
    def layout(self) -> ColumnLayout:
        return ColumnLayout(exact_names=('x2',), errorprone_names=('x1',), has_intercept=True)

    @property
    def response_covariance(self) -> WorkingCovariance:
        return WorkingCovariance(CovarianceStructure.EXCHANGEABLE, self.sigma_e2, self.rho)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name, 'n': self.n, 'm': self.m, 'beta_true': list(self.beta_true),
            'rho': self.rho, 'sigma_e2': self.sigma_e2, 'error_dists': [str(d) for d in self.error_dists],
        }

    @classmethod
    def preset(cls, name: str, n: int = 500) -> 'Scenario':
        key = name.upper()
        if key not in PRESET_ERRORS:
            raise DataError(f"unknown scenario {name!r}, expected one of {sorted(PRESET_ERRORS)} or a file")
        return cls(key, n, error_dists=tuple(ErrorDist.parse(d) for d in PRESET_ERRORS[key]))

    @classmethod
    def from_file(cls, path, n: int = None) -> 'Scenario':
        """Scenario fields from a YAML or key-value file"""
        values = read_key_values(path)
        known = {'name', 'n', 'm', 'beta_true', 'rho', 'sigma_e2', 'error_dists'}
        unknown = sorted(set(values) - known)
        if unknown:
            raise DataError(f"Unknown scenario keys in {path}: {unknown}")
        kwargs = dict(values)
        kwargs.setdefault('name', str(path))
        if n is not None:
            kwargs['n'] = n
        if 'n' not in kwargs:
            raise DataError(f"scenario file {path} does not set n")
        for key in ('rho', 'sigma_e2'):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        return cls(**kwargs)


PRESET_ERRORS: Dict[str, Tuple[str, ...]] = {
    'C1': ('normal:0.6', 'normal:0.6'),
    'C2': ('normal:0.6', 't:4'),
    'C3': ('normal:0.6', 'normal:0.6', 'normal:0.6'),
    'C4': ('normal:0.6', 't:4', 'exp:2'),
}


def replication_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by a 64-bit seed"""
    if not 0 <= seed < SEED_LIMIT:
        raise DataError(f"seed must be a non-negative 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def generate_dataset(sc: Scenario, seed: int) -> LongitudinalDataset:
    """
    Draw one dataset: X1, X2 ~ N(0,1); ε_i ~ N(0, σ_e² R(ρ)) exchangeable;
    W(k) = X1 + ξ(k) with ξ(k) from the k-th error distribution.
    """
    rng = replication_rng(seed)
    n, m = sc.n, sc.m
    b0, b1, b2 = sc.beta_true

    x1 = rng.standard_normal((n, m))
    x2 = rng.standard_normal((n, m))
    cov, _ = materialize(sc.response_covariance, m)
    eps = rng.standard_normal((n, m)) @ np.linalg.cholesky(cov).T
    xi = np.stack([dist.sample(rng, (n, m)) for dist in sc.error_dists])
    y = b0 + b1 * x1 + b2 * x2 + eps
    w = x1[None, :, :] + xi

    subjects = []
    for i in range(n):
        x_exact = np.column_stack([np.ones(m), x2[i]])
        subjects.append(SubjectRecord(
            subject_id=str(i + 1),
            y=y[i],
            x_exact=x_exact,
            w_reps=w[:, i, :, None],
            visits=np.arange(1, m + 1),
        ))
    return LongitudinalDataset(tuple(subjects), sc.layout)
