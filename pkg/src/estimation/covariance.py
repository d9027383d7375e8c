"""
Working covariance matrices Σ_i used as weights by every estimator
Moment estimators on averaged-surrogate residuals
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..data.dataset import LongitudinalDataset
from ..utils.config import Config
from ..utils.errors import CovarianceError, DataError


class CovarianceStructure(str, Enum):
    """Supported working correlation structures"""
    INDEPENDENCE = "independence"
    EXCHANGEABLE = "exchangeable"
    AR1 = "ar1"


def _rho_bounds(structure: CovarianceStructure, max_m: int) -> Tuple[float, float]:
    """Open interval of correlations giving a positive definite matrix"""
    if structure == CovarianceStructure.EXCHANGEABLE:
        lower = -1.0 / (max_m - 1) if max_m > 1 else -1.0
        return lower, 1.0
    return -1.0, 1.0


@dataclass(frozen=True)
class WorkingCovariance:
    """Structure plus (sigma2, rho) of the within-subject working covariance"""
    structure: CovarianceStructure
    sigma2: float
    rho: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'structure', CovarianceStructure(self.structure))
        if self.structure == CovarianceStructure.INDEPENDENCE:
            object.__setattr__(self, 'rho', 0.0)
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise CovarianceError(f"sigma2 must be positive and finite, got {self.sigma2}")
        if not np.isfinite(self.rho):
            raise CovarianceError(f"rho must be finite, got {self.rho}")

    def correlation(self, m: int) -> np.ndarray:
        if m < 1:
            raise CovarianceError(f"visit count must be at least 1, got {m}")
        if self.structure == CovarianceStructure.INDEPENDENCE:
            return np.eye(m)
        lower, upper = _rho_bounds(self.structure, m)
        if m > 1 and not lower < self.rho < upper:
            raise CovarianceError(
                f"rho={self.rho} outside the positive definite range ({lower:.6g}, {upper}) "
                f"for {self.structure.value} with m={m}")
        if self.structure == CovarianceStructure.EXCHANGEABLE:
            corr = np.full((m, m), self.rho)
            np.fill_diagonal(corr, 1.0)
            return corr
        lags = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
        return self.rho ** lags

    def matrix(self, m: int) -> np.ndarray:
        return self.sigma2 * self.correlation(m)

    def inverses(self, visit_counts: Iterable[int]) -> Dict[int, np.ndarray]:
        """Inverse matrices keyed by visit count"""
        return {m: materialize(self, m)[1] for m in sorted(set(visit_counts))}

    def subject_inverses(self, ds: LongitudinalDataset) -> List[np.ndarray]:
        cache = self.inverses(ds.visit_counts)
        return [cache[s.m] for s in ds.subjects]

    def relative_change(self, other: 'WorkingCovariance') -> float:
        """Relative change of sigma2 combined with the absolute change of rho"""
        return max(abs(other.sigma2 - self.sigma2) / self.sigma2, abs(other.rho - self.rho))

    def to_dict(self) -> Dict[str, object]:
        return {'structure': self.structure.value, 'sigma2': float(self.sigma2), 'rho': float(self.rho)}


def materialize(sigma: WorkingCovariance, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Σ for m visits and its inverse through a Cholesky factorization"""
    mat = sigma.matrix(m)
    try:
        factor = cho_factor(mat, lower=True)
    except LinAlgError as exc:
        raise CovarianceError(f"working covariance with m={m} is not positive definite: {exc}") from exc
    inverse = cho_solve(factor, np.eye(m))
    # symmetrize rounding
    inverse = 0.5 * (inverse + inverse.T)
    return mat, inverse


def eigen_bounds(sigma: WorkingCovariance, visit_counts: Sequence[int]) -> Tuple[float, float]:
    """Smallest and largest eigenvalue over all materialized Σ_i"""
    c1, c2 = np.inf, -np.inf
    for m in sorted(set(visit_counts)):
        eig = np.linalg.eigvalsh(sigma.matrix(m))
        c1 = min(c1, float(eig[0]))
        c2 = max(c2, float(eig[-1]))
    if c1 <= 0:
        logger.warning(f"Working covariance has non-positive eigenvalue {c1:.3e}")
    return c1, c2


def averaged_residuals(ds: LongitudinalDataset, beta: np.ndarray) -> List[np.ndarray]:
    """Residuals Y_i - W̄_i β with replicate-averaged surrogates"""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (ds.p,):
        raise DataError(f"beta must have length {ds.p}, got shape {beta.shape}")
    return [s.y - xbar @ beta for s, xbar in zip(ds.subjects, ds.averaged_designs)]


def estimate_working_covariance(ds: LongitudinalDataset, beta, structure,
                                rho_margin: float = None) -> WorkingCovariance:
    """
    Moment estimates of (sigma2, rho).

    sigma2 is the residual sum of squares over N - p. The exchangeable rho is
    the mean within-subject residual cross-product over all visit pairs divided
    by the pooled residual variance; the ar1 rho uses lag-1 pairs only. rho is
    clamped inside the positive definite range with margin ``rho_margin``.
    """
    structure = CovarianceStructure(structure)
    rho_margin = Config.RHO_MARGIN if rho_margin is None else rho_margin
    N, p = ds.N, ds.p
    if N <= p:
        raise CovarianceError(f"need more observations than parameters to estimate sigma2: N={N}, p={p}")

    residuals = averaged_residuals(ds, beta)
    ssr = float(sum(r @ r for r in residuals))
    if ssr <= 0.0:
        raise CovarianceError("residual sum of squares is zero, sigma2 not estimable")
    sigma2 = ssr / (N - p)

    if structure == CovarianceStructure.INDEPENDENCE:
        return WorkingCovariance(structure, sigma2)

    max_m = max(ds.visit_counts)
    if max_m < 2:
        raise CovarianceError(
            f"{structure.value} structure requires subjects with at least 2 visits; all have m_i = 1")

    scale = ssr / N
    if structure == CovarianceStructure.EXCHANGEABLE:
        # pairwise products from (sum r)^2 - sum r^2
        pair_sum = sum((r.sum() ** 2 - r @ r) / 2.0 for r in residuals)
        n_pairs = sum(len(r) * (len(r) - 1) / 2.0 for r in residuals)
    else:
        pair_sum = sum(float(r[:-1] @ r[1:]) for r in residuals)
        n_pairs = sum(len(r) - 1 for r in residuals)
    rho_raw = (pair_sum / n_pairs) / scale

    lower, upper = _rho_bounds(structure, max_m)
    rho = float(np.clip(rho_raw, lower + rho_margin, upper - rho_margin))
    if rho != rho_raw:
        logger.warning(f"Clamped {structure.value} rho from {rho_raw:.6f} to {rho:.6f}")

    logger.debug(f"Working covariance {structure.value}: sigma2={sigma2:.6f}, rho={rho:.6f}")
    return WorkingCovariance(structure, sigma2, rho)
