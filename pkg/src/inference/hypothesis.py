"""Chi-squared tests and confidence region membership for EL fits"""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy import stats

from ..estimation.baselines import BaselineFit
from ..estimation.el_core import ELFit, constrained_minimum, sandwich_covariance
from ..utils.errors import DataError

FitLike = Union[ELFit, BaselineFit]


class TestKind(str, Enum):
    __test__ = False

    FULL_EL = "full_el"
    LR_FULL = "lr_full"
    LR_PROFILE = "lr_profile"


@dataclass(frozen=True)
class TestResult:
    """Chi-squared statistic with upper-tail p-value"""
    __test__ = False

    statistic: float
    df: int
    p_value: float
    kind: TestKind
    hull_failure: bool = False
    converged: bool = True

    def reject(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def to_dict(self):
        return {
            'kind': self.kind.value, 'statistic': float(self.statistic), 'df': self.df,
            'p_value': float(self.p_value), 'hull_failure': self.hull_failure, 'converged': self.converged,
        }


def chi2_p_value(statistic: float, df: int) -> float:
    return float(np.clip(stats.chi2.sf(max(statistic, 0.0), df), 0.0, 1.0))


def is_el_based(fit: FitLike) -> bool:
    return isinstance(fit, ELFit) or getattr(fit, 'el_fit', None) is not None


def el_fit_of(fit: FitLike) -> ELFit:
    """The empirical likelihood fit behind ``fit``"""
    if isinstance(fit, ELFit):
        return fit
    if isinstance(fit, BaselineFit) and fit.el_fit is not None:
        return fit.el_fit
    method = getattr(fit, 'method', fit)
    raise DataError(f"{getattr(method, 'value', method)} is not an empirical likelihood fit")


def _as_beta(fit: ELFit, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (fit.p,):
        raise DataError(f"beta must have length {fit.p}, got shape {beta.shape}")
    return beta


def test_at(fit: FitLike, beta0) -> Tuple[TestResult, TestResult]:
    """-2 log R(β0) against χ²(q) and W1(β0) = -2 log R(β0) + 2 log R(β̂) against χ²(p)"""
    el = el_fit_of(fit)
    beta0 = _as_beta(el, beta0)
    if not el.converged:
        logger.warning("Testing against a fit that did not converge")
    solution = el.objective().solve(beta0)
    full = TestResult(solution.neg2logR, el.q, chi2_p_value(solution.neg2logR, el.q),
                      TestKind.FULL_EL, solution.hull_failure)
    w1 = max(solution.neg2logR - el.neg2logR_at_hat, 0.0)
    lr = TestResult(w1, el.p, chi2_p_value(w1, el.p), TestKind.LR_FULL, solution.hull_failure)
    return full, lr


test_at.__test__ = False


def profile_test(fit: FitLike, subset: Sequence[int], values) -> TestResult:
    """
    Profile ratio W2 for H0: β[subset] = values, the complementary coordinates
    re-optimized over the fit's own basis and working covariance.
    """
    el = el_fit_of(fit)
    subset = [int(j) for j in subset]
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if not subset:
        raise DataError("profile test needs at least one coordinate")
    if len(set(subset)) != len(subset) or any(not 0 <= j < el.p for j in subset):
        raise DataError(f"subset must hold distinct coordinates in 0..{el.p - 1}, got {subset}")
    if values.shape != (len(subset),):
        raise DataError(f"expected {len(subset)} hypothesized values, got {values.shape[0]}")

    minimum = constrained_minimum(el, subset, values)
    statistic = max(minimum.value - el.neg2logR_at_hat, 0.0)
    if not minimum.converged:
        logger.warning(f"Constrained re-fit for coordinates {subset} did not converge")
    return TestResult(statistic, len(subset), chi2_p_value(statistic, len(subset)), TestKind.LR_PROFILE,
                      minimum.hull_failure, minimum.converged)


def asymptotic_covariance(fit: FitLike) -> np.ndarray:
    """n (L_nᵀ M_n⁻¹ L_n)⁻¹ at β̂, the covariance of √n(β̂ - β0)"""
    el = el_fit_of(fit)
    return el.n * sandwich_covariance(el.system, el.beta_hat)


def standard_errors(fit: FitLike) -> np.ndarray:
    el = el_fit_of(fit)
    return np.sqrt(np.clip(np.diag(asymptotic_covariance(el)), 0.0, None) / el.n)


def in_region_full(fit: FitLike, beta, level: float = 0.95) -> bool:
    """β in {β: -2 log R(β) <= χ²_level(q)}"""
    el = el_fit_of(fit)
    solution = el.objective().solve(_as_beta(el, beta))
    return (not solution.hull_failure) and solution.neg2logR <= stats.chi2.ppf(level, el.q)


def in_region_lr(fit: FitLike, beta, level: float = 0.95) -> bool:
    """β in {β: W1(β) <= χ²_level(p)}"""
    el = el_fit_of(fit)
    solution = el.objective().solve(_as_beta(el, beta))
    w1 = solution.neg2logR - el.neg2logR_at_hat
    return (not solution.hull_failure) and w1 <= stats.chi2.ppf(level, el.p)
