"""
Baseline estimators: naive GEE and naive EL on replicate-averaged surrogates,
Lin's cross-replicate estimating equation, and the efficiency comparison
"""

import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from loguru import logger

from ..data.dataset import LongitudinalDataset
from ..utils.config import FitConfig
from ..utils.errors import DataError, NumericalError
from ..utils.metrics import collector
from .auxiliary import MomentSystem, lin_system
from .covariance import WorkingCovariance
from .el_core import (
    ELFit, ELObjective, fit_mele, lin_estimate, minimize_el, sandwich_covariance, solve_with_covariance
)


class BaselineMethod(str, Enum):
    GEE_NAIVE = "gee_naive"
    EL_NAIVE = "el_naive"
    LIN = "lin"


@dataclass(frozen=True, eq=False)
class BaselineFit:
    method: BaselineMethod
    beta_hat: np.ndarray
    covariance: np.ndarray
    working_cov: WorkingCovariance
    converged: bool
    coefficient_names: Tuple[str, ...]
    iterations: int = 1
    el_fit: Optional[ELFit] = None

    @property
    def p(self) -> int:
        return self.beta_hat.shape[0]

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method.value,
            'coefficients': list(self.coefficient_names),
            'beta_hat': self.beta_hat.tolist(),
            'standard_errors': self.standard_errors.tolist(),
            'converged': bool(self.converged),
            'iterations': self.iterations,
            'working_cov': self.working_cov.to_dict(),
        }


def naive_system(ds: LongitudinalDataset, sigma: WorkingCovariance) -> MomentSystem:
    """X̄_iᵀΣ_i⁻¹(Y_i - X̄_i β) with X̄ the replicate-averaged design"""
    inverses = sigma.subject_inverses(ds)
    offsets, slopes = [], []
    for s, xbar, inv in zip(ds.subjects, ds.averaged_designs, inverses):
        weighted = xbar.T @ inv
        offsets.append(weighted @ s.y)
        slopes.append(-weighted @ xbar)
    return MomentSystem(np.stack(offsets), np.stack(slopes))


def estimating_equation_sandwich(system: MomentSystem, beta) -> np.ndarray:
    """A⁻¹ [Σ U_i U_iᵀ] A⁻ᵀ with A = Σ ∂U_i/∂βᵀ"""
    A = system.jacobian_sum()
    U = system.values(beta)
    try:
        A_inv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular estimating equation derivative: {exc}") from exc
    cov = A_inv @ (U.T @ U) @ A_inv.T
    return 0.5 * (cov + cov.T)


def fit_lin(ds: LongitudinalDataset, config: Optional[FitConfig] = None) -> BaselineFit:
    """Cross-replicate estimator with sandwich covariance"""
    config = config or FitConfig()
    started = time.perf_counter()
    solution = lin_estimate(ds, config.working_cov, config)
    cov = estimating_equation_sandwich(lin_system(ds, solution.sigma), solution.beta)
    collector.record_fit(BaselineMethod.LIN.value, solution.converged, time.perf_counter() - started)
    return BaselineFit(BaselineMethod.LIN, solution.beta, cov, solution.sigma, solution.converged,
                       tuple(ds.layout.coefficient_names), solution.iterations)


def fit_naive_gee(ds: LongitudinalDataset, config: Optional[FitConfig] = None) -> BaselineFit:
    """GEE with replicate-averaged surrogates in place of the true covariates"""
    config = config or FitConfig()
    started = time.perf_counter()
    solution = solve_with_covariance(ds, naive_system, config.working_cov, config, label="naive GEE")
    cov = estimating_equation_sandwich(naive_system(ds, solution.sigma), solution.beta)
    collector.record_fit(BaselineMethod.GEE_NAIVE.value, solution.converged, time.perf_counter() - started)
    return BaselineFit(BaselineMethod.GEE_NAIVE, solution.beta, cov, solution.sigma, solution.converged,
                       tuple(ds.layout.coefficient_names), solution.iterations)


def fit_naive_el(ds: LongitudinalDataset, config: Optional[FitConfig] = None) -> BaselineFit:
    """
    Empirical likelihood over the p naive estimating functions. The system is
    just-identified, so the estimate is the root of the summed functions and
    the multiplier vanishes there.
    """
    config = config or FitConfig()
    started = time.perf_counter()
    solution = solve_with_covariance(ds, naive_system, config.working_cov, config, label="naive EL")
    system = naive_system(ds, solution.sigma)
    objective = ELObjective(system, config)
    result = minimize_el(objective, solution.beta, config)
    value, grad, lagrange = objective.evaluate(result.x)
    converged = solution.converged and not lagrange.hull_failure
    cov = sandwich_covariance(system, result.x)

    el_fit = ELFit(
        beta_hat=result.x,
        lambda_hat=lagrange.lam,
        basis=None,
        working_cov=solution.sigma,
        neg2logR_at_hat=value,
        outer_iterations=solution.iterations,
        asymptotic_cov=cov,
        converged=converged,
        system=system,
        config=config,
        coefficient_names=tuple(ds.layout.coefficient_names),
        method=BaselineMethod.EL_NAIVE.value,
        gradient_norm=float(np.max(np.abs(grad))),
    )
    collector.record_fit(BaselineMethod.EL_NAIVE.value, converged, time.perf_counter() - started)
    return BaselineFit(BaselineMethod.EL_NAIVE, result.x, cov, solution.sigma, converged,
                       tuple(ds.layout.coefficient_names), solution.iterations, el_fit)


@dataclass(frozen=True, eq=False)
class EfficiencyReport:
    """Eigen-analysis of Cov_reference - Cov_candidate"""
    difference: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    tolerance: float

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def psd(self) -> bool:
        return self.min_eigenvalue >= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            'eigenvalues': self.eigenvalues.tolist(),
            'min_eigenvalue': self.min_eigenvalue,
            'tolerance': self.tolerance,
            'psd': self.psd,
        }


def _covariance_of(fit: Union[ELFit, BaselineFit]) -> np.ndarray:
    return fit.asymptotic_cov if isinstance(fit, ELFit) else fit.covariance


def compare_efficiency(fit_el: Union[ELFit, BaselineFit], fit_lin: Union[ELFit, BaselineFit]) -> EfficiencyReport:
    """
    Positive semidefiniteness check of Cov_lin - Cov_el; tolerance is
    -1e-8 times the trace of Cov_lin.
    """
    cov_el, cov_lin = _covariance_of(fit_el), _covariance_of(fit_lin)
    if cov_el.shape != cov_lin.shape:
        raise DataError(f"covariance dimensions differ: {cov_el.shape} vs {cov_lin.shape}")
    difference = cov_lin - cov_el
    difference = 0.5 * (difference + difference.T)
    eigenvalues, eigenvectors = np.linalg.eigh(difference)
    tolerance = -1e-8 * abs(float(np.trace(cov_lin)))
    report = EfficiencyReport(difference, eigenvalues, eigenvectors, tolerance)
    logger.info(f"Efficiency comparison: min eigenvalue {report.min_eigenvalue:.3e}, psd={report.psd}")
    return report


EL_METHODS = ('proposed', 'el-naive')


def fit_by_name(method: str, ds: LongitudinalDataset,
                config: Optional[FitConfig] = None) -> Union[ELFit, BaselineFit]:
    """Dispatch on the command-line method name"""
    estimators = {
        'proposed': fit_mele,
        'lin': fit_lin,
        'gee-naive': fit_naive_gee,
        'el-naive': fit_naive_el,
    }
    if method not in estimators:
        raise DataError(f"unknown method {method!r}, expected one of {sorted(estimators)}")
    return estimators[method](ds, config)
