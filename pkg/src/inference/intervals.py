"""Profile empirical likelihood and Wald confidence intervals"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from scipy import optimize, stats

from ..estimation.el_core import ELFit, constrained_minimum
from ..utils.errors import DataError
from .hypothesis import FitLike, el_fit_of, is_el_based

MAX_EXPANSIONS = 20


class IntervalMethod(str, Enum):
    PROFILE_EL = "profile_el"
    WALD = "wald"


@dataclass(frozen=True)
class ConfidenceInterval:
    coord: int
    name: str
    estimate: float
    lower: float
    upper: float
    level: float
    method: IntervalMethod
    bounded: bool = True

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _check_level(level: float):
    if not 0.0 < level < 1.0:
        raise DataError(f"confidence level must lie in (0, 1), got {level}")


def _covariance_of(fit: FitLike) -> np.ndarray:
    return fit.asymptotic_cov if isinstance(fit, ELFit) else fit.covariance


def ci_wald(beta_hat, covariance, coord: int, level: float = 0.95, name: Optional[str] = None) -> ConfidenceInterval:
    """β̂_j ± z_{(1+level)/2} se_j"""
    _check_level(level)
    beta_hat = np.asarray(beta_hat, dtype=float)
    if not 0 <= coord < beta_hat.shape[0]:
        raise DataError(f"coordinate {coord} out of range 0..{beta_hat.shape[0] - 1}")
    se = float(np.sqrt(max(covariance[coord, coord], 0.0)))
    half = stats.norm.ppf(0.5 + level / 2.0) * se
    estimate = float(beta_hat[coord])
    return ConfidenceInterval(coord, name or str(coord), estimate, estimate - half, estimate + half,
                              level, IntervalMethod.WALD)


def wald_interval(fit: FitLike, coord: int, level: float = 0.95) -> ConfidenceInterval:
    return ci_wald(fit.beta_hat, _covariance_of(fit), coord, level, fit.coefficient_names[coord])


def ci_profile(fit: FitLike, coord: int, level: float = 0.95) -> ConfidenceInterval:
    """
    Endpoints where the profile ratio W2 reaches χ²_level(1). Each side is
    bracketed from the Wald half-width, doubled until W2 crosses the
    critical value, then bisected. Penalized (hull failure) values count
    as outside the region.
    """
    _check_level(level)
    el = el_fit_of(fit)
    if not 0 <= coord < el.p:
        raise DataError(f"coordinate {coord} out of range 0..{el.p - 1}")
    if not el.converged:
        logger.warning(f"Profile interval for coordinate {coord} from a fit that did not converge")

    critical = stats.chi2.ppf(level, 1)
    estimate = float(el.beta_hat[coord])
    xtol = 1e-6 * (1.0 + abs(estimate))

    def excess(b: float) -> float:
        minimum = constrained_minimum(el, [coord], [b])
        return minimum.value - el.neg2logR_at_hat - critical

    se = float(np.sqrt(max(el.asymptotic_cov[coord, coord], 0.0)))
    half = stats.norm.ppf(0.5 + level / 2.0) * se
    if not np.isfinite(half) or half <= 0.0:
        half = 1e-3 * (1.0 + abs(estimate))

    endpoints, bounded = [], True
    for side in (-1.0, 1.0):
        inner, outer = estimate, estimate + side * half
        expansions = 0
        gap = excess(outer)
        while gap < 0.0 and expansions < MAX_EXPANSIONS:
            inner, outer = outer, estimate + side * 2.0 * abs(outer - estimate)
            gap = excess(outer)
            expansions += 1
        if gap < 0.0:
            logger.warning(f"No sign change for coordinate {coord} after {MAX_EXPANSIONS} expansions")
            endpoints.append(side * np.inf)
            bounded = False
            continue
        a, b = min(inner, outer), max(inner, outer)
        endpoints.append(float(optimize.bisect(excess, a, b, xtol=xtol)))

    return ConfidenceInterval(coord, el.coefficient_names[coord], estimate, endpoints[0], endpoints[1],
                              level, IntervalMethod.PROFILE_EL, bounded)


def default_interval_method(fit: FitLike) -> str:
    """Profile intervals for empirical likelihood fits, Wald for estimating-equation fits"""
    return "profile" if is_el_based(fit) else "wald"


def coefficient_table(fit: FitLike, level: float = 0.95, method: Optional[str] = None,
                      coords: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """Estimates, standard errors and intervals; ``significant`` marks intervals excluding 0"""
    method = method or default_interval_method(fit)
    if method not in ("profile", "wald"):
        raise DataError(f"unknown interval method {method!r}, expected 'profile' or 'wald'")
    if method == "profile" and not is_el_based(fit):
        label = getattr(fit.method, 'value', fit.method)
        raise DataError(f"profile intervals need an empirical likelihood fit; {label} supports Wald intervals only")
    names = list(fit.coefficient_names)
    coords = list(range(len(names))) if coords is None else [int(c) for c in coords]
    se = np.sqrt(np.clip(np.diag(_covariance_of(fit)), 0.0, None))
    rows: List[dict] = []
    for j in coords:
        ci = ci_profile(fit, j, level) if method == "profile" else wald_interval(fit, j, level)
        rows.append({
            'coef': names[j],
            'estimate': ci.estimate,
            'se': float(se[j]),
            'lower': ci.lower,
            'upper': ci.upper,
            'length': ci.length,
            'level': level,
            'method': ci.method.value,
            'significant': not ci.contains(0.0),
        })
    return pd.DataFrame(rows)
