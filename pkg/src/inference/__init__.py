"""Tests, confidence regions and intervals"""

from .hypothesis import (
    TestKind, TestResult, test_at, profile_test, asymptotic_covariance, standard_errors,
    in_region_full, in_region_lr, chi2_p_value, el_fit_of, is_el_based
)
from .intervals import (
    IntervalMethod, ConfidenceInterval, ci_profile, ci_wald, wald_interval, coefficient_table,
    default_interval_method
)

__all__ = [
    'TestKind', 'TestResult', 'test_at', 'profile_test', 'asymptotic_covariance', 'standard_errors',
    'in_region_full', 'in_region_lr', 'chi2_p_value', 'el_fit_of', 'is_el_based',
    'IntervalMethod', 'ConfidenceInterval', 'ci_profile', 'ci_wald', 'wald_interval', 'coefficient_table',
    'default_interval_method'
]
