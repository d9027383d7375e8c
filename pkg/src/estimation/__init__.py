"""Estimators: working covariance, auxiliary basis, empirical likelihood and baselines"""

from .covariance import (
    CovarianceStructure, WorkingCovariance, materialize, eigen_bounds, estimate_working_covariance
)
from .auxiliary import (
    ElementTag, AuxiliaryBasis, MomentSystem, build_full_aux, reduce_basis,
    eval_reduced, jacobian_reduced, moment_system, lin_system
)
from .el_core import (
    LagrangeSolution, ELFit, ELObjective, solve_lambda, neg2_log_R, fit_mele, lin_estimate
)
from .baselines import (
    BaselineMethod, BaselineFit, EfficiencyReport, fit_lin, fit_naive_gee, fit_naive_el, compare_efficiency,
    EL_METHODS, fit_by_name
)

__all__ = [
    'CovarianceStructure', 'WorkingCovariance', 'materialize', 'eigen_bounds', 'estimate_working_covariance',
    'ElementTag', 'AuxiliaryBasis', 'MomentSystem', 'build_full_aux', 'reduce_basis',
    'eval_reduced', 'jacobian_reduced', 'moment_system', 'lin_system',
    'LagrangeSolution', 'ELFit', 'ELObjective', 'solve_lambda', 'neg2_log_R', 'fit_mele', 'lin_estimate',
    'BaselineMethod', 'BaselineFit', 'EfficiencyReport', 'fit_lin', 'fit_naive_gee', 'fit_naive_el',
    'compare_efficiency', 'EL_METHODS', 'fit_by_name'
]
