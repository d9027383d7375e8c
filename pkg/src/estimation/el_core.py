"""
Empirical likelihood core
Lagrange multiplier dual solve, -2 log R(β) and the MELE outer loop
"""

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import OptimizeResult, minimize

from ..data.dataset import LongitudinalDataset
from ..utils.config import Config, FitConfig
from ..utils.errors import (
    ConvergenceError, InsufficientSampleError, NumericalError
)
from ..utils.metrics import collector
from .auxiliary import (
    AuxiliaryBasis, MomentSystem, lin_system, moment_system, reduce_basis, solve_exact
)
from .covariance import CovarianceStructure, WorkingCovariance, estimate_working_covariance

LINE_SEARCH_MIN_STEP = 1e-10


def log_star(z: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    log(z) for z >= 1/n with a quadratic continuation below, matching value,
    first and second derivative at 1/n. Returns (value, d1, d2).
    """
    z = np.asarray(z, dtype=float)
    eps = 1.0 / n
    inside = z >= eps
    safe = np.where(inside, z, 1.0)
    nz = n * z
    value = np.where(inside, np.log(safe), np.log(eps) - 1.5 + 2.0 * nz - 0.5 * nz ** 2)
    d1 = np.where(inside, 1.0 / safe, 2.0 * n - n * nz)
    d2 = np.where(inside, -1.0 / safe ** 2, -float(n) ** 2)
    return value, d1, d2


@dataclass(frozen=True, eq=False)
class LagrangeSolution:
    """Multiplier, EL weights and -2 log R at one β"""
    lam: np.ndarray
    weights: np.ndarray
    neg2logR: float
    converged: bool
    inner_iterations: int
    hull_failure: bool


def _newton_direction(neg_hessian: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Solve (-H + μI) d = grad, escalating μ while the factorization fails"""
    try:
        return cho_solve(cho_factor(neg_hessian, lower=True), grad)
    except LinAlgError:
        pass
    trace = max(float(np.trace(neg_hessian)), np.finfo(float).tiny)
    q = neg_hessian.shape[0]
    mu = 1e-12 * trace
    while mu <= 1e-2 * trace:
        try:
            return cho_solve(cho_factor(neg_hessian + mu * np.eye(q), lower=True), grad)
        except LinAlgError:
            mu *= 10.0
    raise NumericalError("Lagrange Hessian factorization failed after ridge escalation")


def solve_lambda(G, inner_tol: Optional[float] = None, max_iter: Optional[int] = None,
                 lambda_divergence: Optional[float] = None,
                 hull_penalty: Optional[float] = None) -> LagrangeSolution:
    """
    Maximize the concave dual Σ log★(1 + λᵀg_i) by damped Newton steps.

    Zero outside the convex hull of the rows shows up as ‖λ‖ diverging, a line
    search that cannot improve, or a converged λ with some 1 + λᵀg_i < 1/n; the
    objective is then replaced by ``hull_penalty``.
    """
    inner_tol = Config.INNER_TOL if inner_tol is None else inner_tol
    max_iter = Config.INNER_MAX_ITER if max_iter is None else max_iter
    lambda_divergence = Config.LAMBDA_DIVERGENCE if lambda_divergence is None else lambda_divergence
    hull_penalty = Config.HULL_PENALTY if hull_penalty is None else hull_penalty

    G = np.asarray(G, dtype=float)
    if G.ndim != 2:
        raise NumericalError(f"estimating function matrix must be 2-D, got shape {G.shape}")
    n, q = G.shape
    if n < 2:
        raise InsufficientSampleError(f"empirical likelihood needs at least 2 subjects, got {n}")
    if not np.all(np.isfinite(G)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(G), axis=1))[0])
        raise NumericalError(f"non-finite estimating function values for subject index {bad}")

    lam = np.zeros(q)
    converged = diverged = stalled = False
    iterations = 0

    value, d1, d2 = log_star(1.0 + G @ lam, n)
    objective = float(value.sum())
    while True:
        grad = G.T @ d1
        if np.max(np.abs(grad)) / n <= inner_tol:
            converged = True
            break
        if iterations >= max_iter:
            break

        neg_hessian = (G * (-d2)[:, None]).T @ G
        direction = _newton_direction(neg_hessian, grad)
        decrement = float(grad @ direction)
        if decrement < 0:
            raise NumericalError(f"negative Newton decrement {decrement:.3e} in Lagrange solve")

        step = 1.0
        while step >= LINE_SEARCH_MIN_STEP:
            trial = lam + step * direction
            t_value, t_d1, t_d2 = log_star(1.0 + G @ trial, n)
            t_objective = float(t_value.sum())
            if t_objective >= objective + 1e-4 * step * decrement:
                break
            step *= 0.5
        else:
            stalled = True
            break

        iterations += 1
        lam, objective, d1, d2 = trial, t_objective, t_d1, t_d2
        if np.linalg.norm(lam) > lambda_divergence:
            diverged = True
            break

    z = 1.0 + G @ lam
    grad_sup = float(np.max(np.abs(G.T @ log_star(z, n)[1]))) / n
    hull_failure = diverged or bool(np.min(z) < 1.0 / n)
    if stalled and grad_sup > np.sqrt(inner_tol):
        hull_failure = True

    collector.record_inner_solve(iterations, hull_failure)
    if hull_failure:
        logger.debug(f"Convex hull failure after {iterations} Newton steps (|λ|={np.linalg.norm(lam):.3e})")
        return LagrangeSolution(lam, np.full(n, np.nan), float(hull_penalty), False, iterations, True)

    weights = 1.0 / (n * z)
    return LagrangeSolution(lam, weights, max(2.0 * objective, 0.0), converged, iterations, False)


def envelope_gradient(system: MomentSystem, beta, solution: LagrangeSolution) -> np.ndarray:
    """∂(-2 log R)/∂β = 2 Σ_i ψ'(1 + λᵀg_i) J_iᵀ λ at the optimal λ"""
    if solution.hull_failure:
        return np.zeros(system.p)
    z = 1.0 + system.values(beta) @ solution.lam
    _, d1, _ = log_star(z, system.n)
    return 2.0 * np.einsum('i,iqp,q->p', d1, system.slopes, solution.lam)


class ELObjective:
    """-2 log R(β) over a fixed moment system, with its envelope gradient"""

    def __init__(self, system: MomentSystem, config: FitConfig):
        self.system = system
        self.config = config

    def solve(self, beta) -> LagrangeSolution:
        return solve_lambda(
            self.system.values(beta),
            inner_tol=self.config.inner_tol,
            max_iter=self.config.inner_max_iter,
            lambda_divergence=self.config.lambda_divergence,
            hull_penalty=self.config.hull_penalty,
        )

    def evaluate(self, beta) -> Tuple[float, np.ndarray, LagrangeSolution]:
        beta = np.asarray(beta, dtype=float)
        solution = self.solve(beta)
        return solution.neg2logR, envelope_gradient(self.system, beta, solution), solution

    def __call__(self, beta) -> Tuple[float, np.ndarray]:
        value, grad, _ = self.evaluate(beta)
        return value, grad


def information_matrix(system: MomentSystem, beta) -> np.ndarray:
    """L_nᵀ M_n⁻¹ L_n with subject sums"""
    L = system.jacobian_sum()
    M = system.second_moment(beta)
    try:
        factor = cho_factor(M, lower=True)
    except LinAlgError as exc:
        raise NumericalError(f"second-moment matrix M_n is singular: {exc}") from exc
    info = L.T @ cho_solve(factor, L)
    return 0.5 * (info + info.T)


def sandwich_covariance(system: MomentSystem, beta) -> np.ndarray:
    """(L_nᵀ M_n⁻¹ L_n)⁻¹, the variance of the estimator"""
    info = information_matrix(system, beta)
    try:
        cov = cho_solve(cho_factor(info, lower=True), np.eye(info.shape[0]))
    except LinAlgError as exc:
        raise NumericalError(f"information matrix is singular: {exc}") from exc
    return 0.5 * (cov + cov.T)


def quadratic_start(system: MomentSystem, weight: np.ndarray) -> np.ndarray:
    """Minimizer of (Σg)ᵀ weight⁻¹ (Σg), the quadratic approximation of -2 log R"""
    L = system.jacobian_sum()
    a = system.offsets.sum(axis=0)
    factor = cho_factor(weight, lower=True)
    lhs = L.T @ cho_solve(factor, L)
    rhs = -L.T @ cho_solve(factor, a)
    return np.linalg.solve(lhs, rhs)


BFGS_PRECISION_LOSS = 2


def minimize_el(objective: ELObjective, beta0, config: FitConfig) -> OptimizeResult:
    """
    BFGS seeded with the inverse of 2 L_nᵀM_n⁻¹L_n.

    The returned result carries ``converged``: scipy success, or a line search
    that stopped on precision loss away from the hull penalty.
    """
    beta0 = np.asarray(beta0, dtype=float)
    options = {'gtol': config.bfgs_gtol, 'maxiter': config.bfgs_max_iter, 'disp': False}
    try:
        hess_inv0 = np.linalg.inv(2.0 * information_matrix(objective.system, beta0))
        options['hess_inv0'] = 0.5 * (hess_inv0 + hess_inv0.T)
    except (NumericalError, np.linalg.LinAlgError):
        pass
    result = minimize(objective, beta0, jac=True, method='BFGS', options=options)
    result.converged = bool(result.success or (
        result.status == BFGS_PRECISION_LOSS and np.isfinite(result.fun) and result.fun < config.hull_penalty))
    logger.trace(f"bfgs: nit={result.nit}, -2logR={result.fun:.12g}, {result.message}")
    return result


@dataclass(frozen=True, eq=False)
class ELFit:
    """Maximum empirical likelihood fit"""
    beta_hat: np.ndarray
    lambda_hat: np.ndarray
    basis: Optional[AuxiliaryBasis]
    working_cov: WorkingCovariance
    neg2logR_at_hat: float
    outer_iterations: int
    asymptotic_cov: np.ndarray
    converged: bool
    system: MomentSystem
    config: FitConfig
    coefficient_names: Tuple[str, ...]
    method: str = "proposed"
    gradient_norm: float = 0.0
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def p(self) -> int:
        return self.beta_hat.shape[0]

    @property
    def q(self) -> int:
        return self.system.q

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.asymptotic_cov), 0.0, None))

    def objective(self) -> ELObjective:
        return ELObjective(self.system, self.config)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method,
            'coefficients': list(self.coefficient_names),
            'beta_hat': self.beta_hat.tolist(),
            'standard_errors': self.standard_errors.tolist(),
            'lambda_hat': self.lambda_hat.tolist(),
            'q': self.q,
            'neg2logR_at_hat': float(self.neg2logR_at_hat),
            'outer_iterations': self.outer_iterations,
            'converged': bool(self.converged),
            'gradient_norm': float(self.gradient_norm),
            'working_cov': self.working_cov.to_dict(),
            'basis': self.basis.to_dict() if self.basis is not None else None,
            'notes': list(self.notes),
        }


@dataclass(frozen=True)
class EquationSolution:
    """Root of a just-identified estimating equation and its working covariance"""
    beta: np.ndarray
    sigma: WorkingCovariance
    iterations: int
    converged: bool


SystemBuilder = Callable[[LongitudinalDataset, WorkingCovariance], MomentSystem]


def solve_with_covariance(ds: LongitudinalDataset, build: SystemBuilder, structure,
                          config: Optional[FitConfig] = None, label: str = "estimating equation") -> EquationSolution:
    """Alternate covariance re-estimation and exact solves until β stops moving"""
    config = config or FitConfig()
    structure = CovarianceStructure(structure)
    beta = solve_exact(build(ds, WorkingCovariance(CovarianceStructure.INDEPENDENCE, 1.0)))
    if structure == CovarianceStructure.INDEPENDENCE:
        # σ² cancels from the equation
        sigma = estimate_working_covariance(ds, beta, structure, config.rho_margin)
        return EquationSolution(beta, sigma, 1, True)

    for iteration in range(1, config.outer_max_iter + 1):
        sigma = estimate_working_covariance(ds, beta, structure, config.rho_margin)
        updated = solve_exact(build(ds, sigma))
        step = float(np.max(np.abs(updated - beta)))
        beta = updated
        if step < config.outer_tol:
            return EquationSolution(beta, sigma, iteration, True)
    logger.warning(f"{label} did not converge in {config.outer_max_iter} covariance iterations")
    return EquationSolution(beta, sigma, config.outer_max_iter, False)


def lin_estimate(ds: LongitudinalDataset, structure, config: Optional[FitConfig] = None) -> EquationSolution:
    """Cross-replicate estimating equation solved with covariance re-estimation"""
    return solve_with_covariance(ds, lin_system, structure, config, label="Lin estimator")


def neg2_log_R(ds: LongitudinalDataset, beta, basis: AuxiliaryBasis, sigma: WorkingCovariance,
               config: Optional[FitConfig] = None) -> float:
    """-2 log R(β) for the reduced basis under working covariance ``sigma``"""
    objective = ELObjective(moment_system(ds, sigma, basis), config or FitConfig())
    return objective.solve(np.asarray(beta, dtype=float)).neg2logR


def _mele_from(ds: LongitudinalDataset, beta: np.ndarray, config: FitConfig) -> ELFit:
    structure = CovarianceStructure(config.working_cov)
    sigma: Optional[WorkingCovariance] = None
    basis: Optional[AuxiliaryBasis] = None
    frozen = False
    converged = False
    previous_value = np.inf
    notes: List[str] = []

    for iteration in range(1, config.outer_max_iter + 1):
        if not frozen:
            updated = estimate_working_covariance(ds, beta, structure, config.rho_margin)
            if sigma is not None and sigma.relative_change(updated) < config.cov_freeze_tol:
                frozen = True
            sigma = updated

        new_basis = reduce_basis(ds, beta, sigma, config.rank_tol)
        if basis is not None and not basis.same_elements(new_basis):
            message = f"retained auxiliary elements changed at outer iteration {iteration} (q {basis.q} -> {new_basis.q})"
            logger.warning(message)
            notes.append(message)
        basis = new_basis

        objective = ELObjective(moment_system(ds, sigma, basis), config)
        if iteration == 1 and objective.solve(beta).hull_failure:
            raise ConvergenceError("zero lies outside the convex hull of the estimating functions at the start value")

        result = minimize_el(objective, beta, config)
        step = float(np.max(np.abs(result.x - beta)))
        change = abs(result.fun - previous_value)
        beta, previous_value = result.x, result.fun
        logger.debug(f"outer iteration {iteration}: -2logR={result.fun:.10g}, step={step:.3e}, "
                     f"q={basis.q}, bfgs={result.message}")
        if step < config.outer_tol or change < config.objective_tol:
            converged = True
            break

    system = moment_system(ds, sigma, basis)
    value, grad, solution = ELObjective(system, config).evaluate(beta)
    if solution.hull_failure:
        converged = False
        notes.append("convex hull failure at the final estimate")
    cov = sandwich_covariance(system, beta)

    return ELFit(
        beta_hat=beta,
        lambda_hat=solution.lam,
        basis=basis,
        working_cov=sigma,
        neg2logR_at_hat=value,
        outer_iterations=iteration,
        asymptotic_cov=cov,
        converged=converged,
        system=system,
        config=config,
        coefficient_names=tuple(ds.layout.coefficient_names),
        gradient_norm=float(np.max(np.abs(grad))),
        notes=tuple(notes),
    )


def fit_mele(ds: LongitudinalDataset, config: Optional[FitConfig] = None) -> ELFit:
    """
    Maximum empirical likelihood estimate.

    Starts from the cross-replicate estimator under working independence and
    alternates covariance re-estimation, basis reduction and quasi-Newton
    minimization of -2 log R until β or the objective stops changing. A start
    inside a hull failure is retried from the exchangeable cross-replicate
    estimate.
    """
    config = config or FitConfig()
    started = time.perf_counter()

    start = lin_estimate(ds, CovarianceStructure.INDEPENDENCE, config).beta
    try:
        fit = _mele_from(ds, start, config)
    except ConvergenceError:
        logger.warning("Independence start failed, restarting from exchangeable cross-replicate estimate")
        start = lin_estimate(ds, CovarianceStructure.EXCHANGEABLE, config).beta
        try:
            fit = _mele_from(ds, start, config)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"{exc}; the model may be too large for n={ds.n} subjects, "
                f"try fewer covariates or more subjects") from exc

    duration = time.perf_counter() - started
    collector.record_fit(fit.method, fit.converged, duration)
    collector.record_outer(fit.outer_iterations)
    if not fit.converged:
        logger.warning(f"MELE did not converge after {fit.outer_iterations} outer iterations")
    else:
        logger.info(f"MELE converged: q={fit.q}, outer={fit.outer_iterations}, "
                    f"-2logR={fit.neg2logR_at_hat:.6g}, {duration:.3f}s")
    return fit


@dataclass(frozen=True)
class ConstrainedMinimum:
    """-2 log R minimized over the free coordinates with others held fixed"""
    value: float
    beta: np.ndarray
    converged: bool
    hull_failure: bool


def constrained_minimum(fit: ELFit, coords: Sequence[int], values: Sequence[float]) -> ConstrainedMinimum:
    """Profile minimum reusing the fit's moment system (same basis and Σ)"""
    coords = [int(c) for c in coords]
    values = np.asarray(values, dtype=float)
    full = np.array(fit.beta_hat, dtype=float)
    full[coords] = values
    free = np.setdiff1d(np.arange(fit.p), coords)

    if free.size == 0:
        solution = fit.objective().solve(full)
        return ConstrainedMinimum(solution.neg2logR, full, not solution.hull_failure, solution.hull_failure)

    reduced = fit.system.fix(coords, values)
    objective = ELObjective(reduced, fit.config)
    start = full[free]
    try:
        candidate = quadratic_start(reduced, fit.system.second_moment(fit.beta_hat))
        if objective.solve(candidate).neg2logR < objective.solve(start).neg2logR:
            start = candidate
    except (LinAlgError, np.linalg.LinAlgError):
        pass
    result = minimize_el(objective, start, fit.config)
    full[free] = result.x
    _, _, solution = objective.evaluate(result.x)
    return ConstrainedMinimum(solution.neg2logR, full, result.converged and not solution.hull_failure,
                              solution.hull_failure)
