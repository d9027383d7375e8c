"""
Monte Carlo runner: replications dispatched onto a thread pool and reduced
in replication order
"""

import asyncio
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ..estimation.baselines import EL_METHODS, fit_by_name
from ..inference.intervals import ci_profile, wald_interval
from ..utils.config import Config, FitConfig
from ..utils.errors import DataError, ModelError, StudyError
from ..utils.metrics import collector
from .scenarios import Scenario, generate_dataset
from .summary import MetricRow, StudyReport, metrics

DEFAULT_METHODS = ('gee-naive', 'el-naive', 'lin', 'proposed')


@dataclass
class MethodOutcome:
    beta: Optional[np.ndarray]
    intervals: Optional[np.ndarray]
    seconds: float
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.beta is None


@dataclass
class ReplicationOutcome:
    index: int
    seed: int
    methods: Dict[str, MethodOutcome] = field(default_factory=dict)


def replication_seed(base_seed: int, index: int) -> int:
    return int(base_seed) ^ int(index)


def _fit_one(method: str, ds, config: FitConfig, level: float) -> MethodOutcome:
    started = time.perf_counter()
    try:
        fit = fit_by_name(method, ds, config)
        if not fit.converged:
            return MethodOutcome(None, None, time.perf_counter() - started, "not converged")
        if method in EL_METHODS:
            cis = [ci_profile(fit, j, level) for j in range(fit.p)]
        else:
            cis = [wald_interval(fit, j, level) for j in range(fit.p)]
        if not all(ci.bounded for ci in cis):
            return MethodOutcome(None, None, time.perf_counter() - started, "unbounded interval")
        intervals = np.array([[ci.lower, ci.upper] for ci in cis])
        return MethodOutcome(np.array(fit.beta_hat, dtype=float), intervals, time.perf_counter() - started)
    except ModelError as exc:
        return MethodOutcome(None, None, time.perf_counter() - started, f"{type(exc).__name__}: {exc}")


def run_replication(sc: Scenario, methods: Sequence[str], index: int, base_seed: int,
                    config: Optional[FitConfig] = None, level: float = 0.95) -> ReplicationOutcome:
    """One dataset, every method fitted to it"""
    config = config or FitConfig()
    seed = replication_seed(base_seed, index)
    ds = generate_dataset(sc, seed)
    outcome = ReplicationOutcome(index, seed)
    for method in methods:
        result = _fit_one(method, ds, config, level)
        if result.failed:
            logger.debug(f"Replication {index} (seed {seed}) failed for {method}: {result.error}")
        collector.record_replication(result.failed)
        outcome.methods[method] = result
    return outcome


def _check_methods(methods: Sequence[str]) -> List[str]:
    methods = list(methods)
    if not methods:
        raise DataError("at least one method is required")
    unknown = [m for m in methods if m not in DEFAULT_METHODS]
    if unknown:
        raise DataError(f"unknown methods {unknown}, expected a subset of {list(DEFAULT_METHODS)}")
    if len(set(methods)) != len(methods):
        raise DataError(f"duplicate methods in {methods}")
    return methods


def summarize(sc: Scenario, methods: Sequence[str], outcomes: Sequence[ReplicationOutcome]) -> StudyReport:
    """Reduce replication outcomes in index order"""
    outcomes = sorted(outcomes, key=lambda o: o.index)
    names = sc.layout.coefficient_names
    n_reps = len(outcomes)
    rows: List[MetricRow] = []
    failures: Dict[str, int] = {}
    timing: Dict[str, float] = {}

    for method in methods:
        results = [o.methods[method] for o in outcomes]
        ok = [r for r in results if not r.failed]
        failures[method] = n_reps - len(ok)
        timing[method] = float(np.mean([r.seconds for r in results]))
        rate = failures[method] / n_reps
        if rate > Config.FAILURE_ALARM:
            logger.warning(f"{method}: {failures[method]}/{n_reps} replications failed ({rate:.1%})")
        if not ok:
            continue
        rows.extend(metrics(np.stack([r.beta for r in ok]), np.stack([r.intervals for r in ok]),
                            sc.beta_true, names, method))

    if not rows:
        raise StudyError(f"all {n_reps} replications failed for every method in scenario {sc.name}")
    return StudyReport(sc.name, sc.n, n_reps, rows, failures, timing)


async def run_study_async(sc: Scenario, methods: Sequence[str] = DEFAULT_METHODS, n_reps: int = 100,
                          base_seed: int = 0, config: Optional[FitConfig] = None,
                          level: float = 0.95, threads: Optional[int] = None) -> StudyReport:
    """Run replications concurrently on at most ``threads`` workers"""
    methods = _check_methods(methods)
    if n_reps < 1:
        raise DataError(f"n_reps must be at least 1, got {n_reps}")
    threads = threads or Config.WORKER_THREADS
    config = config or FitConfig()
    logger.info(f"Study {sc.name}: n={sc.n}, K={sc.K}, reps={n_reps}, methods={methods}, "
                f"seed={base_seed}, threads={threads}")

    started = time.perf_counter()
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tasks = [
            loop.run_in_executor(pool, run_replication, sc, methods, r, base_seed, config, level)
            for r in range(n_reps)
        ]
        outcomes = await asyncio.gather(*tasks)

    report = summarize(sc, methods, outcomes)
    logger.info(f"Study {sc.name} finished in {time.perf_counter() - started:.2f}s; "
                f"failures={report.n_failures}")
    for method, seconds in report.timing.items():
        logger.info(f"  {method}: {seconds:.4f}s per replication")
    return report


def run_study(sc: Scenario, methods: Sequence[str] = DEFAULT_METHODS, n_reps: int = 100,
              base_seed: int = 0, config: Optional[FitConfig] = None,
              level: float = 0.95, threads: Optional[int] = None) -> StudyReport:
    return asyncio.run(run_study_async(sc, methods, n_reps, base_seed, config, level, threads))
