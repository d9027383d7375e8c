"""Metrics collection untuk monitoring estimator runs"""

import threading
from collections import defaultdict
from typing import Any, Dict

import psutil
from prometheus_client import CollectorRegistry, Counter, Histogram, generate_latest

from .config import Config


class MetricsCollector:
    """Collect and expose solver and study metrics"""

    def __init__(self, run_id: str = "elme"):
        self.run_id = run_id
        self.registry = CollectorRegistry()
        self._lock = threading.Lock()

        # Fit metrics
        self.fit_count = Counter(
            'fits_total',
            'Total number of estimator fits',
            ['run_id', 'method', 'status'],
            registry=self.registry
        )

        self.fit_duration = Histogram(
            'fit_duration_seconds',
            'Estimator fit duration in seconds',
            ['run_id', 'method'],
            registry=self.registry
        )

        # Solver metrics
        self.inner_iterations = Histogram(
            'inner_newton_iterations',
            'Newton iterations per Lagrange multiplier solve',
            ['run_id'],
            buckets=(1, 2, 3, 5, 8, 13, 21, 34, 55, 100),
            registry=self.registry
        )

        self.hull_failures = Counter(
            'hull_failures_total',
            'Lagrange solves where zero was outside the convex hull',
            ['run_id'],
            registry=self.registry
        )

        self.outer_iterations = Histogram(
            'outer_iterations',
            'Outer iterations per MELE fit',
            ['run_id'],
            buckets=(1, 2, 3, 5, 10, 20, 50),
            registry=self.registry
        )

        # Study metrics
        self.replications = Counter(
            'replications_total',
            'Simulation replications',
            ['run_id', 'status'],
            registry=self.registry
        )

        # Custom stats
        self.stats = defaultdict(lambda: defaultdict(int))
        self.timings = defaultdict(list)

    def record_fit(self, method: str, converged: bool, duration: float):
        """Record a completed fit"""
        if not Config.METRICS_ENABLED:
            return
        status = 'converged' if converged else 'not_converged'
        self.fit_count.labels(run_id=self.run_id, method=method, status=status).inc()
        self.fit_duration.labels(run_id=self.run_id, method=method).observe(duration)
        with self._lock:
            self.stats['fits'][f"{method}:{status}"] += 1
            self.timings[method].append(duration)

    def record_inner_solve(self, iterations: int, hull_failure: bool):
        """Record one Lagrange multiplier solve"""
        if not Config.METRICS_ENABLED:
            return
        self.inner_iterations.labels(run_id=self.run_id).observe(iterations)
        if hull_failure:
            self.hull_failures.labels(run_id=self.run_id).inc()
        with self._lock:
            self.stats['inner']['solves'] += 1
            self.stats['inner']['hull_failures'] += int(hull_failure)

    def record_outer(self, iterations: int):
        """Record outer iterations of a MELE fit"""
        if not Config.METRICS_ENABLED:
            return
        self.outer_iterations.labels(run_id=self.run_id).observe(iterations)

    def record_replication(self, failed: bool):
        """Record a simulation replication"""
        if not Config.METRICS_ENABLED:
            return
        status = 'failed' if failed else 'ok'
        self.replications.labels(run_id=self.run_id, status=status).inc()
        with self._lock:
            self.stats['replications'][status] += 1

    def exposition(self) -> bytes:
        """Prometheus text exposition of the registry"""
        return generate_latest(self.registry)

    def get_summary(self) -> Dict[str, Any]:
        """Get metrics summary"""
        with self._lock:
            mean_timings = {
                method: sum(values) / len(values)
                for method, values in self.timings.items() if values
            }
            return {
                'run_id': self.run_id,
                'fits': dict(self.stats['fits']),
                'inner': dict(self.stats['inner']),
                'replications': dict(self.stats['replications']),
                'mean_fit_seconds': mean_timings,
                'system': {
                    'memory_usage_mb': psutil.Process().memory_info().rss / 1024 / 1024
                }
            }


# Shared collector used by the estimators
collector = MetricsCollector()
