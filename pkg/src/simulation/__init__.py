"""Simulation scenarios and the Monte Carlo study runner"""

from .scenarios import DistKind, ErrorDist, Scenario, PRESET_ERRORS, generate_dataset, replication_rng
from .summary import MetricRow, StudyReport, metrics
from .runner import (
    DEFAULT_METHODS, ReplicationOutcome, replication_seed, run_replication, run_study, run_study_async, summarize
)

__all__ = [
    'DistKind', 'ErrorDist', 'Scenario', 'PRESET_ERRORS', 'generate_dataset', 'replication_rng',
    'MetricRow', 'StudyReport', 'metrics',
    'DEFAULT_METHODS', 'ReplicationOutcome', 'replication_seed', 'run_replication', 'run_study',
    'run_study_async', 'summarize'
]
