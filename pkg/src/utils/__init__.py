"""Utility modules for the estimation toolkit"""

from .config import Config, FitConfig, RunConfig
from .metrics import MetricsCollector, collector
from .logger import setup_logger

__all__ = ['Config', 'FitConfig', 'RunConfig', 'MetricsCollector', 'collector', 'setup_logger']
