"""Unit tests untuk the metrics collector"""

import pytest

from src.utils.config import Config
from src.utils.metrics import MetricsCollector


@pytest.fixture
def metrics(monkeypatch):
    monkeypatch.setattr(Config, 'METRICS_ENABLED', True)
    return MetricsCollector("test")


class TestMetricsCollector:
    """Test suite for MetricsCollector"""

    def test_fit_counts(self, metrics):
        metrics.record_fit('lin', True, 0.5)
        metrics.record_fit('lin', False, 1.5)
        summary = metrics.get_summary()
        assert summary['fits'] == {'lin:converged': 1, 'lin:not_converged': 1}
        assert summary['mean_fit_seconds']['lin'] == pytest.approx(1.0)
        assert summary['system']['memory_usage_mb'] > 0

    def test_inner_and_replications(self, metrics):
        metrics.record_inner_solve(4, False)
        metrics.record_inner_solve(9, True)
        metrics.record_replication(False)
        metrics.record_replication(True)
        summary = metrics.get_summary()
        assert summary['inner'] == {'solves': 2, 'hull_failures': 1}
        assert summary['replications'] == {'ok': 1, 'failed': 1}

    def test_exposition(self, metrics):
        metrics.record_outer(3)
        text = metrics.exposition().decode()
        assert 'outer_iterations_count{run_id="test"} 1.0' in text

    def test_disabled(self, monkeypatch):
        monkeypatch.setattr(Config, 'METRICS_ENABLED', False)
        collector = MetricsCollector("off")
        collector.record_fit('lin', True, 0.1)
        assert collector.get_summary()['fits'] == {}
