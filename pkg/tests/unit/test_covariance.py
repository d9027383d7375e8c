"""Unit tests untuk working covariance"""

import numpy as np
import pytest

from src.estimation.covariance import (
    CovarianceStructure, WorkingCovariance, eigen_bounds, estimate_working_covariance, materialize
)
from src.utils.errors import CovarianceError
from tests.conftest import make_dataset


class TestMaterialize:
    """Test suite for materialized Σ_i"""

    def test_exchangeable_zero_rho_is_identity(self):
        mat, inv = materialize(WorkingCovariance("exchangeable", 1.0, 0.0), 3)
        np.testing.assert_allclose(mat, np.eye(3))
        np.testing.assert_allclose(inv, np.eye(3))

    def test_exchangeable_two_visits(self):
        mat, inv = materialize(WorkingCovariance("exchangeable", 0.8, 0.6), 2)
        np.testing.assert_allclose(mat, [[0.8, 0.48], [0.48, 0.8]])
        np.testing.assert_allclose(mat @ inv, np.eye(2), atol=1e-12)

    def test_ar1(self):
        mat, _ = materialize(WorkingCovariance("ar1", 2.0, 0.5), 3)
        np.testing.assert_allclose(mat, 2.0 * np.array([[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]]))

    def test_independence_ignores_rho(self):
        sigma = WorkingCovariance(CovarianceStructure.INDEPENDENCE, 1.5, 0.9)
        assert sigma.rho == 0.0
        np.testing.assert_allclose(sigma.matrix(4), 1.5 * np.eye(4))

    def test_invalid_parameters(self):
        with pytest.raises(CovarianceError):
            WorkingCovariance("exchangeable", 0.0, 0.1)
        with pytest.raises(CovarianceError):
            WorkingCovariance("exchangeable", 1.0, -0.5).matrix(4)
        with pytest.raises(CovarianceError):
            WorkingCovariance("ar1", 1.0, 1.0).matrix(2)

    def test_inverses_cached_by_visit_count(self):
        inverses = WorkingCovariance("exchangeable", 1.0, 0.3).inverses([3, 2, 3, 2])
        assert sorted(inverses) == [2, 3]

    def test_eigen_bounds(self):
        c1, c2 = eigen_bounds(WorkingCovariance("exchangeable", 1.0, 0.5), [3, 3])
        assert c1 == pytest.approx(0.5)
        assert c2 == pytest.approx(2.0)


class TestEstimateWorkingCovariance:
    """Test suite for moment estimates of (sigma2, rho)"""

    def test_perfect_correlation_clamped(self):
        """Test residuals constant within subjects push rho to the upper clamp"""
        ds = make_dataset([[1.0, 1.0, 1.0], [-2.0, -2.0, -2.0]], [np.zeros((2, 3, 1))] * 2)
        sigma = estimate_working_covariance(ds, [0.0], "exchangeable", rho_margin=1e-6)
        assert sigma.rho == pytest.approx(1.0 - 1e-6)
        assert sigma.sigma2 == pytest.approx(15.0 / 5.0)

    def test_independence(self, c1_data):
        sigma = estimate_working_covariance(c1_data, [1.0, 1.0, 1.0], "independence")
        assert sigma.structure == CovarianceStructure.INDEPENDENCE
        assert sigma.rho == 0.0
        assert sigma.sigma2 > 0

    def test_attenuated_residual_variance(self, c1_data):
        """Test sigma2 absorbs the averaged measurement error variance"""
        sigma = estimate_working_covariance(c1_data, [1.0, 1.0, 1.0], "exchangeable")
        assert 0.8 < sigma.sigma2 < 1.3
        assert 0.2 < sigma.rho < 0.7

    def test_single_visit_needs_independence(self):
        ds = make_dataset([[1.0], [2.0], [4.0]], [np.array([[[0.5]], [[0.7]]])] * 3)
        with pytest.raises(CovarianceError):
            estimate_working_covariance(ds, [0.0], "exchangeable")
        assert estimate_working_covariance(ds, [0.0], "independence").sigma2 > 0

    def test_degrees_of_freedom(self):
        ds = make_dataset([[1.0]], [np.array([[[0.5]], [[0.7]]])])
        with pytest.raises(CovarianceError):
            estimate_working_covariance(ds, [0.0], "independence")

    def test_relative_change(self):
        a = WorkingCovariance("exchangeable", 1.0, 0.3)
        b = WorkingCovariance("exchangeable", 1.1, 0.32)
        assert a.relative_change(b) == pytest.approx(0.1)
