"""Unit tests untuk baseline estimators and the efficiency comparison"""

from dataclasses import replace

import numpy as np
import pytest

from src.estimation.auxiliary import lin_system
from src.estimation.baselines import (
    BaselineMethod, compare_efficiency, fit_by_name, fit_lin, fit_naive_el, fit_naive_gee, naive_system
)
from src.estimation.el_core import fit_mele
from src.simulation.scenarios import Scenario, generate_dataset
from src.utils.errors import DataError


def _gls(ds, sigma):
    inverses = sigma.subject_inverses(ds)
    lhs = sum(x.T @ inv @ x for x, inv in zip(ds.averaged_designs, inverses))
    rhs = sum(x.T @ inv @ s.y for s, x, inv in zip(ds.subjects, ds.averaged_designs, inverses))
    return np.linalg.solve(lhs, rhs)


class TestLin:
    """Test suite for the cross-replicate estimator"""

    def test_error_free_matches_gls(self, error_free_data):
        fit = fit_lin(error_free_data)
        np.testing.assert_allclose(fit.beta_hat, _gls(error_free_data, fit.working_cov), rtol=1e-8, atol=1e-10)

    def test_equation_root(self, c1_data):
        fit = fit_lin(c1_data)
        total = lin_system(c1_data, fit.working_cov).values(fit.beta_hat).sum(axis=0)
        assert np.max(np.abs(total)) < 1e-8
        assert fit.converged
        assert fit.method == BaselineMethod.LIN

    def test_scaling_equivariance(self, c1_data):
        base = fit_lin(c1_data)
        doubled = fit_lin(c1_data.scaled_response(2.0))
        np.testing.assert_allclose(doubled.beta_hat, 2.0 * base.beta_hat, rtol=1e-8)

    def test_unbiased_near_truth(self, c1_data):
        fit = fit_lin(c1_data)
        np.testing.assert_allclose(fit.beta_hat, [1.0, 1.0, 1.0], atol=0.25)
        assert np.all(fit.standard_errors > 0)


class TestNaive:
    """Test suite for the naive averaged-surrogate estimators"""

    def test_gee_error_free_matches_gls(self, error_free_data):
        fit = fit_naive_gee(error_free_data)
        np.testing.assert_allclose(fit.beta_hat, _gls(error_free_data, fit.working_cov), rtol=1e-8, atol=1e-10)

    def test_gee_attenuation(self, c1_data):
        """Test the error-prone slope shrinks towards 1/(1 + 0.18)"""
        fit = fit_naive_gee(c1_data)
        assert fit.beta_hat[1] < 1.0
        assert fit.beta_hat[1] == pytest.approx(1.0 / 1.18, abs=0.12)

    def test_el_matches_gee(self, c1_data):
        gee = fit_naive_gee(c1_data)
        el = fit_naive_el(c1_data)
        np.testing.assert_allclose(el.beta_hat, gee.beta_hat, atol=1e-4)
        assert np.linalg.norm(el.el_fit.lambda_hat) < 1e-6
        assert el.el_fit.q == 3
        assert el.el_fit.method == "el_naive"

    def test_naive_system_root(self, c1_data):
        fit = fit_naive_gee(c1_data)
        total = naive_system(c1_data, fit.working_cov).values(fit.beta_hat).sum(axis=0)
        assert np.max(np.abs(total)) < 1e-8


class TestEfficiency:
    """Test suite for the covariance comparison"""

    def test_self_comparison_is_zero(self, c1_data):
        fit = fit_lin(c1_data)
        report = compare_efficiency(fit, fit)
        np.testing.assert_array_equal(report.difference, 0.0)
        assert report.psd

    def test_report_fields(self, c1_fit, c1_data):
        report = compare_efficiency(c1_fit, fit_lin(c1_data))
        assert report.eigenvalues.shape == (3,)
        assert set(report.to_dict()) == {'eigenvalues', 'min_eigenvalue', 'tolerance', 'psd'}

    @pytest.mark.slow
    def test_proposed_more_efficient_than_lin(self):
        """Test Cov_lin - Cov_el is positive semidefinite on a large C2 sample"""
        ds = generate_dataset(Scenario.preset("C2", 1000), seed=4)
        report = compare_efficiency(fit_mele(ds), fit_lin(ds))
        assert report.psd

    def test_dimension_mismatch(self, c1_data):
        fit = fit_lin(c1_data)
        with pytest.raises(DataError):
            compare_efficiency(fit, replace(fit, covariance=np.eye(2)))


class TestDispatch:
    """Test suite for method dispatch by name"""

    def test_names(self, c1_data):
        assert fit_by_name('gee-naive', c1_data).method == BaselineMethod.GEE_NAIVE
        assert fit_by_name('lin', c1_data).method == BaselineMethod.LIN

    def test_unknown(self, c1_data):
        with pytest.raises(DataError):
            fit_by_name('simex', c1_data)
