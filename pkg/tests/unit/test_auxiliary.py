"""Unit tests untuk auxiliary estimating functions and basis reduction"""

import numpy as np
import pytest

from src.estimation.auxiliary import (
    AuxiliaryBasis, CoordinateKind, ElementTag, build_full_aux, eval_reduced, full_tags,
    jacobian_reduced, lin_system, moment_system, ordered_pivoted_cholesky, reduce_basis,
    replicate_pairs, solve_exact
)
from src.estimation.covariance import WorkingCovariance
from src.utils.errors import DataError, IdentifiabilityError, InsufficientSampleError

TRUE_BETA = np.array([1.0, 1.0, 1.0])
SIGMA = WorkingCovariance("exchangeable", 0.8, 0.6)


class TestFullAuxiliary:
    """Test suite for the full auxiliary vector"""

    def test_pair_order(self):
        assert replicate_pairs(3) == [(1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)]

    def test_scalar_values(self, scalar_subject, scalar_layout):
        """Test g = (2(10-3), 3(10-2))"""
        values, tags = build_full_aux(scalar_subject, [1.0], np.eye(1), scalar_layout)
        np.testing.assert_allclose(values, [14.0, 24.0])
        assert [(t.k1, t.k2) for t in tags] == [(1, 2), (2, 1)]

    def test_scalar_jacobian(self, scalar_subject, scalar_layout):
        basis = AuxiliaryBasis.complete(scalar_layout, 2)
        jac = jacobian_reduced(scalar_subject, [1.0], basis, np.eye(1))
        np.testing.assert_allclose(jac, [[-6.0], [-6.0]])

    def test_exact_coordinates_repeat(self, c3_data):
        """Test error-free elements do not depend on k1"""
        inv = SIGMA.subject_inverses(c3_data)[0]
        values, tags = build_full_aux(c3_data.subjects[0], TRUE_BETA, inv, c3_data.layout)
        by_tag = {(t.k1, t.k2, t.coord): v for t, v in zip(tags, values)}
        for coord in (0, 2):
            assert by_tag[(1, 2, coord)] == pytest.approx(by_tag[(3, 2, coord)], abs=1e-12)
            assert by_tag[(2, 1, coord)] == pytest.approx(by_tag[(3, 1, coord)], abs=1e-12)

    def test_complete_basis_matches_full(self, c1_data):
        subject = c1_data.subjects[3]
        inv = SIGMA.subject_inverses(c1_data)[3]
        basis = AuxiliaryBasis.complete(c1_data.layout, c1_data.K)
        full, _ = build_full_aux(subject, TRUE_BETA, inv, c1_data.layout)
        np.testing.assert_allclose(eval_reduced(subject, TRUE_BETA, basis, inv), full)

    def test_jacobian_finite_differences(self, c3_data):
        rng = np.random.Generator(np.random.Philox(key=4))
        basis = reduce_basis(c3_data, TRUE_BETA, SIGMA)
        inverses = SIGMA.subject_inverses(c3_data)
        for i in range(5):
            subject, inv = c3_data.subjects[i], inverses[i]
            beta = TRUE_BETA + rng.standard_normal(3)
            jac = jacobian_reduced(subject, beta, basis, inv)
            for j in range(3):
                h = 1e-6 * (1.0 + abs(beta[j]))
                step = np.zeros(3)
                step[j] = h
                fd = (eval_reduced(subject, beta + step, basis, inv)
                      - eval_reduced(subject, beta - step, basis, inv)) / (2 * h)
                np.testing.assert_allclose(jac[:, j], fd, rtol=1e-6, atol=1e-6)
            np.testing.assert_array_equal(jac, jacobian_reduced(subject, beta + 1.0, basis, inv))

    def test_wrong_beta_length(self, scalar_subject, scalar_layout):
        with pytest.raises(DataError):
            build_full_aux(scalar_subject, [1.0, 2.0], np.eye(1), scalar_layout)

    def test_tag_validation(self):
        with pytest.raises(ValueError):
            ElementTag(2, 2, 0, CoordinateKind.EXACT)


class TestReduceBasis:
    """Test suite for basis reduction"""

    def test_three_replicates(self, c3_data):
        """Test 18 elements reduce to 12 then 11"""
        basis = reduce_basis(c3_data, TRUE_BETA, SIGMA)
        assert len(full_tags(c3_data.layout, 3)) == 18
        assert len(basis.dropped_duplicates) == 6
        assert basis.q == 11
        assert basis.dropped_dependent == (ElementTag(3, 2, 1, CoordinateKind.ERRORPRONE),)

    def test_cycle_identity(self, c3_data):
        """Test (1,2)+(3,1)+(2,3) equals (2,1)+(1,3)+(3,2) on the error-prone coordinate"""
        inverses = SIGMA.subject_inverses(c3_data)
        beta = np.array([0.3, -1.2, 2.0])
        for subject, inv in zip(c3_data.subjects[:20], inverses):
            values, tags = build_full_aux(subject, beta, inv, c3_data.layout)
            g = {(t.k1, t.k2): v for t, v in zip(tags, values) if t.coord == 1}
            lhs = g[(1, 2)] + g[(3, 1)] + g[(2, 3)]
            rhs = g[(2, 1)] + g[(1, 3)] + g[(3, 2)]
            assert lhs == pytest.approx(rhs, abs=1e-8)

    def test_two_replicates(self, c1_data):
        basis = reduce_basis(c1_data, TRUE_BETA, SIGMA)
        assert basis.q == 6
        assert basis.dropped_duplicates == ()
        assert basis.dropped_dependent == ()

    def test_retained_pivots_exceed_threshold(self, c3_data):
        basis = reduce_basis(c3_data, TRUE_BETA, SIGMA, rank_tol=1e-8)
        gram = moment_system(c3_data, SIGMA, basis).second_moment(TRUE_BETA)
        assert ordered_pivoted_cholesky(gram, 1e-8).all()
        assert np.isfinite(basis.gram_condition)

    def test_error_free_collapses_to_p(self, error_free_data):
        """Test identical replicates leave only p independent elements"""
        basis = reduce_basis(error_free_data, TRUE_BETA, SIGMA)
        assert basis.q == 3

    def test_too_few_subjects(self, c3_data):
        """Test the sample rank caps q, so two subjects cannot identify three parameters"""
        with pytest.raises(IdentifiabilityError):
            reduce_basis(c3_data.with_subjects(c3_data.subjects[:2]), TRUE_BETA, SIGMA)
        with pytest.raises(InsufficientSampleError):
            reduce_basis(c3_data.with_subjects(c3_data.subjects[:1]), TRUE_BETA, SIGMA)

    def test_small_sample_rank(self, c3_data):
        basis = reduce_basis(c3_data.with_subjects(c3_data.subjects[:8]), TRUE_BETA, SIGMA)
        assert 3 <= basis.q <= 8

    def test_ordered_cholesky_keeps_earlier(self):
        gram = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
        np.testing.assert_array_equal(ordered_pivoted_cholesky(gram, 1e-8), [True, False, True])

    def test_basis_audit(self, c3_data):
        audit = reduce_basis(c3_data, TRUE_BETA, SIGMA).to_dict()
        assert audit['q'] == 11
        assert audit['dropped_dependent'] == ['(3,2):x1']


class TestLinSystem:
    """Test suite for the cross-replicate estimating equation"""

    def test_root(self, c1_data):
        system = lin_system(c1_data, SIGMA)
        beta = solve_exact(system)
        total = system.values(beta).sum(axis=0)
        assert np.max(np.abs(total)) < 1e-10 * np.max(np.abs(system.offsets.sum(axis=0)))

    def test_overidentified_rejected(self, c1_data):
        basis = reduce_basis(c1_data, TRUE_BETA, SIGMA)
        with pytest.raises(IdentifiabilityError):
            solve_exact(moment_system(c1_data, SIGMA, basis))

    def test_fix_coordinates(self, c1_data):
        system = lin_system(c1_data, SIGMA)
        fixed = system.fix([1], [0.5])
        beta = np.array([0.2, 0.5, -0.3])
        np.testing.assert_allclose(fixed.values(beta[[0, 2]]), system.values(beta), atol=1e-10)
