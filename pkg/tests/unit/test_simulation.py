"""Unit tests untuk simulation scenarios, summaries and the study runner"""

import numpy as np
import pytest

from src.simulation import (
    DistKind, ErrorDist, ReplicationOutcome, Scenario, generate_dataset, metrics, replication_seed,
    run_study, run_study_async, summarize
)
from src.simulation.runner import MethodOutcome
from src.utils.errors import DataError, StudyError

NAMES = ['(Intercept)', 'x1', 'x2']


class TestMetrics:
    """Test suite for Monte Carlo summaries"""

    def test_single_coefficient(self):
        rows = metrics([[0.9], [1.0], [1.1]], [[[0.5, 1.5]], [[1.2, 1.4]], [[0.8, 1.3]]], [1.0], ['b'], 'lin')
        row = rows[0]
        assert row.bias == pytest.approx(0.0, abs=1e-12)
        assert row.sd == pytest.approx(0.1)
        assert row.mse == pytest.approx(0.02 / 3)
        assert row.cp == pytest.approx(2.0 / 3)
        assert row.ml == pytest.approx((1.0 + 0.2 + 0.5) / 3)
        assert row.n_reps == 3

    def test_single_replication_has_no_sd(self):
        row = metrics([[1.2]], [[[1.0, 1.4]]], [1.0], ['b'])[0]
        assert row.sd is None
        assert row.bias == pytest.approx(0.2)

    def test_shape_mismatch(self):
        with pytest.raises(StudyError):
            metrics([[1.0, 2.0]], [[[0, 2], [1, 3]]], [1.0], ['a', 'b'])


class TestErrorDist:
    """Test suite for replicate error distributions"""

    def test_parse(self):
        dist = ErrorDist.parse("t:4")
        assert dist.kind == DistKind.STUDENT_T
        assert dist.variance == pytest.approx(2.0)
        assert str(ErrorDist.parse(" normal:0.6 ")) == "normal:0.6"
        assert ErrorDist.parse("exp:2").variance == pytest.approx(0.25)

    def test_invalid(self):
        for text in ("normal", "gamma:2", "t:0", "exp:-1", "normal:-0.1", "normal:abc"):
            with pytest.raises(DataError):
                ErrorDist.parse(text)

    def test_exponential_is_centered(self):
        rng = np.random.Generator(np.random.Philox(key=1))
        draws = ErrorDist.parse("exp:2").sample(rng, 20000)
        assert abs(draws.mean()) < 0.02
        assert draws.min() >= -0.5

    def test_t_variance(self):
        rng = np.random.Generator(np.random.Philox(key=2))
        draws = ErrorDist.parse("t:6").sample(rng, 40000)
        assert draws.var() == pytest.approx(1.5, rel=0.1)


class TestScenario:
    """Test suite for scenario construction and data generation"""

    def test_presets(self):
        c4 = Scenario.preset("c4", 100)
        assert c4.K == 3
        assert [str(d) for d in c4.error_dists] == ["normal:0.6", "t:4", "exp:2"]
        assert Scenario.preset("C3").n == 500
        with pytest.raises(DataError):
            Scenario.preset("C9")

    def test_validation(self):
        with pytest.raises(DataError):
            Scenario("bad", 1)
        with pytest.raises(DataError):
            Scenario("bad", 10, rho=1.0)
        with pytest.raises(DataError):
            Scenario("bad", 10, error_dists=("normal:0.6",))
        with pytest.raises(DataError):
            Scenario("bad", 10, beta_true=(1.0, 1.0))

    def test_from_file(self, tmp_path):
        path = tmp_path / "scenario.env"
        path.write_text("NAME=mixed\nN=40\nM=4\nERROR_DISTS=normal:0.5,t:5\nRHO=0.3\n")
        sc = Scenario.from_file(path)
        assert (sc.name, sc.n, sc.m, sc.rho, sc.K) == ("mixed", 40, 4, 0.3, 2)
        assert Scenario.from_file(path, n=80).n == 80

    def test_from_file_unknown_key(self, tmp_path):
        path = tmp_path / "scenario.yaml"
        path.write_text("n: 40\nsigma: 2\n")
        with pytest.raises(DataError):
            Scenario.from_file(path)

    def test_generation_is_deterministic(self):
        sc = Scenario.preset("C2", 30)
        a, b = generate_dataset(sc, 17), generate_dataset(sc, 17)
        other = generate_dataset(sc, 18)
        for s, t in zip(a.subjects, b.subjects):
            np.testing.assert_array_equal(s.y, t.y)
            np.testing.assert_array_equal(s.w_reps, t.w_reps)
        assert not np.array_equal(a.subjects[0].y, other.subjects[0].y)

    def test_dataset_shape(self):
        ds = generate_dataset(Scenario.preset("C3", 20), 4)
        assert ds.n == 20
        assert ds.K == 3
        assert ds.layout.coefficient_names == NAMES
        assert ds.subjects[0].w_reps.shape == (3, 6, 1)

    def test_zero_error_replicates_identical(self, error_free_data):
        for s in error_free_data.subjects:
            np.testing.assert_array_equal(s.w_reps[0], s.w_reps[1])

    def test_replicate_difference_variance(self):
        """Test Var(W(1) - W(2)) = 2 * 0.36"""
        ds = generate_dataset(Scenario.preset("C1", 500), 8)
        diffs = np.concatenate([(s.w_reps[0] - s.w_reps[1]).ravel() for s in ds.subjects])
        assert diffs.var() == pytest.approx(0.72, abs=0.08)

    def test_replication_seed(self):
        assert replication_seed(12, 0) == 12
        assert replication_seed(12, 5) == 9


class TestRunner:
    """Test suite for the study runner"""

    def test_thread_count_does_not_change_results(self):
        sc = Scenario.preset("C1", 60)
        one = run_study(sc, ['gee-naive', 'lin'], n_reps=4, base_seed=3, threads=1)
        two = run_study(sc, ['gee-naive', 'lin'], n_reps=4, base_seed=3, threads=2)
        assert one.to_frame().equals(two.to_frame())
        assert one.n_failures == {'gee-naive': 0, 'lin': 0}

    def test_report_frame(self):
        report = run_study(Scenario.preset("C1", 60), ['lin'], n_reps=3, base_seed=1, threads=1)
        frame = report.to_frame()
        assert list(frame['coef']) == NAMES
        assert (frame['n_reps'] == 3).all()
        scaled = report.to_frame(percent_units=True)
        assert scaled['bias'].iloc[1] == pytest.approx(100.0 * frame['bias'].iloc[1])
        assert report.to_dict()['rows'][0]['method'] == 'lin'

    def test_naive_gee_is_biased(self):
        report = run_study(Scenario.preset("C1", 200), ['gee-naive', 'lin'], n_reps=3, base_seed=5, threads=1)
        assert report.row('gee-naive', 'x1').bias < -0.05
        assert abs(report.row('lin', 'x1').bias) < abs(report.row('gee-naive', 'x1').bias)

    @pytest.mark.asyncio
    async def test_async_entry_point(self):
        report = await run_study_async(Scenario.preset("C1", 50), ['lin'], n_reps=2, base_seed=9, threads=2)
        assert report.n_reps == 2
        assert report.row('lin', 'x2').n_reps == 2

    def test_invalid_arguments(self):
        sc = Scenario.preset("C1", 50)
        with pytest.raises(DataError):
            run_study(sc, ['simex'], n_reps=1)
        with pytest.raises(DataError):
            run_study(sc, ['lin', 'lin'], n_reps=1)
        with pytest.raises(DataError):
            run_study(sc, ['lin'], n_reps=0)

    def test_all_failed(self):
        sc = Scenario.preset("C1", 50)
        outcomes = [ReplicationOutcome(r, r, {'lin': MethodOutcome(None, None, 0.1, "not converged")})
                    for r in range(3)]
        with pytest.raises(StudyError):
            summarize(sc, ['lin'], outcomes)

    def test_partial_failures_counted(self):
        sc = Scenario.preset("C1", 50)
        good = MethodOutcome(np.ones(3), np.tile([0.5, 1.5], (3, 1)), 0.1)
        outcomes = [ReplicationOutcome(1, 1, {'lin': good}),
                    ReplicationOutcome(0, 0, {'lin': MethodOutcome(None, None, 0.1, "unbounded interval")})]
        report = summarize(sc, ['lin'], outcomes)
        assert report.n_failures == {'lin': 1}
        assert report.row('lin', 'x1').cp == 1.0

    @pytest.mark.slow
    def test_proposed_and_naive_el(self):
        report = run_study(Scenario.preset("C1", 150), ['el-naive', 'proposed'], n_reps=2, base_seed=2, threads=2)
        assert report.n_failures['proposed'] <= 1
        assert {row.method for row in report.rows} >= {'proposed'}


class TestStudyAcceptance:
    """Test suite for reduced-scale Monte Carlo acceptance checks"""

    @pytest.mark.slow
    def test_c2_attenuation_and_efficiency(self):
        """Test naive GEE attenuates x1 by 1 - 1/(1 + 0.59) while the proposed fit stays unbiased"""
        report = run_study(Scenario.preset("C2", 500), ['gee-naive', 'lin', 'proposed'],
                           n_reps=40, base_seed=7, threads=2)
        assert report.n_failures['proposed'] <= 2
        naive, lin, proposed = (report.row(m, 'x1') for m in ('gee-naive', 'lin', 'proposed'))
        assert naive.bias == pytest.approx(-0.371, abs=0.04)
        assert abs(proposed.bias) < 0.05
        assert proposed.mse < naive.mse
        assert proposed.sd <= 1.2 * lin.sd

    @pytest.mark.slow
    def test_c1_coverage_near_nominal(self):
        report = run_study(Scenario.preset("C1", 200), ['lin', 'proposed'], n_reps=100, base_seed=13, threads=2)
        assert report.n_failures['proposed'] <= 5
        for method in ('lin', 'proposed'):
            for coef in NAMES:
                row = report.row(method, coef)
                assert 0.88 <= row.cp <= 1.0, (method, coef, row.cp)
                assert row.ml > 0
