"""Shared fixtures untuk unit tests"""

import numpy as np
import pytest

from src.data.dataset import ColumnLayout, LongitudinalDataset, SubjectRecord
from src.estimation.el_core import fit_mele
from src.simulation.scenarios import Scenario, generate_dataset
from src.utils.config import FitConfig


def make_dataset(y, w_reps, x_exact=None, layout=None) -> LongitudinalDataset:
    """Dataset from per-subject arrays; w_reps[i] has shape (K, m, p_err)"""
    layout = layout or ColumnLayout(errorprone_names=('w',))
    subjects = []
    for i, (yi, wi) in enumerate(zip(y, w_reps)):
        yi = np.asarray(yi, dtype=float)
        xi = np.empty((yi.shape[0], 0)) if x_exact is None else x_exact[i]
        subjects.append(SubjectRecord(subject_id=str(i + 1), y=yi, x_exact=xi, w_reps=wi))
    return LongitudinalDataset(tuple(subjects), layout)


@pytest.fixture
def scalar_subject():
    """K=2, p=1, m=1: W(1)=2, W(2)=3, Y=10"""
    return SubjectRecord(subject_id="a", y=[10.0], x_exact=np.empty((1, 0)),
                         w_reps=np.array([[[2.0]], [[3.0]]]))


@pytest.fixture
def scalar_layout():
    return ColumnLayout(errorprone_names=('w',))


@pytest.fixture(scope="session")
def c1_data():
    return generate_dataset(Scenario.preset("C1", 150), seed=11)


@pytest.fixture(scope="session")
def c3_data():
    return generate_dataset(Scenario.preset("C3", 200), seed=5)


@pytest.fixture(scope="session")
def error_free_data():
    """Replicates identical to the true covariate"""
    sc = Scenario("exact", 120, error_dists=("normal:0", "normal:0"))
    return generate_dataset(sc, seed=3)


@pytest.fixture(scope="session")
def c1_fit(c1_data):
    return fit_mele(c1_data, FitConfig())
