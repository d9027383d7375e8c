"""Replicate-difference skewness diagnostics"""

from dataclasses import dataclass, asdict
from typing import List, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats

from ..utils.errors import DataError, InsufficientSampleError
from .dataset import LongitudinalDataset, replicate_centered_difference

MIN_SKEWTEST_OBS = 9


@dataclass(frozen=True)
class SkewnessDiagnostic:
    """D'Agostino skewness test result for one coordinate"""
    coordinate: str
    z_statistic: float
    p_value: float
    n_obs: int
    replicate: int = 0

    def asymmetric(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def dagostino_skewness_test(values: Sequence[float], coordinate: str = "") -> SkewnessDiagnostic:
    """
    D'Agostino transformation of the sample skewness to an approximately
    standard normal statistic, with a two-sided p-value.
    """
    values = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(values)):
        raise DataError(f"non-finite values passed to skewness test for {coordinate!r}")
    n = values.shape[0]
    if n < MIN_SKEWTEST_OBS:
        raise InsufficientSampleError(
            f"skewness test needs at least {MIN_SKEWTEST_OBS} observations, got {n}")

    if np.ptp(values) == 0.0:
        # degenerate sample: skewness defined as 0
        return SkewnessDiagnostic(coordinate, 0.0, 1.0, n)

    z, p = stats.skewtest(values, alternative='two-sided')
    return SkewnessDiagnostic(coordinate, float(z), float(min(max(p, 0.0), 1.0)), n)


def skewness_table(ds: LongitudinalDataset, alpha: float = 0.05) -> pd.DataFrame:
    """Skewness test per error-prone coordinate and replicate"""
    rows: List[dict] = []
    for coord in ds.layout.errorprone_names:
        for k in range(1, ds.K + 1):
            diag = dagostino_skewness_test(replicate_centered_difference(ds, coord, k), coord)
            row = asdict(diag)
            row['replicate'] = k
            row['asymmetric'] = diag.asymmetric(alpha)
            rows.append(row)
            if row['asymmetric']:
                logger.info(f"{coord} replicate {k}: centered difference is asymmetric "
                            f"(z={diag.z_statistic:.3f}, p={diag.p_value:.2e})")
    return pd.DataFrame(rows, columns=['coordinate', 'replicate', 'z_statistic', 'p_value', 'n_obs', 'asymmetric'])
