"""Monte Carlo summaries: bias, SD, MSE, coverage and mean interval length"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..utils.errors import StudyError

REPORT_COLUMNS = ['scenario', 'n', 'method', 'coef', 'bias', 'sd', 'mse', 'cp', 'ml', 'n_reps', 'n_failures']
SCALED_COLUMNS = ('bias', 'sd', 'mse', 'cp', 'ml')


@dataclass(frozen=True)
class MetricRow:
    method: str
    coef: str
    bias: float
    sd: Optional[float]
    mse: float
    cp: float
    ml: float
    n_reps: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method, 'coef': self.coef, 'bias': self.bias, 'sd': self.sd,
            'mse': self.mse, 'cp': self.cp, 'ml': self.ml, 'n_reps': self.n_reps,
        }


def metrics(estimates, cis, beta_true, names: Sequence[str], method: str = "") -> List[MetricRow]:
    """
    Per-coefficient summaries over successful replications.

    ``estimates`` is (reps, p); ``cis`` is (reps, p, 2) holding lower and
    upper endpoints. SD uses the n-1 denominator and is None for a single
    replication.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    cis = np.asarray(cis, dtype=float).reshape(estimates.shape + (2,))
    beta_true = np.asarray(beta_true, dtype=float)
    reps, p = estimates.shape
    if reps < 1:
        raise StudyError(f"no successful replications for method {method!r}")
    if beta_true.shape != (p,) or len(names) != p:
        raise StudyError(f"expected {p} true coefficients and names, got {beta_true.shape[0]} and {len(names)}")

    errors = estimates - beta_true
    bias = errors.mean(axis=0)
    mse = np.mean(errors ** 2, axis=0)
    sd = estimates.std(axis=0, ddof=1) if reps > 1 else None
    covered = (cis[..., 0] <= beta_true) & (beta_true <= cis[..., 1])
    cp = covered.mean(axis=0)
    ml = (cis[..., 1] - cis[..., 0]).mean(axis=0)

    return [
        MetricRow(method, str(names[j]), float(bias[j]), None if sd is None else float(sd[j]),
                  float(mse[j]), float(cp[j]), float(ml[j]), reps)
        for j in range(p)
    ]


@dataclass
class StudyReport:
    """Study results per (method, coefficient); timing is kept out of the tables"""
    scenario: str
    n: int
    n_reps: int
    rows: List[MetricRow]
    n_failures: Dict[str, int]
    timing: Dict[str, float] = field(default_factory=dict)

    def to_frame(self, percent_units: bool = False) -> pd.DataFrame:
        records = []
        for row in self.rows:
            record = {'scenario': self.scenario, 'n': self.n, **row.to_dict(),
                      'n_failures': self.n_failures.get(row.method, 0)}
            records.append(record)
        frame = pd.DataFrame(records, columns=REPORT_COLUMNS)
        if percent_units:
            for column in SCALED_COLUMNS:
                frame[column] = pd.to_numeric(frame[column]) * 100.0
        return frame

    def row(self, method: str, coef: str) -> MetricRow:
        for row in self.rows:
            if row.method == method and row.coef == coef:
                return row
        raise KeyError(f"no row for method={method!r}, coef={coef!r}")

    def to_dict(self, percent_units: bool = False) -> Dict[str, Any]:
        frame = self.to_frame(percent_units)
        return {
            'scenario': self.scenario,
            'n': self.n,
            'n_reps': self.n_reps,
            'n_failures': dict(self.n_failures),
            'percent_units': percent_units,
            'rows': frame.drop(columns=['scenario', 'n']).astype(object).where(frame.notna(), None)
                         .to_dict(orient='records'),
        }
