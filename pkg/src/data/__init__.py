"""Dataset modules untuk longitudinal data with replicate measurements"""

from .dataset import (
    INTERCEPT, ColumnLayout, SubjectRecord, LongitudinalDataset,
    load_csv, write_csv, to_frame, center_columns, replicate_centered_difference
)
from .diagnostics import SkewnessDiagnostic, dagostino_skewness_test, skewness_table

__all__ = [
    'INTERCEPT', 'ColumnLayout', 'SubjectRecord', 'LongitudinalDataset',
    'load_csv', 'write_csv', 'to_frame', 'center_columns', 'replicate_centered_difference',
    'SkewnessDiagnostic', 'dagostino_skewness_test', 'skewness_table'
]
