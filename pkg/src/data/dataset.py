"""
Longitudinal dataset dengan replicate error-prone covariates
Ingest, validate, center and write long-format CSV files
"""

import re
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..utils.config import read_key_values
from ..utils.errors import DataError, ParseError, SchemaError, ValidationError

INTERCEPT = "(Intercept)"


def _as_name_tuple(value) -> Tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(',') if part.strip())
    return tuple(str(v) for v in value)


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ('1', 'true', 'yes', 'on')


@dataclass(frozen=True)
class ColumnLayout:
    """Names of the design columns and the replicate naming rule"""
    exact_names: Tuple[str, ...] = ()
    errorprone_names: Tuple[str, ...] = ()
    replicate_suffix_rule: str = "{coord}_r{k}"
    has_intercept: bool = False
    subject_column: str = "subject"
    visit_column: str = "visit"
    response_column: str = "y"

    def __post_init__(self):
        object.__setattr__(self, 'exact_names', _as_name_tuple(self.exact_names))
        object.__setattr__(self, 'errorprone_names', _as_name_tuple(self.errorprone_names))
        names = list(self.exact_names) + list(self.errorprone_names)
        duplicated = sorted({n for n in names if names.count(n) > 1})
        if duplicated:
            raise DataError(f"Column names must be unique, duplicated: {duplicated}")
        reserved = {self.subject_column, self.visit_column, self.response_column, INTERCEPT}
        clash = reserved.intersection(names)
        if clash:
            raise DataError(f"Covariate names clash with reserved columns: {sorted(clash)}")
        if "{coord}" not in self.replicate_suffix_rule or "{k}" not in self.replicate_suffix_rule:
            raise DataError("replicate_suffix_rule must contain {coord} and {k}")

    @property
    def n_lead(self) -> int:
        """Number of leading intercept columns (0 or 1)"""
        return int(self.has_intercept)

    @property
    def p_err(self) -> int:
        return len(self.errorprone_names)

    @property
    def p_exact(self) -> int:
        """Error-free column count, intercept included"""
        return len(self.exact_names) + self.n_lead

    @property
    def p(self) -> int:
        return self.p_exact + self.p_err

    @property
    def coefficient_names(self) -> List[str]:
        lead = [INTERCEPT] if self.has_intercept else []
        return lead + list(self.errorprone_names) + list(self.exact_names)

    @property
    def errorprone_coords(self) -> List[int]:
        """Coefficient indices of the error-prone covariates"""
        return list(range(self.n_lead, self.n_lead + self.p_err))

    def replicate_column(self, coord: str, k: int) -> str:
        return self.replicate_suffix_rule.format(coord=coord, k=k)

    def replicate_pattern(self, coord: str) -> 're.Pattern':
        prefix, _, suffix = self.replicate_suffix_rule.format(coord=re.escape(coord), k="\x00").partition("\x00")
        return re.compile(f"^{prefix}(\\d+){suffix}$")

    @classmethod
    def from_file(cls, path) -> 'ColumnLayout':
        """Read a key-value layout description"""
        values = read_key_values(path)
        known = {
            'exact': 'exact_names', 'exact_names': 'exact_names',
            'errorprone': 'errorprone_names', 'errorprone_names': 'errorprone_names',
            'intercept': 'has_intercept', 'has_intercept': 'has_intercept',
            'replicate_suffix_rule': 'replicate_suffix_rule',
            'subject_column': 'subject_column', 'visit_column': 'visit_column',
            'response_column': 'response_column', 'response': 'response_column',
        }
        kwargs: Dict[str, Any] = {}
        for key, value in values.items():
            target = known.get(str(key).lower())
            if target is None:
                raise DataError(f"Unknown layout key {key!r} in {path}")
            kwargs[target] = value
        if 'has_intercept' in kwargs:
            kwargs['has_intercept'] = _as_bool(kwargs['has_intercept'])
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    """Responses, exact covariates and K replicate surrogate matrices of one subject"""
    subject_id: Hashable
    y: np.ndarray
    x_exact: np.ndarray
    w_reps: np.ndarray
    visits: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        m = y.shape[0]
        if m < 1:
            raise ValidationError("at least one visit is required", self.subject_id)
        x_exact = np.array(self.x_exact, dtype=float)
        if x_exact.ndim == 1:
            x_exact = x_exact.reshape(m, -1) if x_exact.size else np.empty((m, 0))
        if x_exact.ndim != 2 or x_exact.shape[0] != m:
            raise ValidationError(f"exact covariates must have {m} rows, got shape {x_exact.shape}", self.subject_id)
        w_reps = np.array(self.w_reps, dtype=float)
        if w_reps.ndim != 3 or w_reps.shape[1] != m:
            raise ValidationError(
                f"replicate array must have shape (K, {m}, p_err), got {w_reps.shape}", self.subject_id)
        for name, arr in (('y', y), ('x_exact', x_exact), ('w_reps', w_reps)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite values in {name}", self.subject_id)
        visits = np.arange(1, m + 1) if self.visits is None else np.array(self.visits)
        if visits.shape[0] != m:
            raise ValidationError("visit index length differs from response length", self.subject_id)
        for arr in (y, x_exact, w_reps, visits):
            arr.setflags(write=False)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'x_exact', x_exact)
        object.__setattr__(self, 'w_reps', w_reps)
        object.__setattr__(self, 'visits', visits)

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.w_reps.shape[0]

    def designs(self, n_lead: int) -> np.ndarray:
        """Replicate design matrices W_i(k), shape (K, m, p)"""
        lead = np.broadcast_to(self.x_exact[:, :n_lead], (self.K, self.m, n_lead))
        rest = np.broadcast_to(self.x_exact[:, n_lead:], (self.K, self.m, self.x_exact.shape[1] - n_lead))
        return np.concatenate([lead, self.w_reps, rest], axis=2)


@dataclass(frozen=True, eq=False)
class LongitudinalDataset:
    """Ordered subjects sharing one column layout"""
    subjects: Tuple[SubjectRecord, ...]
    layout: ColumnLayout

    def __post_init__(self):
        subjects = tuple(self.subjects)
        object.__setattr__(self, 'subjects', subjects)
        if not subjects:
            raise ValidationError("dataset must contain at least one subject")
        K = subjects[0].K
        if K < 2:
            raise ValidationError(f"at least 2 replicates are required, got {K}", subjects[0].subject_id)
        seen = set()
        for s in subjects:
            if s.subject_id in seen:
                raise ValidationError("duplicated subject identifier", s.subject_id)
            seen.add(s.subject_id)
            if s.K != K:
                raise ValidationError(f"expected {K} replicates, got {s.K}", s.subject_id)
            if s.x_exact.shape[1] != self.layout.p_exact:
                raise ValidationError(
                    f"expected {self.layout.p_exact} exact columns, got {s.x_exact.shape[1]}", s.subject_id)
            if s.w_reps.shape[2] != self.layout.p_err:
                raise ValidationError(
                    f"expected {self.layout.p_err} error-prone columns, got {s.w_reps.shape[2]}", s.subject_id)

    @property
    def n(self) -> int:
        return len(self.subjects)

    @property
    def K(self) -> int:
        return self.subjects[0].K

    @property
    def p(self) -> int:
        return self.layout.p

    @property
    def N(self) -> int:
        """Total number of subject-visit observations"""
        return int(sum(s.m for s in self.subjects))

    @property
    def visit_counts(self) -> List[int]:
        return [s.m for s in self.subjects]

    @cached_property
    def designs(self) -> List[np.ndarray]:
        """Per subject replicate designs, each of shape (K, m_i, p)"""
        return [s.designs(self.layout.n_lead) for s in self.subjects]

    @cached_property
    def averaged_designs(self) -> List[np.ndarray]:
        """Per subject designs with replicate-averaged surrogates"""
        return [d.mean(axis=0) for d in self.designs]

    def with_subjects(self, subjects: Sequence[SubjectRecord]) -> 'LongitudinalDataset':
        return LongitudinalDataset(subjects=tuple(subjects), layout=self.layout)

    def scaled_response(self, factor: float) -> 'LongitudinalDataset':
        return self.with_subjects([replace(s, y=s.y * factor) for s in self.subjects])


def load_csv(path, layout: ColumnLayout, replicates: Optional[int] = None) -> LongitudinalDataset:
    """Load a long-format CSV (one row per subject-visit)"""
    path = Path(path)
    frame = pd.read_csv(path, dtype={layout.subject_column: str}, keep_default_na=True)
    frame.columns = [str(c).strip() for c in frame.columns]

    for column in (layout.subject_column, layout.visit_column, layout.response_column, *layout.exact_names):
        if column not in frame.columns:
            raise SchemaError(column)

    K = _detect_replicates(frame.columns, layout, replicates)
    replicate_columns = [[layout.replicate_column(c, k) for c in layout.errorprone_names] for k in range(1, K + 1)]
    numeric_columns = [layout.visit_column, layout.response_column, *layout.exact_names]
    flat_replicates = [c for cols in replicate_columns for c in cols]

    if frame[layout.subject_column].isna().any():
        row = int(np.flatnonzero(frame[layout.subject_column].isna().to_numpy())[0])
        raise ParseError("missing subject identifier", row=row + 2)

    values: Dict[str, np.ndarray] = {}
    for column in numeric_columns + flat_replicates:
        raw = frame[column]
        parsed = pd.to_numeric(raw, errors='coerce').to_numpy(dtype=float)
        bad_parse = np.isnan(parsed) & raw.notna().to_numpy()
        if bad_parse.any() or np.isinf(parsed).any():
            row = int(np.flatnonzero(bad_parse | np.isinf(parsed))[0])
            raise ParseError(f"non-finite or non-numeric value in column {column!r}", row=row + 2)
        missing = np.isnan(parsed)
        if missing.any():
            row = int(np.flatnonzero(missing)[0])
            subject = frame[layout.subject_column].iloc[row]
            if column in flat_replicates:
                raise ValidationError(f"replicate column {column!r} missing at visit row {row + 2}", subject)
            raise ParseError(f"missing value in column {column!r}", row=row + 2)
        values[column] = parsed

    subjects: List[SubjectRecord] = []
    groups = frame.groupby(layout.subject_column, sort=False).indices
    for subject_id in pd.unique(frame[layout.subject_column]):
        rows = np.asarray(groups[subject_id])
        visits = values[layout.visit_column][rows]
        order = np.argsort(visits, kind='stable')
        rows, visits = rows[order], visits[order]
        if np.unique(visits).shape[0] != visits.shape[0]:
            raise ValidationError("duplicated visit index", subject_id)
        m = rows.shape[0]
        exact = np.column_stack([values[c][rows] for c in layout.exact_names]) if layout.exact_names else np.empty((m, 0))
        if layout.has_intercept:
            exact = np.column_stack([np.ones(m), exact])
        w_reps = np.stack([
            np.column_stack([values[c][rows] for c in cols]) if cols else np.empty((m, 0))
            for cols in replicate_columns
        ])
        subjects.append(SubjectRecord(
            subject_id=subject_id,
            y=values[layout.response_column][rows],
            x_exact=exact,
            w_reps=w_reps,
            visits=visits,
        ))

    dataset = LongitudinalDataset(subjects=tuple(subjects), layout=layout)
    logger.info(f"Loaded {path.name}: n={dataset.n}, N={dataset.N}, K={dataset.K}, "
                f"p={dataset.p} (p_err={layout.p_err}, p_exact={layout.p_exact})")
    return dataset


def _detect_replicates(columns, layout: ColumnLayout, replicates: Optional[int]) -> int:
    if not layout.errorprone_names:
        return replicates or 2
    counts = {}
    for coord in layout.errorprone_names:
        pattern = layout.replicate_pattern(coord)
        found = sorted(int(m.group(1)) for m in map(pattern.match, columns) if m)
        counts[coord] = max(found) if found else 0
    K = replicates or max(counts.values())
    if K < 2:
        raise SchemaError(layout.replicate_column(layout.errorprone_names[0], 2))
    for coord in layout.errorprone_names:
        for k in range(1, K + 1):
            column = layout.replicate_column(coord, k)
            if column not in columns:
                raise SchemaError(column)
    return K


def to_frame(ds: LongitudinalDataset) -> pd.DataFrame:
    """Long-format frame with the same columns load_csv expects"""
    layout = ds.layout
    lead = layout.n_lead
    parts = []
    for s in ds.subjects:
        part = {
            layout.subject_column: [s.subject_id] * s.m,
            layout.visit_column: s.visits,
            layout.response_column: s.y,
        }
        for j, name in enumerate(layout.exact_names):
            part[name] = s.x_exact[:, lead + j]
        for k in range(s.K):
            for c, coord in enumerate(layout.errorprone_names):
                part[layout.replicate_column(coord, k + 1)] = s.w_reps[k, :, c]
        parts.append(pd.DataFrame(part))
    return pd.concat(parts, ignore_index=True)


def write_csv(ds: LongitudinalDataset, path) -> Path:
    """Write the dataset in long format"""
    path = Path(path)
    to_frame(ds).to_csv(path, index=False, float_format='%.17g')
    return path


def center_columns(ds: LongitudinalDataset, columns: Sequence[str]) -> LongitudinalDataset:
    """Subtract grand means; replicate columns of one coordinate share a pooled mean"""
    layout = ds.layout
    lead = layout.n_lead
    y_shift = 0.0
    exact_shift = np.zeros(layout.p_exact)
    err_shift = np.zeros(layout.p_err)

    for column in columns:
        if column == layout.response_column:
            y_shift = np.concatenate([s.y for s in ds.subjects]).mean()
        elif column in layout.exact_names:
            j = lead + layout.exact_names.index(column)
            exact_shift[j] = np.concatenate([s.x_exact[:, j] for s in ds.subjects]).mean()
        elif column in layout.errorprone_names:
            c = layout.errorprone_names.index(column)
            err_shift[c] = np.concatenate([s.w_reps[:, :, c].ravel() for s in ds.subjects]).mean()
        else:
            raise SchemaError(column, f"Cannot center unknown column: {column!r}")

    centered = [
        replace(s, y=s.y - y_shift, x_exact=s.x_exact - exact_shift, w_reps=s.w_reps - err_shift)
        for s in ds.subjects
    ]
    logger.debug(f"Centered columns {list(columns)}")
    return ds.with_subjects(centered)


def replicate_centered_difference(ds: LongitudinalDataset, coord: str, replicate: int) -> np.ndarray:
    """W(k) minus the per-observation mean over all K replicates, stacked over subjects"""
    layout = ds.layout
    if coord not in layout.errorprone_names:
        raise DataError(f"{coord!r} is not an error-prone coordinate")
    if not 1 <= replicate <= ds.K:
        raise DataError(f"replicate index must lie in 1..{ds.K}, got {replicate}")
    c = layout.errorprone_names.index(coord)
    out = []
    for s in ds.subjects:
        w = s.w_reps[:, :, c]
        out.append(w[replicate - 1] - w.mean(axis=0))
    return np.concatenate(out)
