"""
Auxiliary estimating functions built from cross-replicate products
and their reduction to a full-rank basis
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor

from ..data.dataset import ColumnLayout, LongitudinalDataset, SubjectRecord
from ..utils.config import Config
from ..utils.errors import (
    DataError, IdentifiabilityError, InsufficientSampleError, NumericalError
)
from .covariance import WorkingCovariance


class CoordinateKind(str, Enum):
    EXACT = "exact"
    ERRORPRONE = "errorprone"


@dataclass(frozen=True)
class ElementTag:
    """One scalar element: row ``coord`` of W(k1)ᵀ Σ⁻¹ (Y - W(k2) β)"""
    k1: int
    k2: int
    coord: int
    kind: CoordinateKind

    def __post_init__(self):
        if self.k1 == self.k2:
            raise ValueError(f"replicate indices must differ, got k1 = k2 = {self.k1}")
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError(f"replicate indices are 1-based, got ({self.k1}, {self.k2})")

    def label(self, names: Optional[Sequence[str]] = None) -> str:
        coord = names[self.coord] if names is not None else str(self.coord)
        return f"({self.k1},{self.k2}):{coord}"


def replicate_pairs(K: int) -> List[Tuple[int, int]]:
    """(1,2),(2,1),(1,3),(3,1),...,(K-1,K),(K,K-1)"""
    pairs = []
    for a in range(1, K):
        for b in range(a + 1, K + 1):
            pairs.extend([(a, b), (b, a)])
    return pairs


def coordinate_kinds(layout: ColumnLayout) -> List[CoordinateKind]:
    errorprone = set(layout.errorprone_coords)
    return [CoordinateKind.ERRORPRONE if j in errorprone else CoordinateKind.EXACT for j in range(layout.p)]


def full_tags(layout: ColumnLayout, K: int) -> List[ElementTag]:
    kinds = coordinate_kinds(layout)
    return [ElementTag(k1, k2, j, kinds[j]) for k1, k2 in replicate_pairs(K) for j in range(layout.p)]


@dataclass(frozen=True)
class AuxiliaryBasis:
    """Retained elements g*_i(β) and the audit of what was dropped"""
    retained: Tuple[ElementTag, ...]
    dropped_duplicates: Tuple[ElementTag, ...]
    dropped_dependent: Tuple[ElementTag, ...]
    gram_condition: float
    layout: ColumnLayout
    K: int

    @property
    def q(self) -> int:
        return len(self.retained)

    @property
    def p(self) -> int:
        return self.layout.p

    @property
    def index(self) -> np.ndarray:
        """Positions of the retained elements in the full auxiliary vector"""
        pair_pos = {pair: i for i, pair in enumerate(replicate_pairs(self.K))}
        positions = []
        for tag in self.retained:
            if tag.coord >= self.p or (tag.k1, tag.k2) not in pair_pos:
                raise DataError(f"element {tag.label()} out of range for K={self.K}, p={self.p}")
            positions.append(pair_pos[(tag.k1, tag.k2)] * self.p + tag.coord)
        return np.asarray(positions, dtype=int)

    def same_elements(self, other: 'AuxiliaryBasis') -> bool:
        return self.retained == other.retained

    def to_dict(self) -> Dict[str, Any]:
        names = self.layout.coefficient_names
        return {
            'q': self.q,
            'retained': [t.label(names) for t in self.retained],
            'dropped_duplicates': [t.label(names) for t in self.dropped_duplicates],
            'dropped_dependent': [t.label(names) for t in self.dropped_dependent],
            'gram_condition': float(self.gram_condition),
        }

    @classmethod
    def complete(cls, layout: ColumnLayout, K: int) -> 'AuxiliaryBasis':
        """Basis retaining every element of the full vector"""
        return cls(tuple(full_tags(layout, K)), (), (), float('nan'), layout, K)


def _cross_products(design: np.ndarray, y: np.ndarray, sigma_inv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """W(k)ᵀΣ⁻¹Y per k, shape (K, p), and W(k1)ᵀΣ⁻¹W(k2), shape (K, K, p, p)"""
    m = y.shape[0]
    if design.ndim != 3 or design.shape[1] != m or sigma_inv.shape != (m, m):
        raise DataError(
            f"dimension mismatch: design {design.shape}, response {y.shape}, sigma_inv {sigma_inv.shape}")
    weighted = np.einsum('kmp,mn->kpn', design, sigma_inv)
    wy = weighted @ y
    ww = np.einsum('apn,bnr->abpr', weighted, design)
    return wy, ww


def full_linear_form(design: np.ndarray, y: np.ndarray, sigma_inv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Offset a and slope J of the full auxiliary vector, g(β) = a + J β,
    with a of length K(K-1)p and J of shape (K(K-1)p, p)
    """
    K = design.shape[0]
    wy, ww = _cross_products(design, y, sigma_inv)
    pairs = replicate_pairs(K)
    offset = np.concatenate([wy[k1 - 1] for k1, _ in pairs])
    slope = -np.concatenate([ww[k1 - 1, k2 - 1] for k1, k2 in pairs], axis=0)
    return offset, slope


def build_full_aux(subject: SubjectRecord, beta, sigma_inv: np.ndarray,
                   layout: ColumnLayout) -> Tuple[np.ndarray, List[ElementTag]]:
    """Full auxiliary vector of one subject and the tag of each element"""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (layout.p,):
        raise DataError(f"beta must have length {layout.p}, got shape {beta.shape}")
    offset, slope = full_linear_form(subject.designs(layout.n_lead), subject.y, np.asarray(sigma_inv))
    return offset + slope @ beta, full_tags(layout, subject.K)


def eval_reduced(subject: SubjectRecord, beta, basis: AuxiliaryBasis, sigma_inv: np.ndarray) -> np.ndarray:
    values, _ = build_full_aux(subject, beta, sigma_inv, basis.layout)
    return values[basis.index]


def jacobian_reduced(subject: SubjectRecord, beta, basis: AuxiliaryBasis, sigma_inv: np.ndarray) -> np.ndarray:
    """q × p derivative of g*; constant in β"""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (basis.p,):
        raise DataError(f"beta must have length {basis.p}, got shape {beta.shape}")
    _, slope = full_linear_form(subject.designs(basis.layout.n_lead), subject.y, np.asarray(sigma_inv))
    return slope[basis.index]


@dataclass(frozen=True, eq=False)
class MomentSystem:
    """
    Stacked linear estimating functions g_i(β) = offsets[i] + slopes[i] @ β
    for all subjects.
    """
    offsets: np.ndarray
    slopes: np.ndarray

    @property
    def n(self) -> int:
        return self.offsets.shape[0]

    @property
    def q(self) -> int:
        return self.offsets.shape[1]

    @property
    def p(self) -> int:
        return self.slopes.shape[2]

    def values(self, beta) -> np.ndarray:
        """n × q matrix of g_i(β)"""
        return self.offsets + self.slopes @ np.asarray(beta, dtype=float)

    def jacobian_sum(self) -> np.ndarray:
        """L_n = Σ_i ∂g_i/∂βᵀ"""
        return self.slopes.sum(axis=0)

    def second_moment(self, beta) -> np.ndarray:
        """M_n = Σ_i g_i g_iᵀ"""
        G = self.values(beta)
        return G.T @ G

    def restrict(self, index: Sequence[int]) -> 'MomentSystem':
        index = np.asarray(index, dtype=int)
        return MomentSystem(self.offsets[:, index], self.slopes[:, index, :])

    def fix(self, coords: Sequence[int], values: Sequence[float]) -> 'MomentSystem':
        """System in the free coordinates with ``coords`` held at ``values``"""
        coords = np.asarray(coords, dtype=int)
        free = np.setdiff1d(np.arange(self.p), coords)
        offsets = self.offsets + self.slopes[:, :, coords] @ np.asarray(values, dtype=float)
        return MomentSystem(offsets, self.slopes[:, :, free])


def full_moment_system(ds: LongitudinalDataset, sigma: WorkingCovariance) -> MomentSystem:
    inverses = sigma.subject_inverses(ds)
    forms = [full_linear_form(d, s.y, inv) for s, d, inv in zip(ds.subjects, ds.designs, inverses)]
    return MomentSystem(np.stack([a for a, _ in forms]), np.stack([j for _, j in forms]))


def moment_system(ds: LongitudinalDataset, sigma: WorkingCovariance, basis: AuxiliaryBasis) -> MomentSystem:
    """Reduced estimating functions g*_i for every subject"""
    if basis.layout.p != ds.p or basis.K != ds.K:
        raise DataError(f"basis built for p={basis.p}, K={basis.K} does not match dataset p={ds.p}, K={ds.K}")
    return full_moment_system(ds, sigma).restrict(basis.index)


def structural_duplicates(tags: Sequence[ElementTag], K: int) -> List[bool]:
    """
    Flags elements of error-free coordinates that repeat another element:
    for each k2 only the smallest admissible k1 is kept.
    """
    keep = []
    for tag in tags:
        if tag.kind == CoordinateKind.ERRORPRONE:
            keep.append(True)
        else:
            first_k1 = 1 if tag.k2 != 1 else 2
            keep.append(tag.k1 == first_k1)
    return keep


def ordered_pivoted_cholesky(gram: np.ndarray, rank_tol: float) -> np.ndarray:
    """
    Cholesky elimination in the given order, skipping every element whose
    Schur complement pivot is at most rank_tol times the largest diagonal.
    Returns a boolean mask of accepted elements.
    """
    A = np.array(gram, dtype=float, copy=True)
    n = A.shape[0]
    threshold = rank_tol * float(np.max(np.diag(A))) if n else 0.0
    accepted = np.zeros(n, dtype=bool)

    for i in range(n):
        if A[i, i] <= threshold:
            continue
        accepted[i] = True
        A[i, i] = np.sqrt(A[i, i])
        A[i + 1:, i] /= A[i, i]
        A[i + 1:, i + 1:] -= np.outer(A[i + 1:, i], A[i + 1:, i])

    return accepted


def reduce_basis(ds: LongitudinalDataset, beta, sigma: WorkingCovariance,
                 rank_tol: Optional[float] = None) -> AuxiliaryBasis:
    """
    Structural removal of duplicated error-free elements, then removal of
    linearly dependent elements through the sample second-moment matrix at β.
    """
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    if ds.n < 2:
        raise InsufficientSampleError(f"basis reduction needs at least 2 subjects, got {ds.n}")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (ds.p,):
        raise DataError(f"beta must have length {ds.p}, got shape {beta.shape}")

    tags = full_tags(ds.layout, ds.K)
    unique_mask = structural_duplicates(tags, ds.K)
    survivors = [t for t, keep in zip(tags, unique_mask) if keep]
    duplicates = tuple(t for t, keep in zip(tags, unique_mask) if not keep)

    system = full_moment_system(ds, sigma).restrict(np.flatnonzero(unique_mask))
    gram = system.second_moment(beta)
    if not np.all(np.isfinite(gram)):
        raise NumericalError("non-finite auxiliary second-moment matrix")

    accepted = ordered_pivoted_cholesky(gram, rank_tol)
    retained = tuple(t for t, ok in zip(survivors, accepted) if ok)
    dependent = tuple(t for t, ok in zip(survivors, accepted) if not ok)
    q, p = len(retained), ds.p

    if q < p:
        raise IdentifiabilityError(
            f"only {q} independent estimating functions for {p} parameters; "
            f"check for collinear or constant covariates")
    if ds.n < q:
        raise InsufficientSampleError(f"{q} estimating functions need at least {q} subjects, got {ds.n}")

    kept_gram = gram[np.ix_(accepted, accepted)]
    try:
        cho_factor(kept_gram, lower=True)
    except LinAlgError as exc:
        raise NumericalError(f"retained second-moment matrix is not positive definite: {exc}") from exc

    basis = AuxiliaryBasis(retained, duplicates, dependent, float(np.linalg.cond(kept_gram)), ds.layout, ds.K)
    logger.debug(f"Auxiliary basis: full={len(tags)}, after duplicates={len(survivors)}, q={q}, "
                 f"condition={basis.gram_condition:.3e}")
    return basis


def lin_system(ds: LongitudinalDataset, sigma: WorkingCovariance) -> MomentSystem:
    """
    Cross-replicate estimating function U_i(β) = Σ_{k1≠k2} W(k1)ᵀΣ⁻¹(Y - W(k2)β),
    the sum of the full auxiliary blocks over replicate pairs.
    """
    full = full_moment_system(ds, sigma)
    n, p = full.n, ds.p
    blocks = full.q // p
    return MomentSystem(full.offsets.reshape(n, blocks, p).sum(axis=1),
                        full.slopes.reshape(n, blocks, p, p).sum(axis=1))


def solve_exact(system: MomentSystem) -> np.ndarray:
    """Root of Σ_i g_i(β) = 0 for a just-identified system"""
    if system.q != system.p:
        raise IdentifiabilityError(f"exact solve needs q = p, got q={system.q}, p={system.p}")
    A = system.jacobian_sum()
    b = -system.offsets.sum(axis=0)
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise NumericalError("non-finite estimating equation")
    try:
        beta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise IdentifiabilityError(f"estimating equation is singular (collinear covariates?): {exc}") from exc
    if np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
        raise IdentifiabilityError("estimating equation is numerically singular (collinear covariates?)")
    return beta
