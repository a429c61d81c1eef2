"""Scale-invariant cosine distance and Jensen-Shannon divergence.

Every objective term is built from two measures: expression vectors are
compared with the square-root cosine distance (a metric, indifferent to
positive rescaling of either argument) and composition vectors with the
base-2 Jensen-Shannon divergence (symmetric, bounded by 1, finite on
disjoint supports).
"""

from __future__ import annotations

import numpy as np
from scipy.special import rel_entr

from .errors import DegenerateInputError, DimensionMismatchError

LN2 = np.log(2.0)

# Vectors with a norm below this are treated as zero for the cosine
# convention; distances against them are defined as the maximum 1.
ZERO_NORM = 0.0


def cosine_distance(a, b) -> float:
    """sqrt(1 - cos(a, b)).

    Computed as ||a/||a|| - b/||b|||| / sqrt(2), which is exact for equal
    inputs and stable near 0. Returns 1.0 if either vector has zero norm.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DimensionMismatchError(
            f"cosine_distance expects two equal-length vectors, got shapes {a.shape} and {b.shape}"
        )
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na <= ZERO_NORM or nb <= ZERO_NORM:
        return 1.0
    diff = a / na - b / nb
    return float(np.sqrt(0.5 * (diff @ diff)))


def cosine_distance_rows(A, B) -> np.ndarray:
    """Row-paired sqrt-cosine distances between two equally shaped matrices.

    Rows with zero norm in either matrix yield 1.0.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise DimensionMismatchError(f"shape mismatch: {A.shape} vs {B.shape}")
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    ok = (na > ZERO_NORM) & (nb > ZERO_NORM)
    out = np.ones(A.shape[0])
    if np.any(ok):
        U = A[ok] / na[ok, None]
        V = B[ok] / nb[ok, None]
        out[ok] = np.sqrt(0.5 * np.sum((U - V) ** 2, axis=1))
    return out


def cosine_similarity_matrix(A, B) -> np.ndarray:
    """Plain cosine similarity between all rows of A and all rows of B.

    Zero-norm rows produce similarity 0 against everything.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    na = np.where(na > ZERO_NORM, na, 1.0)
    nb = np.where(nb > ZERO_NORM, nb, 1.0)
    sim = (A / na[:, None]) @ (B / nb[:, None]).T
    return np.clip(sim, -1.0, 1.0)


def js_divergence(p, q) -> float:
    """Base-2 Jensen-Shannon divergence of two non-negative vectors.

    Both arguments are L1-normalized before evaluation, so they may be
    given as unnormalized compositions. 0*log(0) counts as 0.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 1 or q.ndim != 1 or p.shape != q.shape:
        raise DimensionMismatchError(
            f"js_divergence expects two equal-length vectors, got shapes {p.shape} and {q.shape}"
        )
    sp = p.sum()
    sq = q.sum()
    if sp <= 0 or sq <= 0:
        raise DegenerateInputError("js_divergence requires vectors with positive sum")
    p = p / sp
    q = q / sq
    m = 0.5 * (p + q)
    return float((rel_entr(p, m).sum() + rel_entr(q, m).sum()) / (2.0 * LN2))


def js_divergence_columns(P, Q) -> np.ndarray:
    """Column-paired base-2 JS divergences between two equally shaped matrices.

    Columns are L1-normalized first; a zero-sum column is rejected.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise DimensionMismatchError(f"shape mismatch: {P.shape} vs {Q.shape}")
    sp = P.sum(axis=0)
    sq = Q.sum(axis=0)
    if np.any(sp <= 0) or np.any(sq <= 0):
        raise DegenerateInputError("js_divergence_columns requires columns with positive sum")
    Pn = P / sp
    Qn = Q / sq
    M = 0.5 * (Pn + Qn)
    return (rel_entr(Pn, M).sum(axis=0) + rel_entr(Qn, M).sum(axis=0)) / (2.0 * LN2)
