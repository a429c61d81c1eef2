"""Evaluation metrics: accuracy, Brier score, smoothed-label JS, grid maps."""

from __future__ import annotations

import numpy as np

from .distances import js_divergence_columns
from .errors import DegenerateInputError, DimensionMismatchError
from .types import TransferMap, _as_float_matrix

COLUMN_SUM_TOL = 1e-9
KERNEL_BLOCK = 512


class GroundTruth:
    """True per-spot memberships: one-hot columns or mixture proportions."""

    def __init__(self, P):
        P = _as_float_matrix(P, "ground truth")
        if np.any(P < 0):
            raise DegenerateInputError("ground-truth memberships must be non-negative")
        sums = P.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > COLUMN_SUM_TOL):
            raise DegenerateInputError("ground-truth columns must sum to 1")
        self.P = P

    @property
    def is_one_hot(self) -> bool:
        return bool(np.all((self.P == 0.0) | (self.P == 1.0)))

    @property
    def labels(self) -> np.ndarray:
        """Column-wise label index (argmax, ties to the smallest index)."""
        return np.argmax(self.P, axis=0)


class SmoothedLabels:
    """Kernel-smoothed membership distributions and the kernel width used."""

    def __init__(self, P_tilde, sigma: float):
        P_tilde = _as_float_matrix(P_tilde, "smoothed labels")
        sums = P_tilde.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > COLUMN_SUM_TOL):
            raise DegenerateInputError("smoothed columns must sum to 1")
        self.P_tilde = P_tilde
        self.sigma = float(sigma)


def _prediction_matrix(Y) -> np.ndarray:
    values = Y.values if isinstance(Y, TransferMap) else np.asarray(Y, dtype=float)
    if values.ndim != 2:
        raise DimensionMismatchError("predictions must be a categories x spots matrix")
    return values


def _normalized_columns(values: np.ndarray) -> np.ndarray:
    sums = values.sum(axis=0)
    out = np.empty_like(values)
    ok = sums > 0
    out[:, ok] = values[:, ok] / sums[ok]
    # A spot with no mass carries no information: score it as uniform.
    out[:, ~ok] = 1.0 / values.shape[0]
    return out


def accuracy(Y, truth: GroundTruth) -> float:
    """Fraction of spots whose argmax category matches the true label."""
    values = _prediction_matrix(Y)
    if not truth.is_one_hot:
        raise DegenerateInputError("accuracy requires one-hot ground truth")
    if values.shape != truth.P.shape:
        raise DimensionMismatchError(f"shape mismatch: {values.shape} vs {truth.P.shape}")
    return float(np.mean(np.argmax(values, axis=0) == truth.labels))


def brier_score(Y, truth: GroundTruth) -> float:
    """Mean squared error between column-normalized predictions and truth."""
    values = _prediction_matrix(Y)
    if values.shape != truth.P.shape:
        raise DimensionMismatchError(f"shape mismatch: {values.shape} vs {truth.P.shape}")
    diff = _normalized_columns(values) - truth.P
    return float((diff**2).sum() / values.shape[1])


def smooth_labels(truth: GroundTruth, coordinates, distance_threshold: float) -> SmoothedLabels:
    """Gaussian-kernel average of the true memberships over neighboring spots.

    The kernel width is half the adjacency distance threshold and the self
    term is included, so isolated spots keep their own label distribution.
    """
    if distance_threshold <= 0:
        raise DegenerateInputError("distance threshold must be positive")
    coords = np.asarray(coordinates, dtype=float)
    P = truth.P
    if coords.shape[0] != P.shape[1]:
        raise DimensionMismatchError("one coordinate per spot is required")
    sigma = 0.5 * distance_threshold
    out = np.empty_like(P)
    sq = (coords**2).sum(axis=1)
    for start in range(0, coords.shape[0], KERNEL_BLOCK):
        stop = min(start + KERNEL_BLOCK, coords.shape[0])
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * coords[start:stop] @ coords.T
        K = np.exp(-np.clip(d2, 0.0, None) / (2.0 * sigma**2))
        out[:, start:stop] = (P @ K.T) / K.sum(axis=1)[None, :]
    return SmoothedLabels(out, sigma)


def spatial_js(Y, smoothed: SmoothedLabels) -> float:
    """Mean per-spot base-2 JS divergence against the smoothed memberships."""
    values = _prediction_matrix(Y)
    if values.shape != smoothed.P_tilde.shape:
        raise DimensionMismatchError(f"shape mismatch: {values.shape} vs {smoothed.P_tilde.shape}")
    return float(js_divergence_columns(values, smoothed.P_tilde).mean())


def mean_js(Y, truth: GroundTruth) -> float:
    """Mean per-spot base-2 JS divergence against the raw ground truth."""
    values = _prediction_matrix(Y)
    if values.shape != truth.P.shape:
        raise DimensionMismatchError(f"shape mismatch: {values.shape} vs {truth.P.shape}")
    return float(js_divergence_columns(values, truth.P).mean())


def grid_map_similarity(values_a, coords_a, values_b, coords_b, grid: int = 10) -> np.ndarray:
    """Per-gene cosine similarity of two expression maps on a shared k x k grid.

    Each gene's values are summed within grid tiles over the combined
    bounding box; the returned vector holds one similarity per gene, with 0
    for genes whose tiled map is all zero on either side.
    """
    if grid < 1:
        raise DegenerateInputError("grid must have at least one tile per side")
    A = _as_float_matrix(values_a, "map A")
    B = _as_float_matrix(values_b, "map B")
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError("both maps must cover the same genes")
    ca = np.asarray(coords_a, dtype=float)
    cb = np.asarray(coords_b, dtype=float)
    if ca.shape != (A.shape[0], 2) or cb.shape != (B.shape[0], 2):
        raise DimensionMismatchError("coordinates must be n x 2 and match their map")

    both = np.vstack([ca, cb])
    lo = both.min(axis=0)
    hi = both.max(axis=0)
    if np.any(hi - lo == 0):
        raise DegenerateInputError("bounding box has zero area")

    ta = _tile_sums(A, ca, lo, hi, grid)
    tb = _tile_sums(B, cb, lo, hi, grid)
    na = np.linalg.norm(ta, axis=0)
    nb = np.linalg.norm(tb, axis=0)
    ok = (na > 0) & (nb > 0)
    sims = np.zeros(A.shape[1])
    sims[ok] = np.einsum("tg,tg->g", ta[:, ok], tb[:, ok]) / (na[ok] * nb[ok])
    return np.clip(sims, -1.0, 1.0)


def _tile_sums(values, coords, lo, hi, grid):
    width = (hi - lo) / grid
    idx = np.floor((coords - lo) / width).astype(int)
    np.clip(idx, 0, grid - 1, out=idx)
    flat = idx[:, 0] * grid + idx[:, 1]
    out = np.zeros((grid * grid, values.shape[1]))
    np.add.at(out, flat, values)
    return out
