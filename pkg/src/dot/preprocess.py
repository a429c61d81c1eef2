"""Reference centroid construction, gene alignment, and the spatial pair set.

The sub-clustering step refines each population into up to ``kappa``
k-means sub-clusters so that heterogeneous populations are represented by
several centroids. All randomized steps consume a single seeded generator
in a documented order, which keeps runs bit-reproducible:

* populations are processed in order of first appearance in the labels,
* k-means++ draws one uniform index for the first center, then one
  d2-weighted choice per additional center,
* Lloyd iterations themselves are deterministic (ties to the smallest
  cluster index, empty clusters keep their previous center).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DegenerateInputError, DimensionMismatchError, DotWarning
from .types import GeneAxis, ReferenceProfiles, SpatialDataset, SpatialPairSet

KMEANS_MAX_ITER = 100
KMEANS_REL_TOL = 1e-6
NEIGHBOR_COUNT = 8
DISTANCE_PERCENTILE = 90.0
SIMILARITY_FLOOR = 0.6


@dataclass(frozen=True)
class CellTable:
    """Per-cell expressions with optional population labels."""

    expressions: np.ndarray
    labels: tuple[str, ...] | None = None
    gene_ids: tuple[str, ...] | None = None
    cell_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        expr = np.asarray(self.expressions, dtype=float)
        if expr.ndim != 2:
            raise DimensionMismatchError("cell expressions must be a 2-d matrix")
        if np.any(expr < 0):
            raise DegenerateInputError("cell expressions must be non-negative")
        object.__setattr__(self, "expressions", expr)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != expr.shape[0]:
                raise DimensionMismatchError("one label per cell is required")
            if len(labels) == 0:
                raise DegenerateInputError("label set must be non-empty")
            object.__setattr__(self, "labels", labels)
        if self.cell_ids is not None:
            ids = tuple(str(x) for x in self.cell_ids)
            if len(set(ids)) != len(ids):
                raise DegenerateInputError("duplicate cell ids")
            object.__setattr__(self, "cell_ids", ids)

    @property
    def n_cells(self) -> int:
        return self.expressions.shape[0]


def _ordered_populations(labels):
    seen: dict[str, None] = {}
    for lab in labels:
        seen.setdefault(lab, None)
    return list(seen)


def compute_centroids(cells: CellTable) -> ReferenceProfiles:
    """Arithmetic mean expression per population, one centroid per label."""
    if cells.labels is None:
        raise ConfigurationError("compute_centroids requires per-cell labels")
    labels = np.asarray(cells.labels)
    populations = _ordered_populations(cells.labels)
    rows = []
    for pop in populations:
        members = cells.expressions[labels == pop]
        if members.shape[0] == 0:
            raise DegenerateInputError(f"population {pop!r} has no cells")
        rows.append(members.mean(axis=0))
    return ReferenceProfiles(np.vstack(rows), populations)


def subcluster(cells: CellTable, kappa: int = 10, min_frac: float = 0.01,
               seed: int = 0) -> ReferenceProfiles:
    """Refine each population into up to ``kappa`` k-means sub-clusters.

    Sub-clusters holding fewer than ``min_frac`` of their population's cells
    are dropped. Populations smaller than ``kappa`` use one cluster per cell.
    ``kappa=1`` reduces to ``compute_centroids``.
    """
    if cells.labels is None:
        raise ConfigurationError("subcluster requires per-cell labels")
    if kappa < 1:
        raise DegenerateInputError("kappa must be at least 1")
    if not 0.0 <= min_frac < 1.0:
        raise DegenerateInputError("min_frac must lie in [0, 1)")
    labels = np.asarray(cells.labels)
    rng = np.random.default_rng(seed)
    rows = []
    row_pops = []
    for pop in _ordered_populations(cells.labels):
        members = cells.expressions[labels == pop]
        k = min(kappa, members.shape[0])
        centers, assign = _lloyd_kmeans(members, k, rng)
        counts = np.bincount(assign, minlength=k)
        keep = (counts > 0) & (counts >= min_frac * members.shape[0])
        for idx in np.flatnonzero(keep):
            rows.append(members[assign == idx].mean(axis=0))
            row_pops.append(pop)
    return ReferenceProfiles(np.vstack(rows), row_pops)


def _kmeanspp_centers(X, k, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return X[np.array(chosen)].copy()


def _lloyd_kmeans(X, k, rng):
    """Lloyd iterations from a k-means++ start; returns (centers, assignment)."""
    centers = _kmeanspp_centers(X, k, rng)
    assign = None
    prev_inertia = np.inf
    x2 = (X**2).sum(axis=1)
    for _ in range(KMEANS_MAX_ITER):
        c2 = (centers**2).sum(axis=1)
        d2 = np.clip(x2[:, None] + c2[None, :] - 2.0 * (X @ centers.T), 0.0, None)
        new_assign = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(X.shape[0]), new_assign].sum())
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for idx in range(k):
            mask = assign == idx
            if np.any(mask):
                centers[idx] = X[mask].mean(axis=0)
        if prev_inertia - inertia <= KMEANS_REL_TOL * max(prev_inertia, 1e-300):
            break
        prev_inertia = inertia
    return centers, assign


def aggregate_to_populations(Y, population_of):
    """Sum sub-cluster rows of Y into population rows.

    Returns ``(matrix, population_labels)`` with populations ordered by first
    appearance in ``population_of``. Column sums are preserved.
    """
    Y = np.asarray(Y, dtype=float)
    population_of = [str(p) for p in population_of]
    if len(population_of) != Y.shape[0]:
        raise DimensionMismatchError("population mapping must cover every Y row")
    populations = _ordered_populations(population_of)
    index = {lab: k for k, lab in enumerate(populations)}
    codes = np.array([index[lab] for lab in population_of])
    out = np.zeros((len(populations), Y.shape[1]))
    np.add.at(out, codes, Y)
    return out, populations


def neighbor_distance_threshold(coordinates) -> float:
    """90th percentile of each spot's distances to its 8 nearest neighbors."""
    coords = np.asarray(coordinates, dtype=float)
    if coords.ndim != 2 or coords.shape[0] < 2:
        raise DegenerateInputError("at least two spots with coordinates are required")
    n = coords.shape[0]
    k = NEIGHBOR_COUNT
    if n < NEIGHBOR_COUNT + 1:
        warnings.warn(
            f"only {n} spots available; using all pairwise distances for the threshold",
            DotWarning,
        )
        k = n - 1
    tree = cKDTree(coords)
    dists, _ = tree.query(coords, k=k + 1)
    return float(np.percentile(dists[:, 1:], DISTANCE_PERCENTILE))


def similarity_cutoff(weights, spot_count: int) -> float:
    """Smallest similarity keeping at most ``spot_count`` pairs, floored at 0.6.

    When ties straddle the cut the threshold moves up to the next distinct
    weight, so the pair budget is never exceeded.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.size == 0:
        return SIMILARITY_FLOOR
    vals, counts = np.unique(weights, return_counts=True)
    count_at_least = counts[::-1].cumsum()[::-1]
    qualifying = count_at_least <= spot_count
    if np.any(qualifying):
        base = float(vals[int(np.argmax(qualifying))])
    else:
        base = float(np.nextafter(vals[-1], np.inf))
    return max(SIMILARITY_FLOOR, base)


def build_spatial_pairs(spatial: SpatialDataset) -> SpatialPairSet:
    """Assemble the pair set: adjacency threshold, full-gene similarity, cutoff."""
    d_bar = neighbor_distance_threshold(spatial.coordinates)
    tree = cKDTree(spatial.coordinates)
    cand = tree.query_pairs(r=d_bar, output_type="ndarray")
    if cand.shape[0] == 0:
        return SpatialPairSet(np.zeros(0, int), np.zeros(0, int), np.zeros(0),
                              d_bar, SIMILARITY_FLOOR)
    order = np.lexsort((cand[:, 1], cand[:, 0]))
    cand = cand[order]
    i, j = cand[:, 0], cand[:, 1]

    X = spatial.expressions
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    Xn = X / safe[:, None]
    w = np.einsum("pg,pg->p", Xn[i], Xn[j])
    w = np.where((norms[i] > 0) & (norms[j] > 0), np.clip(w, -1.0, 1.0), 0.0)

    w_bar = similarity_cutoff(w, spatial.n_spots)
    keep = w >= w_bar
    return SpatialPairSet(i[keep], j[keep], w[keep], d_bar, w_bar)


def align_genes(ref_genes, spatial_genes):
    """Ordered shared-gene intersection plus column selectors for both sides.

    Returns ``(GeneAxis, ref_columns, spatial_columns)``; the shared order
    follows the reference gene list.
    """
    ref_genes = [str(g) for g in ref_genes]
    spatial_genes = [str(g) for g in spatial_genes]
    if len(set(ref_genes)) != len(ref_genes) or len(set(spatial_genes)) != len(spatial_genes):
        raise DegenerateInputError("gene identifiers must be unique within each dataset")
    spatial_index = {g: k for k, g in enumerate(spatial_genes)}
    shared = [g for g in ref_genes if g in spatial_index]
    if not shared:
        raise ConfigurationError("no shared genes between reference and spatial data")
    shared_set = set(shared)
    spatial_only = tuple(g for g in spatial_genes if g not in shared_set)
    axis = GeneAxis(tuple(shared), spatial_only)
    ref_index = {g: k for k, g in enumerate(ref_genes)}
    ref_cols = np.array([ref_index[g] for g in shared], dtype=int)
    spatial_cols = np.array([spatial_index[g] for g in shared], dtype=int)
    return axis, ref_cols, spatial_cols
