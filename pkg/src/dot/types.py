"""Domain types: reference profiles, spatial data, transfer maps and weights.

Conventions used throughout the package:

* reference centroids are rows of a ``|categories| x |genes|`` matrix,
* spatial expressions are rows of a ``|spots| x |genes|`` matrix,
* a transfer map is ``|categories| x |spots|``; its column i holds the
  category abundances assigned to spot i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .distances import cosine_similarity_matrix
from .errors import DegenerateInputError, DimensionMismatchError

NORM_CACHE_RTOL = 1e-12
COLUMN_SUM_TOL = 1e-9


def _as_float_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a 2-d matrix, got ndim={arr.ndim}")
    return arr


def _unique_in_order(labels: Sequence[str]) -> list[str]:
    seen: dict[str, None] = {}
    for lab in labels:
        if lab not in seen:
            seen[lab] = None
    return list(seen)


@dataclass(frozen=True)
class GeneAxis:
    """Shared genes plus the genes measured only in the spatial data."""

    shared_genes: tuple[str, ...]
    spatial_only_genes: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.shared_genes) < 1:
            raise DegenerateInputError("at least one shared gene is required")
        if len(set(self.shared_genes)) != len(self.shared_genes):
            raise DegenerateInputError("shared gene identifiers must be unique")
        if len(set(self.spatial_only_genes)) != len(self.spatial_only_genes):
            raise DegenerateInputError("spatial-only gene identifiers must be unique")
        if set(self.shared_genes) & set(self.spatial_only_genes):
            raise DegenerateInputError("shared and spatial-only gene lists overlap")

    @property
    def n_shared(self) -> int:
        return len(self.shared_genes)


class ReferenceProfiles:
    """Centroid expression matrix with a category-to-population mapping.

    Rows are sub-cluster (or population) centroids over the shared genes.
    ``population_of[c]`` is the population label behind row c; for plain
    per-population centroids it is the population label itself.
    """

    def __init__(self, centroids, population_of: Sequence[str], row_norms=None):
        centroids = _as_float_matrix(centroids, "centroids")
        if np.any(centroids < 0):
            raise DegenerateInputError("centroid expressions must be non-negative")
        norms = np.linalg.norm(centroids, axis=1)
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise DegenerateInputError(f"centroid row {bad} is entirely zero")
        if len(population_of) != centroids.shape[0]:
            raise DimensionMismatchError(
                f"population_of has {len(population_of)} entries for {centroids.shape[0]} centroid rows"
            )
        if row_norms is not None:
            row_norms = np.asarray(row_norms, dtype=float)
            if row_norms.shape != norms.shape or np.any(
                np.abs(row_norms - norms) > NORM_CACHE_RTOL * np.maximum(norms, 1.0)
            ):
                raise DegenerateInputError("cached row norms disagree with recomputed norms")
        self.centroids = centroids
        self.population_of = tuple(str(p) for p in population_of)
        self.row_norms = norms

    @property
    def n_categories(self) -> int:
        return self.centroids.shape[0]

    @property
    def n_genes(self) -> int:
        return self.centroids.shape[1]

    @cached_property
    def populations(self) -> tuple[str, ...]:
        """Population labels in order of first appearance."""
        return tuple(_unique_in_order(self.population_of))

    @cached_property
    def population_codes(self) -> np.ndarray:
        """Integer population index per centroid row, following ``populations``."""
        index = {lab: k for k, lab in enumerate(self.populations)}
        return np.array([index[lab] for lab in self.population_of], dtype=int)


class SpatialDataset:
    """Spot expressions over the full spatial gene set, plus coordinates."""

    def __init__(self, expressions, coordinates, shared_columns, spot_ids=None, gene_ids=None):
        expressions = _as_float_matrix(expressions, "expressions")
        if np.any(expressions < 0):
            raise DegenerateInputError("spot expressions must be non-negative")
        coordinates = np.asarray(coordinates, dtype=float)
        if coordinates.ndim != 2 or coordinates.shape[1] not in (2, 3):
            raise DimensionMismatchError("coordinates must be an n x 2 or n x 3 matrix")
        if coordinates.shape[0] != expressions.shape[0]:
            raise DimensionMismatchError(
                f"{coordinates.shape[0]} coordinates for {expressions.shape[0]} spots"
            )
        shared_columns = np.asarray(shared_columns, dtype=int)
        if shared_columns.ndim != 1 or shared_columns.size < 1:
            raise DegenerateInputError("shared_columns must be a non-empty index vector")
        if shared_columns.min() < 0 or shared_columns.max() >= expressions.shape[1]:
            raise DimensionMismatchError("shared_columns indexes outside the gene axis")
        if len(np.unique(shared_columns)) != shared_columns.size:
            raise DegenerateInputError("shared_columns contains duplicates")
        self.expressions = expressions
        self.coordinates = coordinates
        self.shared_columns = shared_columns
        self.spot_ids = None if spot_ids is None else tuple(str(s) for s in spot_ids)
        self.gene_ids = None if gene_ids is None else tuple(str(g) for g in gene_ids)
        if self.spot_ids is not None and len(self.spot_ids) != expressions.shape[0]:
            raise DimensionMismatchError("spot_ids length does not match expressions")
        if self.gene_ids is not None and len(self.gene_ids) != expressions.shape[1]:
            raise DimensionMismatchError("gene_ids length does not match expressions")

    @property
    def n_spots(self) -> int:
        return self.expressions.shape[0]

    @cached_property
    def shared_expressions(self) -> np.ndarray:
        """Spot expressions restricted to the shared genes."""
        return np.ascontiguousarray(self.expressions[:, self.shared_columns])


class TransferMap:
    """Non-negative category-by-spot assignment with bounded spot sizes.

    Column sums must lie in [1, n_i] per spot, within a small tolerance.
    """

    def __init__(self, values, spot_bounds):
        values = _as_float_matrix(values, "transfer map")
        if np.any(values < 0):
            raise DegenerateInputError("transfer map entries must be non-negative")
        bounds = np.broadcast_to(np.asarray(spot_bounds, dtype=float), (values.shape[1],)).copy()
        if np.any(bounds < 1):
            raise DegenerateInputError("spot size bounds must be at least 1")
        sums = values.sum(axis=0)
        if np.any(sums < 1 - COLUMN_SUM_TOL) or np.any(sums > bounds + COLUMN_SUM_TOL):
            bad = int(np.flatnonzero((sums < 1 - COLUMN_SUM_TOL) | (sums > bounds + COLUMN_SUM_TOL))[0])
            raise DegenerateInputError(
                f"column {bad} sums to {sums[bad]:.12g}, outside [1, {bounds[bad]:.12g}]"
            )
        self.values = values
        self.spot_bounds = bounds

    @property
    def row_sums(self) -> np.ndarray:
        """Total abundance per category across all spots."""
        return self.values.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        """Realized size of each spot."""
        return self.values.sum(axis=0)


@dataclass(frozen=True)
class ObjectiveWeights:
    """Penalty weights, the sparsity blend theta, and the sparsity scale.

    ``sparsity_scale`` divides the linear blend component per spot; it is
    normally the spot-size bound and defaults to 1 (the single-cell case).
    """

    lambda_c: float = 0.0
    lambda_g: float = 0.0
    lambda_s: float = 0.0
    lambda_a: float = 0.0
    theta: float = 0.0
    sparsity_scale: float | np.ndarray = 1.0

    def __post_init__(self):
        for name in ("lambda_c", "lambda_g", "lambda_s", "lambda_a"):
            if getattr(self, name) < 0:
                raise DegenerateInputError(f"{name} must be non-negative")
        if not 0.0 <= self.theta <= 1.0:
            raise DegenerateInputError("theta must lie in [0, 1]")
        if np.any(np.asarray(self.sparsity_scale, dtype=float) <= 0):
            raise DegenerateInputError("sparsity_scale must be positive")


@dataclass(frozen=True)
class AbundancePrior:
    """Expected per-population abundances; disabled priors contribute nothing."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    enabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.enabled:
            if np.any(self.values < 0):
                raise DegenerateInputError("prior abundances must be non-negative")
            if self.values.sum() <= 0:
                raise DegenerateInputError("an enabled prior must have positive total abundance")

    @staticmethod
    def disabled() -> "AbundancePrior":
        return AbundancePrior(np.zeros(0), enabled=False)


class SpatialPairSet:
    """Pairs of adjacent, expression-similar spots with their similarity weights."""

    def __init__(self, i, j, weights, distance_threshold: float, similarity_threshold: float):
        i = np.asarray(i, dtype=int)
        j = np.asarray(j, dtype=int)
        weights = np.asarray(weights, dtype=float)
        if not (i.shape == j.shape == weights.shape) or i.ndim != 1:
            raise DimensionMismatchError("pair arrays must be equal-length vectors")
        if np.any(i >= j):
            raise DegenerateInputError("pairs must be stored with i < j")
        if i.size and len({(a, b) for a, b in zip(i.tolist(), j.tolist())}) != i.size:
            raise DegenerateInputError("duplicate pairs")
        self.i = i
        self.j = j
        self.weights = weights
        self.distance_threshold = float(distance_threshold)
        self.similarity_threshold = float(similarity_threshold)

    def __len__(self) -> int:
        return self.i.size

    @staticmethod
    def empty() -> "SpatialPairSet":
        return SpatialPairSet(np.zeros(0, int), np.zeros(0, int), np.zeros(0), 0.0, 0.0)


class TransferProblem:
    """A fully assembled instance: reference, spatial data, pairs, prior.

    Caches the quantities every objective/gradient evaluation needs (shared
    expressions, row norms, the category-to-spot distance table).
    """

    def __init__(self, ref: ReferenceProfiles, spatial: SpatialDataset,
                 pairs: SpatialPairSet | None = None, prior: AbundancePrior | None = None):
        if ref.n_genes != spatial.shared_columns.size:
            raise DimensionMismatchError(
                f"reference has {ref.n_genes} genes but spatial shared set has {spatial.shared_columns.size}"
            )
        self.ref = ref
        self.spatial = spatial
        self.pairs = pairs if pairs is not None else SpatialPairSet.empty()
        self.prior = prior if prior is not None else AbundancePrior.disabled()
        if self.prior.enabled and self.prior.values.size != len(ref.populations):
            raise DimensionMismatchError(
                f"prior covers {self.prior.values.size} populations, reference has {len(ref.populations)}"
            )

    @property
    def n_categories(self) -> int:
        return self.ref.n_categories

    @property
    def n_spots(self) -> int:
        return self.spatial.n_spots

    @property
    def n_shared_genes(self) -> int:
        return self.ref.n_genes

    @cached_property
    def spot_shared(self) -> np.ndarray:
        return self.spatial.shared_expressions

    @cached_property
    def spot_norms(self) -> np.ndarray:
        return np.linalg.norm(self.spot_shared, axis=1)

    @cached_property
    def gene_column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.spot_shared, axis=0)

    @cached_property
    def category_spot_distance(self) -> np.ndarray:
        """d_cos between every centroid and every spot; |categories| x |spots|."""
        sim = cosine_similarity_matrix(self.ref.centroids, self.spot_shared)
        return np.sqrt(np.clip(1.0 - sim, 0.0, None))

    def nearest_category(self) -> np.ndarray:
        """Index of the closest centroid per spot (ties to the smallest index)."""
        return np.argmin(self.category_spot_distance, axis=0)
