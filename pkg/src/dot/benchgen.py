"""Deterministic synthetic benchmarks: planted instances, pooling, noise.

Ground truth is constructed, not inferred: planted instances draw their
spots as integer mixtures of well-separated reference centroids, and the
pooling generator aggregates positioned, labeled cells into grid tiles
whose composition is the exact label frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError
from .metrics import GroundTruth
from .types import ReferenceProfiles, SpatialDataset

CENTROID_DENSITY = 0.25
CENTROID_GAMMA_SHAPE = 2.0
REJECTION_BUDGET_PER_POPULATION = 200


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative uniform noise X * (1 + U(-phi, phi)), seeded."""

    phi: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.phi < 1.0:
            raise DegenerateInputError("phi must lie in [0, 1) so multipliers stay positive")


@dataclass
class PooledDataset:
    """Grid-pooled cells: tile sums, centers, exact composition, counts."""

    expressions: np.ndarray
    coordinates: np.ndarray
    composition: np.ndarray
    cell_counts: np.ndarray
    populations: tuple[str, ...]
    tile_ids: tuple[str, ...]

    @property
    def n_tiles(self) -> int:
        return self.expressions.shape[0]


def pool_to_grid(expressions, coordinates, labels, tile_length: float) -> PooledDataset:
    """Aggregate positioned cells into square tiles of the given side length.

    The grid is anchored at the bounding-box minimum with half-open tiles,
    so each cell lands in exactly one tile; empty tiles are dropped. Tile
    expressions are plain sums, compositions are label frequencies.
    """
    if tile_length <= 0:
        raise DegenerateInputError("tile_length must be positive")
    X = np.asarray(expressions, dtype=float)
    coords = np.asarray(coordinates, dtype=float)
    labels = [str(x) for x in labels]
    if X.ndim != 2 or coords.ndim != 2 or coords.shape[0] != X.shape[0]:
        raise DimensionMismatchError("expressions and coordinates must cover the same cells")
    if len(labels) != X.shape[0]:
        raise DimensionMismatchError("one label per cell is required")

    lo = coords.min(axis=0)
    idx = np.floor((coords - lo) / tile_length).astype(int)
    keys = [tuple(row) for row in idx]
    occupied = sorted(set(keys))
    tile_index = {key: t for t, key in enumerate(occupied)}
    cell_tile = np.array([tile_index[key] for key in keys])

    populations = list(dict.fromkeys(labels))
    pop_index = {p: k for k, p in enumerate(populations)}
    cell_pop = np.array([pop_index[lab] for lab in labels])

    n_tiles = len(occupied)
    pooled = np.zeros((n_tiles, X.shape[1]))
    np.add.at(pooled, cell_tile, X)
    counts = np.bincount(cell_tile, minlength=n_tiles)
    comp = np.zeros((len(populations), n_tiles))
    np.add.at(comp, (cell_pop, cell_tile), 1.0)
    comp /= counts[None, :]

    centers = lo[None, :] + (np.array(occupied, dtype=float) + 0.5) * tile_length
    tile_ids = tuple(f"tile_{a}_{b}" for a, b in occupied)
    return PooledDataset(pooled, centers, comp, counts, tuple(populations), tile_ids)


def inject_noise(X, spec: NoiseSpec) -> np.ndarray:
    """Multiply every entry by an independent 1 + U(-phi, phi) factor."""
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(spec.seed)
    beta = rng.uniform(-spec.phi, spec.phi, size=X.shape)
    return X * (1.0 + beta)


def mask_genes(X, gene_ids, count: int):
    """Keep the first ``count`` genes in the dataset's stored order."""
    X = np.asarray(X, dtype=float)
    gene_ids = tuple(str(g) for g in gene_ids)
    if len(gene_ids) != X.shape[1]:
        raise DimensionMismatchError("one gene id per column is required")
    if not 1 <= count <= len(gene_ids):
        raise DegenerateInputError(f"count must lie in [1, {len(gene_ids)}], got {count}")
    return X[:, :count].copy(), gene_ids[:count]


def synth_planted(populations: int, genes: int, spots: int,
                  cells_per_spot: tuple[int, int] = (1, 1),
                  separation: float = 0.5,
                  noise: NoiseSpec = NoiseSpec(),
                  seed: int = 0):
    """Planted-mixture instance with known composition per spot.

    Centroids are sparse non-negative vectors rejection-sampled until all
    pairwise cosine similarities stay at or below ``separation``. Each spot
    draws a cell count from ``cells_per_spot`` (inclusive), a composition
    from a flat Dirichlet realized into integer cell counts, and its
    expression is the corresponding centroid mixture with multiplicative
    noise. Spots sit on a unit grid so spatial neighborhoods are meaningful.

    Returns ``(ReferenceProfiles, SpatialDataset, GroundTruth)``.
    """
    if not 0.0 < separation < 1.0:
        raise DegenerateInputError("separation must lie in (0, 1)")
    lo, hi = int(cells_per_spot[0]), int(cells_per_spot[1])
    if lo < 1 or hi < lo:
        raise DegenerateInputError("cells_per_spot must be an increasing range starting at 1 or more")
    rng = np.random.default_rng(seed)

    centroids = _sample_separated_centroids(populations, genes, separation, rng)
    pop_labels = [f"pop{c:02d}" for c in range(populations)]

    counts = rng.integers(lo, hi + 1, size=spots)
    mixtures = np.zeros((spots, populations))
    for i in range(spots):
        pi = rng.dirichlet(np.ones(populations))
        mixtures[i] = rng.multinomial(counts[i], pi)
    expressions = inject_noise(mixtures @ centroids, noise)

    side = int(np.ceil(np.sqrt(spots)))
    grid = np.arange(spots)
    coords = np.column_stack([(grid % side).astype(float), (grid // side).astype(float)])

    ref = ReferenceProfiles(centroids, pop_labels)
    spatial = SpatialDataset(
        expressions, coords, np.arange(genes),
        spot_ids=[f"s{i:05d}" for i in range(spots)],
        gene_ids=[f"g{g:04d}" for g in range(genes)],
    )
    truth = GroundTruth(mixtures.T / counts[None, :])
    return ref, spatial, truth


def _sample_separated_centroids(populations, genes, separation, rng):
    accepted = np.zeros((0, genes))
    budget = REJECTION_BUDGET_PER_POPULATION * populations
    for _ in range(budget):
        if accepted.shape[0] == populations:
            break
        candidate = np.zeros(genes)
        active = rng.random(genes) < CENTROID_DENSITY
        if not np.any(active):
            active[rng.integers(genes)] = True
        candidate[active] = rng.gamma(CENTROID_GAMMA_SHAPE, 1.0, size=int(active.sum()))
        if candidate.sum() == 0:
            continue
        if accepted.shape[0]:
            sims = (accepted @ candidate) / (
                np.linalg.norm(accepted, axis=1) * np.linalg.norm(candidate)
            )
            if np.any(sims > separation):
                continue
        accepted = np.vstack([accepted, candidate])
    if accepted.shape[0] < populations:
        raise DegenerateInputError(
            f"could not draw {populations} centroids with pairwise cosine <= {separation}; "
            "try a looser separation bound"
        )
    return accepted
