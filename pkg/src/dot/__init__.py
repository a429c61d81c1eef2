"""Multi-objective transfer of reference features to spatial measurements.

The package solves a constrained assignment problem: a non-negative
category-by-spot matrix Y is optimized so that transferred expression
matches the spatial measurements from five complementary angles (per spot,
per category, per gene, across spatial neighbors, and against an optional
abundance prior). The solver is a projection-free Frank-Wolfe loop whose
linearized subproblem decomposes by spot.

Typical use::

    from dot import (CellTable, subcluster, build_spatial_pairs,
                     auto_parameters, frank_wolfe, TransferProblem)

or via the command line: ``dot fit --help``.
"""

from .benchgen import NoiseSpec, PooledDataset, inject_noise, mask_genes, pool_to_grid, synth_planted
from .distances import cosine_distance, js_divergence
from .errors import (ConfigurationError, DegenerateInputError, DimensionMismatchError,
                     DotError, DotWarning, NumericalError, ParseError)
from .metrics import (GroundTruth, SmoothedLabels, accuracy, brier_score,
                      grid_map_similarity, mean_js, smooth_labels, spatial_js)
from .objective import (abundance_term, centroid_term, gene_term, objective_and_gradient,
                        objective_terms, spatial_term, spot_term, total_gradient,
                        total_objective)
from .preprocess import (CellTable, aggregate_to_populations, align_genes,
                         build_spatial_pairs, compute_centroids,
                         neighbor_distance_threshold, similarity_cutoff, subcluster)
from .solver import (AutoParameters, SolveReport, SolverConfig, SolveState,
                     atom_solution, auto_parameters, frank_wolfe, fw_gap,
                     initial_solution, ridge_estimate)
from .types import (AbundancePrior, GeneAxis, ObjectiveWeights, ReferenceProfiles,
                    SpatialDataset, SpatialPairSet, TransferMap, TransferProblem)

__version__ = "0.1.0"

__all__ = [
    "AbundancePrior", "AutoParameters", "CellTable", "ConfigurationError",
    "DegenerateInputError", "DimensionMismatchError", "DotError", "DotWarning",
    "GeneAxis", "GroundTruth", "NoiseSpec", "NumericalError", "ObjectiveWeights",
    "ParseError", "PooledDataset", "ReferenceProfiles", "SmoothedLabels",
    "SolveReport", "SolveState", "SolverConfig", "SpatialDataset", "SpatialPairSet",
    "TransferMap", "TransferProblem",
    "abundance_term", "accuracy", "aggregate_to_populations", "align_genes",
    "atom_solution", "auto_parameters", "brier_score", "build_spatial_pairs",
    "centroid_term", "compute_centroids", "cosine_distance", "frank_wolfe",
    "fw_gap", "gene_term", "grid_map_similarity", "initial_solution",
    "inject_noise", "js_divergence", "mask_genes", "mean_js",
    "neighbor_distance_threshold", "objective_and_gradient", "objective_terms",
    "pool_to_grid", "ridge_estimate", "similarity_cutoff", "smooth_labels",
    "spatial_js", "spatial_term", "spot_term", "subcluster", "synth_planted",
    "total_gradient", "total_objective",
]
