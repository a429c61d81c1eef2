"""Command-line entry points: fit, eval, synth, pool, pairs.

Every command takes a ``--config`` file of flat ``key=value`` lines whose
keys match the long flag names (underscored); explicit flags override the
file. ``fit`` writes the transfer maps and a ``report.json`` that echoes
every resolved parameter, so a run can be reproduced from the report alone.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import io as dio
from .benchgen import NoiseSpec, pool_to_grid, synth_planted
from .errors import ConfigurationError, DotError, ParseError
from .metrics import GroundTruth, accuracy, brier_score, mean_js, smooth_labels, spatial_js
from .preprocess import (CellTable, aggregate_to_populations, align_genes,
                         build_spatial_pairs, neighbor_distance_threshold, subcluster)
from .solver import (SolverConfig, auto_parameters, frank_wolfe, initial_solution,
                     ridge_estimate)
from .types import AbundancePrior, SpatialDataset, TransferProblem

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2


@dataclass
class RunManifest:
    """Everything a fit run needs; echoed verbatim into report.json."""

    ref_expression: str = ""
    ref_labels: str | None = None
    spatial_expression: str = ""
    coordinates: str = ""
    prior: str | None = None
    resolution: str = "high"
    kappa: int = 10
    min_frac: float = 0.01
    lambda_c: float | None = None
    lambda_g: float | None = None
    lambda_s: float | None = None
    lambda_a: float | None = None
    theta: float | None = None
    n: float | None = None
    max_iterations: int = 300
    tolerance: float = 1e-6
    seed: int = 0
    threads: int | None = None
    output: str = "."

    @property
    def feature_mode(self) -> str:
        return "categorical" if self.ref_labels else "continuous"


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dot",
        description="Transfer categorical or continuous features from reference "
                    "profiles to spatial measurement spots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="solve a transfer instance")
    fit.add_argument("--config", type=str, default=None, help="key=value defaults file")
    fit.add_argument("--ref-expression", dest="ref_expression", type=str)
    fit.add_argument("--ref-labels", dest="ref_labels", type=str)
    fit.add_argument("--spatial-expression", dest="spatial_expression", type=str)
    fit.add_argument("--coordinates", type=str)
    fit.add_argument("--prior", type=str)
    fit.add_argument("--resolution", choices=("high", "low"))
    fit.add_argument("--kappa", type=int)
    fit.add_argument("--min-frac", dest="min_frac", type=float)
    fit.add_argument("--lambda-c", dest="lambda_c", type=float)
    fit.add_argument("--lambda-g", dest="lambda_g", type=float)
    fit.add_argument("--lambda-s", dest="lambda_s", type=float)
    fit.add_argument("--lambda-a", dest="lambda_a", type=float)
    fit.add_argument("--theta", type=float)
    fit.add_argument("--n", type=float, help="spot size bound override")
    fit.add_argument("--max-iterations", dest="max_iterations", type=int)
    fit.add_argument("--tolerance", type=float)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--threads", type=int)
    fit.add_argument("--output", type=str)
    fit.set_defaults(handler=cmd_fit)

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    ev.add_argument("--predictions", type=str, required=True)
    ev.add_argument("--truth", type=str, required=True)
    ev.add_argument("--coordinates", type=str, required=True)
    ev.add_argument("--resolution", choices=("high", "low"), default="high")
    ev.add_argument("--output", type=str, default=".")
    ev.set_defaults(handler=cmd_eval)

    sy = sub.add_parser("synth", help="generate a planted synthetic instance")
    sy.add_argument("--populations", type=int, default=10)
    sy.add_argument("--genes", type=int, default=100)
    sy.add_argument("--spots", type=int, default=1000)
    sy.add_argument("--cells-min", dest="cells_min", type=int, default=1)
    sy.add_argument("--cells-max", dest="cells_max", type=int, default=1)
    sy.add_argument("--separation", type=float, default=0.5)
    sy.add_argument("--phi", type=float, default=0.0)
    sy.add_argument("--noise-seed", dest="noise_seed", type=int, default=None)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--output", type=str, default=".")
    sy.set_defaults(handler=cmd_synth)

    po = sub.add_parser("pool", help="pool positioned cells into grid tiles")
    po.add_argument("--expression", type=str, required=True)
    po.add_argument("--coordinates", type=str, required=True)
    po.add_argument("--labels", type=str, required=True)
    po.add_argument("--tile", type=float, required=True)
    po.add_argument("--output", type=str, default=".")
    po.set_defaults(handler=cmd_pool)

    pa = sub.add_parser("pairs", help="dump the spatial pair set")
    pa.add_argument("--spatial-expression", dest="spatial_expression", type=str, required=True)
    pa.add_argument("--coordinates", type=str, required=True)
    pa.add_argument("--output", type=str, default=".")
    pa.set_defaults(handler=cmd_pairs)

    return parser


def _read_config_file(path):
    values: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _build_manifest(args) -> RunManifest:
    manifest = RunManifest()
    casts = {f.name: f for f in fields(RunManifest)}
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            if key not in casts:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            setattr(manifest, key, _cast_config_value(key, raw))
    for f in fields(RunManifest):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(manifest, f.name, value)
    if manifest.threads is None:
        env = os.environ.get("DOT_THREADS")
        if env:
            manifest.threads = int(env)
    for required in ("ref_expression", "spatial_expression", "coordinates"):
        if not getattr(manifest, required):
            raise ConfigurationError(f"--{required.replace('_', '-')} is required")
    return manifest


_INT_KEYS = {"kappa", "max_iterations", "seed", "threads"}
_FLOAT_KEYS = {"min_frac", "lambda_c", "lambda_g", "lambda_s", "lambda_a",
               "theta", "n", "tolerance"}


def _cast_config_value(key, raw):
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    return raw


def cmd_fit(args) -> int:
    manifest = _build_manifest(args)
    out_dir = Path(manifest.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    ref_matrix, cell_ids, ref_genes = dio.read_expression_matrix(manifest.ref_expression)
    spatial_matrix, spot_ids, spatial_genes = dio.read_expression_matrix(manifest.spatial_expression)
    coords = dio.read_coordinates(manifest.coordinates, spot_ids)

    if manifest.ref_labels:
        label_map = dio.read_labels(manifest.ref_labels)
        missing = [c for c in cell_ids if c not in label_map]
        if missing:
            raise ConfigurationError(f"labels missing for cells: {', '.join(missing[:5])}")
        labels = tuple(label_map[c] for c in cell_ids)
    else:
        labels = tuple("all" for _ in cell_ids)

    axis, ref_cols, spatial_cols = align_genes(ref_genes, spatial_genes)
    cells = CellTable(ref_matrix[:, ref_cols], labels, gene_ids=axis.shared_genes,
                      cell_ids=cell_ids)
    ref = subcluster(cells, kappa=manifest.kappa, min_frac=manifest.min_frac,
                     seed=manifest.seed)
    spatial = SpatialDataset(spatial_matrix, coords, spatial_cols,
                             spot_ids=spot_ids, gene_ids=spatial_genes)
    pair_set = build_spatial_pairs(spatial)

    prior = AbundancePrior.disabled()
    if manifest.prior:
        prior_labels, prior_values = dio.read_prior(manifest.prior)
        if set(prior_labels) != set(ref.populations):
            raise ConfigurationError("prior populations do not match the reference labels")
        order = {lab: k for k, lab in enumerate(prior_labels)}
        prior = AbundancePrior(prior_values[[order[p] for p in ref.populations]], enabled=True)

    ridge_map, n_estimate = ridge_estimate(ref.centroids, spatial.shared_expressions)
    overrides = {key: getattr(manifest, key) for key in
                 ("lambda_c", "lambda_g", "lambda_s", "lambda_a", "theta", "n")}
    params = auto_parameters(
        spatial.n_spots, ref.n_categories, axis.n_shared, len(pair_set), prior,
        resolution=manifest.resolution, n_estimate=n_estimate, overrides=overrides,
    )
    problem = TransferProblem(ref, spatial, pair_set, params.prior)
    start = initial_solution(problem, params.spot_bound, ridge_map=ridge_map)
    config = SolverConfig(max_iterations=manifest.max_iterations,
                          tolerance=manifest.tolerance, seed=manifest.seed,
                          threads=manifest.threads)
    result, report = frank_wolfe(problem, params.weights, params.spot_bound,
                                 config, initial=start, n_estimate=n_estimate)

    sub_labels = _subcluster_labels(ref.population_of)
    dio.write_expression_matrix(out_dir / "Y_subclusters.csv", result.values.T,
                                spot_ids, sub_labels)
    pop_matrix, pop_labels = aggregate_to_populations(result.values, ref.population_of)
    dio.write_expression_matrix(out_dir / "Y_populations.csv", pop_matrix.T,
                                spot_ids, pop_labels)

    payload = {
        "command": "fit",
        "manifest": asdict(manifest),
        "feature_mode": manifest.feature_mode,
        "resolved": {
            "lambda_c": params.weights.lambda_c,
            "lambda_g": params.weights.lambda_g,
            "lambda_s": params.weights.lambda_s,
            "lambda_a": params.weights.lambda_a,
            "theta": params.weights.theta,
            "n": params.spot_bound,
            "d_bar": pair_set.distance_threshold,
            "w_bar": pair_set.similarity_threshold,
            "n_pairs": len(pair_set),
            "n_estimate": n_estimate,
            "seed": manifest.seed,
            "threads": manifest.threads,
            "kappa": manifest.kappa,
            "min_frac": manifest.min_frac,
            "max_iterations": manifest.max_iterations,
            "tolerance": manifest.tolerance,
            "n_spots": spatial.n_spots,
            "n_categories": ref.n_categories,
            "n_populations": len(ref.populations),
            "n_shared_genes": axis.n_shared,
        },
        "report": report.as_dict(),
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"fit: {report.iterations} iterations, "
          f"objective {report.objective_trajectory[-1]:.6g}, "
          f"outputs in {out_dir}")
    return EXIT_OK


def _subcluster_labels(population_of):
    counters: dict[str, int] = {}
    out = []
    for pop in population_of:
        k = counters.get(pop, 0)
        counters[pop] = k + 1
        out.append(f"{pop}.{k}")
    return out


def cmd_eval(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    pred, spot_ids, categories = dio.read_expression_matrix(args.predictions)
    truth_matrix, truth_ids, truth_cats = dio.read_expression_matrix(args.truth)
    if set(categories) != set(truth_cats):
        raise ConfigurationError("prediction and truth category sets differ")
    if set(spot_ids) != set(truth_ids):
        raise ConfigurationError("prediction and truth spot sets differ")
    cat_index = {c: k for k, c in enumerate(truth_cats)}
    id_index = {s: k for k, s in enumerate(truth_ids)}
    truth_matrix = truth_matrix[np.ix_([id_index[s] for s in spot_ids],
                                       [cat_index[c] for c in categories])]
    coords = dio.read_coordinates(args.coordinates, spot_ids)

    Y = pred.T
    truth = GroundTruth(truth_matrix.T)
    d_bar = neighbor_distance_threshold(coords)
    smoothed = smooth_labels(truth, coords, d_bar)

    results = {
        "mode": args.resolution,
        "n_spots": len(spot_ids),
        "n_categories": len(categories),
        "d_bar": d_bar,
        "sigma": smoothed.sigma,
        "brier": brier_score(Y, truth),
        "sjs": spatial_js(Y, smoothed),
    }
    if args.resolution == "high":
        results["accuracy"] = accuracy(Y, truth)
    else:
        results["mean_js"] = mean_js(Y, truth)

    for key in ("accuracy", "brier", "sjs", "mean_js"):
        if key in results:
            print(f"{key:10s} {results[key]:.6f}")
    (out_dir / "metrics.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    noise_seed = args.seed if args.noise_seed is None else args.noise_seed
    noise = NoiseSpec(phi=args.phi, seed=noise_seed)
    ref, spatial, truth = synth_planted(
        args.populations, args.genes, args.spots,
        cells_per_spot=(args.cells_min, args.cells_max),
        separation=args.separation, noise=noise, seed=args.seed,
    )
    pop_labels = list(ref.population_of)
    dio.write_expression_matrix(out_dir / "ref_expression.csv", ref.centroids,
                                pop_labels, spatial.gene_ids)
    dio.write_labels(out_dir / "ref_labels.csv", pop_labels, pop_labels)
    dio.write_expression_matrix(out_dir / "spatial_expression.csv", spatial.expressions,
                                spatial.spot_ids, spatial.gene_ids)
    dio.write_coordinates(out_dir / "coordinates.csv", spatial.coordinates, spatial.spot_ids)
    dio.write_expression_matrix(out_dir / "truth.csv", truth.P.T, spatial.spot_ids, pop_labels)
    print(f"synth: {args.spots} spots, {args.populations} populations, "
          f"{args.genes} genes written to {out_dir}")
    return EXIT_OK


def cmd_pool(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix, cell_ids, gene_ids = dio.read_expression_matrix(args.expression)
    coords = dio.read_coordinates(args.coordinates, cell_ids)
    label_map = dio.read_labels(args.labels)
    missing = [c for c in cell_ids if c not in label_map]
    if missing:
        raise ConfigurationError(f"labels missing for cells: {', '.join(missing[:5])}")
    labels = [label_map[c] for c in cell_ids]

    pooled = pool_to_grid(matrix, coords, labels, args.tile)
    dio.write_expression_matrix(out_dir / "pooled_expression.csv", pooled.expressions,
                                pooled.tile_ids, gene_ids)
    dio.write_coordinates(out_dir / "pooled_coordinates.csv", pooled.coordinates,
                          pooled.tile_ids)
    dio.write_expression_matrix(out_dir / "truth.csv", pooled.composition.T,
                                pooled.tile_ids, pooled.populations)
    dio.write_expression_matrix(out_dir / "cell_counts.csv",
                                pooled.cell_counts[:, None].astype(float),
                                pooled.tile_ids, ["cells"])
    print(f"pool: {pooled.n_tiles} tiles written to {out_dir}")
    return EXIT_OK


def cmd_pairs(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix, spot_ids, gene_ids = dio.read_expression_matrix(args.spatial_expression)
    coords = dio.read_coordinates(args.coordinates, spot_ids)
    spatial = SpatialDataset(matrix, coords, np.arange(matrix.shape[1]),
                             spot_ids=spot_ids, gene_ids=gene_ids)
    pair_set = build_spatial_pairs(spatial)
    dio.write_pairs(out_dir / "pairs.csv", pair_set, spot_ids)
    print(f"pairs: {len(pair_set)} pairs (d_bar={pair_set.distance_threshold:.6g}, "
          f"w_bar={pair_set.similarity_threshold:.6g}) written to {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
