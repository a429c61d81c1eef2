"""Frank-Wolfe optimization of the composite transfer objective.

The feasible region is a product of per-spot boxes: column i of Y must be
non-negative with a sum in [1, n_i]. The linearized subproblem therefore
decomposes by spot and is solved exactly by placing mass on the single
best category: n_i of it when that category's gradient entry is negative,
1 otherwise. Iterates move with the classic 2/(2+t) step, so feasibility
is preserved by convexity, and progress is monitored with the duality-gap
surrogate <Y - atom, gradient>.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from threadpoolctl import threadpool_limits

from .errors import ConfigurationError, DegenerateInputError, NumericalError
from .objective import objective_and_gradient, objective_terms
from .types import AbundancePrior, ObjectiveWeights, TransferMap, TransferProblem

FEASIBILITY_TOL = 1e-9
GAP_TOL = -1e-9

INIT_WEIGHT_NEAREST = 0.4
INIT_WEIGHT_RIDGE = 0.4
INIT_WEIGHT_PRIOR = 0.2


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and bookkeeping knobs for the Frank-Wolfe loop."""

    max_iterations: int = 300
    tolerance: float = 1e-6
    seed: int = 0
    threads: int | None = None
    callback: Callable[["SolveState"], None] | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DegenerateInputError("max_iterations must be at least 1")
        if self.tolerance <= 0:
            raise DegenerateInputError("tolerance must be positive")


@dataclass
class SolveState:
    """Snapshot of one iteration, passed to the optional callback."""

    iterate: np.ndarray
    gradient: np.ndarray
    iteration: int
    step: float


@dataclass
class SolveReport:
    """Trajectories and diagnostics of one solve."""

    objective_trajectory: list[float]
    gap_trajectory: list[float]
    iterations: int
    wall_time_s: float
    term_values: dict[str, float]
    n_estimate: float | None
    stopped_by: str
    flags: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "objective_trajectory": [float(v) for v in self.objective_trajectory],
            "gap_trajectory": [float(v) for v in self.gap_trajectory],
            "iterations": int(self.iterations),
            "wall_time_s": float(self.wall_time_s),
            "term_values": {k: float(v) for k, v in self.term_values.items()},
            "n_estimate": None if self.n_estimate is None else float(self.n_estimate),
            "stopped_by": self.stopped_by,
            "flags": {k: int(v) for k, v in self.flags.items()},
        }


@dataclass(frozen=True)
class AutoParameters:
    """Data-driven weights, spot-size bound, and the rescaled prior."""

    weights: ObjectiveWeights
    spot_bound: float
    prior: AbundancePrior


def atom_solution(gradient, spot_bounds) -> np.ndarray:
    """Exact minimizer of the linearized objective over the feasible region.

    One category per spot (ties to the smallest index) at value n_i when its
    gradient entry is negative, else 1.
    """
    gradient = np.asarray(gradient, dtype=float)
    n = np.broadcast_to(np.asarray(spot_bounds, dtype=float), (gradient.shape[1],))
    best = np.argmin(gradient, axis=0)
    cols = np.arange(gradient.shape[1])
    values = np.where(gradient[best, cols] < 0, n, 1.0)
    atom = np.zeros_like(gradient)
    atom[best, cols] = values
    return atom


def fw_gap(Y, atom, gradient) -> float:
    """Duality-gap surrogate <Y - atom, gradient>; non-negative at an exact atom."""
    Y = np.asarray(Y, dtype=float)
    gap = float(((Y - atom) * gradient).sum())
    if gap < GAP_TOL:
        raise NumericalError(f"negative duality gap {gap:.3e}: atom is not optimal")
    return gap


def ridge_estimate(X_r, X_s):
    """Ridge-regularized least-squares transfer and the implied total cell count.

    Solves (X_r X_r^T + I) Y = X_r X_s^T, clips negatives to zero, and
    returns ``(Y0, N_hat)`` where ``N_hat`` is the sum of all entries.
    """
    X_r = np.asarray(X_r, dtype=float)
    X_s = np.asarray(X_s, dtype=float)
    A = X_r @ X_r.T + np.eye(X_r.shape[0])
    B = X_r @ X_s.T
    Y0 = scipy.linalg.solve(A, B, assume_a="pos")
    np.clip(Y0, 0.0, None, out=Y0)
    return Y0, float(Y0.sum())


def initial_solution(problem: TransferProblem, spot_bounds, ridge_map=None) -> TransferMap:
    """Blend of three feasible starts: nearest centroid, ridge fit, prior fill.

    The nearest-centroid part is one-hot at n_i per spot; the ridge part is
    rescaled column-wise into [1, n_i] (zero columns fall back to uniform);
    the prior part spreads each population's expected share equally over its
    sub-clusters (uniform when the prior is disabled). Weights 0.4/0.4/0.2.
    """
    n_cat, n_spots = problem.n_categories, problem.n_spots
    n = np.broadcast_to(np.asarray(spot_bounds, dtype=float), (n_spots,))
    cols = np.arange(n_spots)

    nearest = np.zeros((n_cat, n_spots))
    nearest[problem.nearest_category(), cols] = n

    if ridge_map is None:
        ridge_map, _ = ridge_estimate(problem.ref.centroids, problem.spot_shared)
    ridge = np.array(ridge_map, dtype=float)
    sums = ridge.sum(axis=0)
    # Columns with (numerically) no mass cannot be rescaled into the box.
    zero = sums <= 1e-12
    if np.any(zero):
        ridge[:, zero] = 1.0 / n_cat
        sums = ridge.sum(axis=0)
    ridge *= np.clip(sums, 1.0, n) / sums

    if problem.prior.enabled:
        codes = problem.ref.population_codes
        counts = np.bincount(codes, minlength=len(problem.ref.populations))
        share = problem.prior.values / problem.prior.values.sum()
        fill_per_cat = share[codes] / counts[codes]
    else:
        fill_per_cat = np.full(n_cat, 1.0 / n_cat)
    prior_fill = fill_per_cat[:, None] * n[None, :]

    Y = INIT_WEIGHT_NEAREST * nearest + INIT_WEIGHT_RIDGE * ridge + INIT_WEIGHT_PRIOR * prior_fill
    sums = Y.sum(axis=0)
    Y *= np.clip(sums, 1.0, n) / sums
    return TransferMap(Y, n)


def auto_parameters(n_spots: int, n_categories: int, n_genes: int, n_pairs: int,
                    prior: AbundancePrior, resolution: str = "high",
                    n_estimate: float | None = None,
                    overrides: dict | None = None) -> AutoParameters:
    """Resolve all model parameters from instance dimensions.

    Each objective is weighted by the ratio of its range to the spot term's:
    lc = I/C, lg = I/G, ls = I/(n P), la = 1/n with the prior on (0 off).
    High resolution fixes n=1, theta=1; low resolution takes n from the
    ridge cell-count estimate and theta=0. Explicit overrides win.
    """
    overrides = dict(overrides or {})
    if resolution not in ("high", "low"):
        raise ConfigurationError(f"unknown resolution mode {resolution!r}")

    if overrides.get("n") is not None:
        n = float(overrides["n"])
        if n < 1:
            raise ConfigurationError("spot size bound must be at least 1")
    elif resolution == "high":
        n = 1.0
    else:
        if n_estimate is None:
            raise ConfigurationError("low-resolution mode needs a cell-count estimate or an explicit n")
        n = float(max(1, math.ceil(n_estimate / n_spots)))

    theta = overrides.get("theta")
    if theta is None:
        theta = 1.0 if resolution == "high" else 0.0

    def resolve(key, default):
        value = overrides.get(key)
        return float(default if value is None else value)

    lambda_c = resolve("lambda_c", n_spots / n_categories)
    lambda_g = resolve("lambda_g", n_spots / n_genes)
    lambda_s = resolve("lambda_s", n_spots / (n * n_pairs) if n_pairs > 0 else 0.0)
    lambda_a = resolve("lambda_a", 1.0 / n if prior.enabled else 0.0)

    if prior.enabled:
        # Rescale so the prior totals the expected cell count: the estimate in
        # low resolution, one cell per spot otherwise. JS normalizes internally,
        # so this only standardizes what gets reported.
        if resolution == "low" and n_estimate is not None:
            total = float(n_estimate)
        else:
            total = n * n_spots
        scaled = AbundancePrior(prior.values * (total / prior.values.sum()), enabled=True)
    else:
        scaled = AbundancePrior.disabled()

    weights = ObjectiveWeights(lambda_c=lambda_c, lambda_g=lambda_g, lambda_s=lambda_s,
                               lambda_a=lambda_a, theta=float(theta), sparsity_scale=n)
    return AutoParameters(weights=weights, spot_bound=n, prior=scaled)


def frank_wolfe(problem: TransferProblem, weights: ObjectiveWeights, spot_bounds,
                config: SolverConfig | None = None, initial: TransferMap | None = None,
                n_estimate: float | None = None):
    """Run the Frank-Wolfe loop; returns ``(TransferMap, SolveReport)``.

    Stops when the gap falls to ``tolerance`` times the initial gap or after
    ``max_iterations`` update steps. Trajectories include the initial point,
    so their length is ``iterations + 1``.
    """
    config = config or SolverConfig()
    n = np.broadcast_to(np.asarray(spot_bounds, dtype=float), (problem.n_spots,)).copy()
    if initial is None:
        initial = initial_solution(problem, n)
    Y = np.array(initial.values if isinstance(initial, TransferMap) else initial, dtype=float)
    _check_feasible(Y, n)

    started = time.perf_counter()
    objective_traj: list[float] = []
    gap_traj: list[float] = []
    flags: dict = {}
    stopped_by = "max_iterations"

    with threadpool_limits(limits=config.threads):
        t = 0
        while True:
            value, grad, _, flags = objective_and_gradient(Y, problem, weights)
            if not np.isfinite(value):
                raise NumericalError(_diagnose_nonfinite(Y, problem, weights))
            atom = atom_solution(grad, n)
            gap = fw_gap(Y, atom, grad)
            objective_traj.append(value)
            gap_traj.append(gap)
            if gap <= config.tolerance * gap_traj[0]:
                stopped_by = "gap"
                break
            if t >= config.max_iterations:
                break
            step = 2.0 / (2.0 + t)
            if config.callback is not None:
                config.callback(SolveState(iterate=Y, gradient=grad, iteration=t, step=step))
            Y += step * (atom - Y)
            _check_feasible(Y, n)
            t += 1

    wall = time.perf_counter() - started
    report = SolveReport(
        objective_trajectory=objective_traj,
        gap_trajectory=gap_traj,
        iterations=len(objective_traj) - 1,
        wall_time_s=wall,
        term_values=objective_terms(Y, problem, weights),
        n_estimate=n_estimate,
        stopped_by=stopped_by,
        flags=flags,
    )
    return TransferMap(Y, n), report


def _check_feasible(Y, n):
    sums = Y.sum(axis=0)
    if np.any(Y < 0) or np.any(sums < 1 - FEASIBILITY_TOL) or np.any(sums > n + FEASIBILITY_TOL):
        raise NumericalError("iterate left the feasible region")


def _diagnose_nonfinite(Y, problem, weights) -> str:
    terms = objective_terms(Y, problem, weights)
    for name, value in terms.items():
        if not np.isfinite(value):
            return f"non-finite objective value in the {name} term"
    return "non-finite objective value"
