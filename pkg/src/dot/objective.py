"""The five objective terms, their weighted composite, and analytic gradients.

The composite objective over a transfer map Y is

    sum_i d_spot(i) + lc * sum_c d_centroid(c) + lg * sum_g d_gene(g)
    + ls * d_spatial + la * d_abundance

where the three expression terms use the sqrt-cosine distance on shared
genes and the two compositional terms use base-2 Jensen-Shannon on
L1-normalized compositions. Gradients are hand-derived; the JS terms
include the Jacobian of the internal L1 normalization, and small
denominators and log arguments are clamped at EPS to keep every entry
finite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import rel_entr

from .distances import LN2, cosine_distance_rows, js_divergence, js_divergence_columns
from .errors import DimensionMismatchError, NumericalError
from .types import AbundancePrior, ObjectiveWeights, SpatialPairSet, TransferProblem

# Clamp for distance denominators and for Y entries inside logarithms.
EPS = 1e-12

TERM_NAMES = ("spot", "centroid", "gene", "spatial", "abundance")


def _check_shapes(Y, X_r, X_s):
    Y = np.asarray(Y, dtype=float)
    X_r = np.asarray(X_r, dtype=float)
    X_s = np.asarray(X_s, dtype=float)
    if Y.shape != (X_r.shape[0], X_s.shape[0]) or X_r.shape[1] != X_s.shape[1]:
        raise DimensionMismatchError(
            f"inconsistent shapes: Y {Y.shape}, centroids {X_r.shape}, spots {X_s.shape}"
        )
    return Y, X_r, X_s


def spot_term(Y, X_r, X_s, weights: ObjectiveWeights) -> float:
    """Per-spot expression mismatch, blended with its sparsity-promoting
    linear form by ``weights.theta``."""
    Y, X_r, X_s = _check_shapes(Y, X_r, X_s)
    theta = weights.theta
    value = 0.0
    if theta < 1.0:
        mixed = Y.T @ X_r
        value += (1.0 - theta) * cosine_distance_rows(X_s, mixed).sum()
    if theta > 0.0:
        n_bar = np.broadcast_to(np.asarray(weights.sparsity_scale, dtype=float), (Y.shape[1],))
        D = _pairwise_sqrt_cos_distance(X_r, X_s)
        value += theta * float(((Y * D).sum(axis=0) / n_bar).sum())
    return float(value)


def centroid_term(Y, X_r, X_s) -> float:
    """Mismatch between each centroid and the expression it collects from spots."""
    Y, X_r, X_s = _check_shapes(Y, X_r, X_s)
    return float(cosine_distance_rows(X_r, Y @ X_s).sum())


def gene_term(Y, X_r, X_s) -> float:
    """Mismatch between each gene's spatial map and its transferred map."""
    Y, X_r, X_s = _check_shapes(Y, X_r, X_s)
    mixed = Y.T @ X_r
    return float(cosine_distance_rows(X_s.T, mixed.T).sum())


def spatial_term(Y, pairs: SpatialPairSet) -> float:
    """Similarity-weighted JS divergence between compositions of paired spots."""
    Y = np.asarray(Y, dtype=float)
    if len(pairs) == 0:
        return 0.0
    if pairs.j.max() >= Y.shape[1]:
        raise DimensionMismatchError("pair indices exceed the number of spots")
    js = js_divergence_columns(Y[:, pairs.i], Y[:, pairs.j])
    return float(pairs.weights @ js)


def abundance_term(Y, prior: AbundancePrior, population_codes=None) -> float:
    """JS divergence between realized and expected population abundances."""
    if not prior.enabled:
        return 0.0
    Y = np.asarray(Y, dtype=float)
    rho = _population_abundance(Y, population_codes, prior.values.size)
    return js_divergence(rho, prior.values)


def total_objective(Y, problem: TransferProblem, weights: ObjectiveWeights) -> float:
    """Weighted sum of the five terms; zero-weight terms are not evaluated."""
    Y = np.asarray(Y, dtype=float)
    X_r = problem.ref.centroids
    X_s = problem.spot_shared
    total = spot_term(Y, X_r, X_s, weights)
    if weights.lambda_c > 0:
        total += weights.lambda_c * centroid_term(Y, X_r, X_s)
    if weights.lambda_g > 0:
        total += weights.lambda_g * gene_term(Y, X_r, X_s)
    if weights.lambda_s > 0:
        total += weights.lambda_s * spatial_term(Y, problem.pairs)
    if weights.lambda_a > 0:
        total += weights.lambda_a * abundance_term(Y, problem.prior, problem.ref.population_codes)
    return float(total)


def objective_terms(Y, problem: TransferProblem, weights: ObjectiveWeights) -> dict[str, float]:
    """All five raw term values plus the weighted total.

    Terms with zero weight are still evaluated; use this for reporting, and
    ``objective_and_gradient`` inside iterative loops.
    """
    Y = np.asarray(Y, dtype=float)
    X_r = problem.ref.centroids
    X_s = problem.spot_shared
    terms = {
        "spot": spot_term(Y, X_r, X_s, weights),
        "centroid": centroid_term(Y, X_r, X_s),
        "gene": gene_term(Y, X_r, X_s),
        "spatial": spatial_term(Y, problem.pairs),
        "abundance": abundance_term(Y, problem.prior, problem.ref.population_codes),
    }
    terms["total"] = (
        terms["spot"]
        + weights.lambda_c * terms["centroid"]
        + weights.lambda_g * terms["gene"]
        + weights.lambda_s * terms["spatial"]
        + weights.lambda_a * terms["abundance"]
    )
    return terms


def total_gradient(Y, problem: TransferProblem, weights: ObjectiveWeights) -> np.ndarray:
    """Gradient of the weighted composite with respect to Y."""
    _, grad, _, _ = objective_and_gradient(Y, problem, weights)
    return grad


def objective_and_gradient(Y, problem: TransferProblem, weights: ObjectiveWeights):
    """Evaluate the composite objective and its gradient in one pass.

    Shares the transferred-expression products between the value and the
    gradient. Terms with zero weight are skipped entirely.

    Returns ``(value, gradient, term_values, flags)`` where ``flags`` counts
    degenerate rows (categories with no mass anywhere) and clamped
    denominators/logs.
    """
    Y = np.asarray(Y, dtype=float)
    X_r = problem.ref.centroids
    X_s = problem.spot_shared
    if Y.shape != (X_r.shape[0], X_s.shape[0]):
        raise DimensionMismatchError(
            f"Y has shape {Y.shape}, expected {(X_r.shape[0], X_s.shape[0])}"
        )
    n_cat, n_spots = Y.shape
    grad = np.zeros_like(Y)
    terms = dict.fromkeys(TERM_NAMES, 0.0)
    flags = {"degenerate_rows": 0, "clamped_gradients": 0, "zero_gene_columns": 0}
    theta = weights.theta

    Xbar_s = Y.T @ X_r if (theta < 1.0 or weights.lambda_g > 0) else None

    # Spot term: (1-theta) * nonlinear mixture distance + theta * linear blend.
    if theta < 1.0:
        value, g = _spot_mixture_value_grad(X_r, X_s, Xbar_s, problem.spot_norms, flags)
        terms["spot"] += (1.0 - theta) * value
        grad += (1.0 - theta) * g
    if theta > 0.0:
        n_bar = np.broadcast_to(np.asarray(weights.sparsity_scale, dtype=float), (n_spots,))
        D = problem.category_spot_distance
        terms["spot"] += theta * float(((Y * D).sum(axis=0) / n_bar).sum())
        grad += theta * (D / n_bar[None, :])
    _require_finite(grad, "spot")

    if weights.lambda_c > 0:
        value, g = _centroid_value_grad(Y, X_r, X_s, problem.ref.row_norms, flags)
        terms["centroid"] = value
        grad += weights.lambda_c * g
        _require_finite(g, "centroid")

    if weights.lambda_g > 0:
        value, g = _gene_value_grad(X_r, X_s, Xbar_s, problem.gene_column_norms, flags)
        terms["gene"] = value
        grad += weights.lambda_g * g
        _require_finite(g, "gene")

    if weights.lambda_s > 0 and len(problem.pairs) > 0:
        value, g = _spatial_value_grad(Y, problem.pairs, flags)
        terms["spatial"] = value
        grad += weights.lambda_s * g
        _require_finite(g, "spatial")

    if weights.lambda_a > 0 and problem.prior.enabled:
        value, g_pop = _abundance_value_grad(Y, problem.prior, problem.ref.population_codes, flags)
        terms["abundance"] = value
        _require_finite(g_pop, "abundance")
        grad += weights.lambda_a * g_pop[problem.ref.population_codes][:, None]

    total = (
        terms["spot"]
        + weights.lambda_c * terms["centroid"]
        + weights.lambda_g * terms["gene"]
        + weights.lambda_s * terms["spatial"]
        + weights.lambda_a * terms["abundance"]
    )
    return float(total), grad, terms, flags


# ---------------------------------------------------------------------------
# per-term internals
# ---------------------------------------------------------------------------


def _pairwise_sqrt_cos_distance(X_r, X_s) -> np.ndarray:
    from .distances import cosine_similarity_matrix

    sim = cosine_similarity_matrix(X_r, X_s)
    return np.sqrt(np.clip(1.0 - sim, 0.0, None))


def _require_finite(arr, term: str):
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite gradient entries in the {term} term")


def _population_abundance(Y, population_codes, n_populations: int) -> np.ndarray:
    row_sums = Y.sum(axis=1)
    if population_codes is None:
        if n_populations and row_sums.size != n_populations:
            raise DimensionMismatchError(
                f"prior covers {n_populations} populations but Y has {row_sums.size} rows"
            )
        return row_sums
    codes = np.asarray(population_codes, dtype=int)
    if codes.size != row_sums.size:
        raise DimensionMismatchError("population mapping does not cover all Y rows")
    return np.bincount(codes, weights=row_sums, minlength=n_populations)


def _spot_mixture_value_grad(X_r, X_s, Xbar_s, spot_norms, flags):
    d = cosine_distance_rows(X_s, Xbar_s)
    nb = np.linalg.norm(Xbar_s, axis=1)
    dots = np.einsum("ig,ig->i", X_s, Xbar_s)

    d_cl = np.maximum(d, EPS)
    flags["clamped_gradients"] += int(np.count_nonzero(d < EPS))
    nb_cl = np.where(nb > 0, nb, 1.0)
    s_cl = np.where(spot_norms > 0, spot_norms, 1.0)
    # Rows where either vector is all zero have constant distance 1: no gradient.
    live = ((nb > 0) & (spot_norms > 0)).astype(float)

    T = (-0.5 / d_cl)[:, None] * (
        X_s / nb_cl[:, None] - Xbar_s * (dots / nb_cl**3)[:, None]
    )
    T *= (live / s_cl)[:, None]
    return float(d.sum()), X_r @ T.T


def _centroid_value_grad(Y, X_r, X_s, row_norms, flags):
    Xbar_r = Y @ X_s
    d = cosine_distance_rows(X_r, Xbar_r)
    nb = np.linalg.norm(Xbar_r, axis=1)
    dots = np.einsum("cg,cg->c", X_r, Xbar_r)

    flags["degenerate_rows"] += int(np.count_nonzero(nb == 0))
    d_cl = np.maximum(d, EPS)
    flags["clamped_gradients"] += int(np.count_nonzero((d < EPS) & (nb > 0)))
    nb_cl = np.where(nb > 0, nb, 1.0)
    live = (nb > 0).astype(float)

    T = (-0.5 / d_cl)[:, None] * (
        X_r / nb_cl[:, None] - Xbar_r * (dots / nb_cl**3)[:, None]
    )
    T *= (live / row_norms)[:, None]
    return float(d.sum()), T @ X_s.T


def _gene_value_grad(X_r, X_s, Xbar_s, gene_norms, flags):
    vb = np.linalg.norm(Xbar_s, axis=0)
    dots = np.einsum("ig,ig->g", X_s, Xbar_s)

    u_cl = np.where(gene_norms > 0, gene_norms, 1.0)
    v_cl = np.where(vb > 0, vb, 1.0)
    cos = np.where((gene_norms > 0) & (vb > 0), dots / (u_cl * v_cl), 0.0)
    d = np.sqrt(np.clip(1.0 - cos, 0.0, None))

    flags["zero_gene_columns"] += int(np.count_nonzero(gene_norms == 0))
    d_cl = np.maximum(d, EPS)
    flags["clamped_gradients"] += int(np.count_nonzero((d < EPS) & (gene_norms > 0) & (vb > 0)))
    live = ((gene_norms > 0) & (vb > 0)).astype(float)

    a = live * (-0.5 / d_cl) / (u_cl * v_cl)
    b = live * (0.5 / d_cl) * dots / (u_cl * v_cl**3)
    grad = (X_r * a[None, :]) @ X_s.T + (X_r * b[None, :]) @ Xbar_s.T
    return float(d.sum()), grad


def _spatial_value_grad(Y, pairs: SpatialPairSet, flags):
    s = Y.sum(axis=0)
    P_hat = Y / s[None, :]
    A = P_hat[:, pairs.i]
    B = P_hat[:, pairs.j]
    M = 0.5 * (A + B)

    kl_a = rel_entr(A, M).sum(axis=0)
    kl_b = rel_entr(B, M).sum(axis=0)
    value = float(pairs.weights @ ((kl_a + kl_b) / (2.0 * LN2)))

    flags["clamped_gradients"] += int(np.count_nonzero(A < EPS) + np.count_nonzero(B < EPS))
    log_a = np.log(np.maximum(A, EPS) / np.maximum(M, EPS))
    log_b = np.log(np.maximum(B, EPS) / np.maximum(M, EPS))
    # d/dY of w * JS2(normalize(col i), normalize(col j)): the normalization
    # Jacobian subtracts the KL term and divides by the raw column sum.
    coef_i = pairs.weights / (2.0 * LN2 * s[pairs.i])
    coef_j = pairs.weights / (2.0 * LN2 * s[pairs.j])
    contrib_i = coef_i[None, :] * (log_a - kl_a[None, :])
    contrib_j = coef_j[None, :] * (log_b - kl_b[None, :])

    grad_t = np.zeros((Y.shape[1], Y.shape[0]))
    np.add.at(grad_t, pairs.i, contrib_i.T)
    np.add.at(grad_t, pairs.j, contrib_j.T)
    return value, grad_t.T


def _abundance_value_grad(Y, prior: AbundancePrior, population_codes, flags):
    rho = _population_abundance(Y, population_codes, prior.values.size)
    S = rho.sum()
    rho_hat = rho / S
    r_hat = prior.values / prior.values.sum()
    m = 0.5 * (rho_hat + r_hat)

    kl_rho = rel_entr(rho_hat, m).sum()
    kl_r = rel_entr(r_hat, m).sum()
    value = float((kl_rho + kl_r) / (2.0 * LN2))

    flags["clamped_gradients"] += int(np.count_nonzero(rho_hat < EPS))
    log_rho = np.log(np.maximum(rho_hat, EPS) / np.maximum(m, EPS))
    g_pop = (log_rho - kl_rho) / (2.0 * LN2 * S)
    return value, g_pop
