import numpy as np
import pytest

from dot import ObjectiveWeights, total_gradient, total_objective
from dot.objective import objective_and_gradient
from dot.testkit import finite_difference_gradient

from test_distances import scalar_cosine_distance
from test_objective import interior_Y, make_problem

N_BOUND = 4.0

WEIGHT_CONFIGS = {
    "spot_nonlinear": dict(theta=0.0),
    "spot_linear": dict(theta=1.0),
    "spot_blend": dict(theta=0.4),
    "centroid_only": dict(lambda_c=1.3, theta=0.0),
    "gene_only": dict(lambda_g=0.7, theta=0.0),
    "spatial_only": dict(lambda_s=2.0, theta=0.0),
    "abundance_only": dict(lambda_a=1.1, theta=0.0),
    "all_terms": dict(lambda_c=1.2, lambda_g=0.8, lambda_s=1.5, lambda_a=0.9, theta=0.3),
}


def fd_relative_error(problem, Y, weights, h=1e-5):
    grad = total_gradient(Y, problem, weights)
    fd = finite_difference_gradient(lambda Z: total_objective(Z, problem, weights), Y, h=h)
    return np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8))


@pytest.mark.parametrize("name", sorted(WEIGHT_CONFIGS))
def test_gradient_matches_finite_differences(name):
    rng = np.random.default_rng(42)
    problem = make_problem(rng, n_cat=5, n_spots=8, n_genes=6, n_pairs=5, prior=True)
    Y = interior_Y(rng, 5, 8, n=N_BOUND)
    weights = ObjectiveWeights(sparsity_scale=N_BOUND, **WEIGHT_CONFIGS[name])
    assert fd_relative_error(problem, Y, weights) <= 1e-4


def test_gradient_matches_on_multiple_instances():
    rng = np.random.default_rng(43)
    weights = ObjectiveWeights(lambda_c=1.0, lambda_g=1.0, lambda_s=1.0, lambda_a=1.0,
                               theta=0.5, sparsity_scale=N_BOUND)
    for _ in range(5):
        problem = make_problem(rng, n_cat=4, n_spots=7, n_genes=5, n_pairs=4, prior=True)
        Y = interior_Y(rng, 4, 7, n=N_BOUND)
        assert fd_relative_error(problem, Y, weights) <= 1e-4


def test_pure_linear_gradient_is_constant_distance_table():
    rng = np.random.default_rng(44)
    problem = make_problem(rng, n_cat=3, n_spots=5, n_genes=4)
    Y = interior_Y(rng, 3, 5, n=N_BOUND)
    n_bar = 2.5
    grad = total_gradient(Y, problem, ObjectiveWeights(theta=1.0, sparsity_scale=n_bar))
    X_r = problem.ref.centroids
    X_s = problem.spot_shared
    for c in range(3):
        for i in range(5):
            want = scalar_cosine_distance(X_s[i].tolist(), X_r[c].tolist()) / n_bar
            assert grad[c, i] == pytest.approx(want, rel=1e-10)
    # The linear gradient does not depend on Y at all.
    grad2 = total_gradient(interior_Y(rng, 3, 5, n=N_BOUND), problem,
                           ObjectiveWeights(theta=1.0, sparsity_scale=n_bar))
    np.testing.assert_allclose(grad, grad2, rtol=0, atol=0)


def test_spatial_gradient_zero_for_identical_columns():
    rng = np.random.default_rng(45)
    problem = make_problem(rng, n_cat=3, n_spots=4, n_pairs=2)
    column = rng.uniform(0.2, 1.0, 3)
    Y = np.tile(column[:, None], (1, 4))
    grad = total_gradient(Y, problem, ObjectiveWeights(lambda_s=1.0, theta=1.0,
                                                       sparsity_scale=1.0))
    base = total_gradient(Y, problem, ObjectiveWeights(theta=1.0, sparsity_scale=1.0))
    np.testing.assert_allclose(grad, base, rtol=0, atol=1e-15)


def test_combined_call_shares_values():
    rng = np.random.default_rng(46)
    problem = make_problem(rng, prior=True)
    Y = interior_Y(rng, problem.n_categories, problem.n_spots)
    weights = ObjectiveWeights(1.0, 1.0, 1.0, 1.0, theta=0.25, sparsity_scale=N_BOUND)
    value, grad, terms, flags = objective_and_gradient(Y, problem, weights)
    assert value == pytest.approx(total_objective(Y, problem, weights), rel=1e-12)
    np.testing.assert_allclose(grad, total_gradient(Y, problem, weights), rtol=0, atol=0)
    assert flags["degenerate_rows"] == 0
