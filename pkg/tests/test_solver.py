import numpy as np
import pytest

from dot import (AbundancePrior, ConfigurationError, NumericalError, ObjectiveWeights,
                 SolverConfig, TransferMap, atom_solution, auto_parameters, frank_wolfe,
                 fw_gap, initial_solution, ridge_estimate, total_gradient)
from dot.testkit import exhaustive_atom_oracle

from test_distances import scalar_cosine_distance
from test_objective import interior_Y, make_problem


class TestAtomSolution:
    def test_negative_minimum_gets_upper_bound(self):
        atom = atom_solution(np.array([[0.5], [-0.3]]), [5.0])
        np.testing.assert_allclose(atom, [[0.0], [5.0]])

    def test_positive_minimum_gets_lower_bound(self):
        atom = atom_solution(np.array([[0.2], [0.7]]), [5.0])
        np.testing.assert_allclose(atom, [[1.0], [0.0]])

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(50)
        for _ in range(200):
            n_cat = int(rng.integers(2, 7))
            grad = rng.normal(0, 1, (n_cat, 1))
            n_i = float(rng.choice([1, 2, 5, 10]))
            got = atom_solution(grad, [n_i])[:, 0]
            want = exhaustive_atom_oracle(grad[:, 0], n_i)
            np.testing.assert_array_equal(got, want)

    def test_tie_cases(self):
        # equal entries: smallest index wins; zero entry: magnitude 1 wins
        atom = atom_solution(np.array([[0.4], [0.4]]), [3.0])
        np.testing.assert_allclose(atom, [[1.0], [0.0]])
        atom = atom_solution(np.array([[0.0], [0.5]]), [3.0])
        np.testing.assert_allclose(atom, [[1.0], [0.0]])
        # discrete gradient values force many cross-column ties
        rng = np.random.default_rng(51)
        for _ in range(200):
            grad = rng.choice([-1.0, 0.0, 1.0], size=(4, 1))
            for n_i in (1.0, 2.0, 5.0, 10.0):
                got = atom_solution(grad, [n_i])[:, 0]
                want = exhaustive_atom_oracle(grad[:, 0], n_i)
                np.testing.assert_array_equal(got, want)

    def test_vertex_exactness(self):
        # <atom, g> must match the minimum over all feasible vertices.
        rng = np.random.default_rng(52)
        for _ in range(100):
            n_cat = int(rng.integers(2, 6))
            g = rng.normal(0, 2, n_cat)
            n_i = float(rng.choice([1, 3, 8]))
            atom = atom_solution(g[:, None], [n_i])[:, 0]
            vertex_values = [scale * g[c] for c in range(n_cat) for scale in (1.0, n_i)]
            assert atom @ g == pytest.approx(min(vertex_values), rel=1e-12, abs=1e-12)


class TestFwGap:
    def test_gap_zero_at_atom(self):
        Y = np.array([[1.0, 0.0], [0.0, 1.0]])
        grad = np.array([[0.1, 0.5], [0.7, 0.2]])
        atom = atom_solution(grad, [1.0, 1.0])
        assert fw_gap(atom, atom, grad) == 0.0

    def test_hand_computed_value(self):
        Y = np.full((2, 1), 0.5)
        grad = np.array([[2.0], [4.0]])
        atom = atom_solution(grad, [1.0])  # mass on row 0
        # (0.5-1)*2 + (0.5-0)*4 = 1.0
        assert fw_gap(Y, atom, grad) == pytest.approx(1.0)

    def test_zero_gradient(self):
        Y = np.full((3, 2), 0.4)
        grad = np.zeros((3, 2))
        atom = atom_solution(grad, [1.0, 1.0])
        assert fw_gap(Y, atom, grad) == 0.0

    def test_suboptimal_atom_rejected(self):
        Y = np.array([[1.0], [0.0]])
        grad = np.array([[1.0], [2.0]])
        bad_atom = np.array([[0.0], [1.0]])  # worse than Y itself
        with pytest.raises(NumericalError):
            fw_gap(Y, bad_atom, grad)


def oracle_ridge(X_r, X_s):
    """Augmented least-squares oracle solved column by column."""
    n_cat = X_r.shape[0]
    design = np.vstack([X_r.T, np.eye(n_cat)])
    out = np.empty((n_cat, X_s.shape[0]))
    for i in range(X_s.shape[0]):
        target = np.concatenate([X_s[i], np.zeros(n_cat)])
        sol, *_ = np.linalg.lstsq(design, target, rcond=None)
        out[:, i] = sol
    return np.clip(out, 0.0, None)


class TestRidgeEstimate:
    def test_identity_profiles(self):
        eye = np.eye(4)
        Y0, n_hat = ridge_estimate(eye, eye)
        np.testing.assert_allclose(Y0, 0.5 * np.eye(4), atol=1e-12)
        assert n_hat == pytest.approx(2.0)

    def test_zero_spots(self):
        Y0, n_hat = ridge_estimate(np.eye(3), np.zeros((5, 3)))
        np.testing.assert_allclose(Y0, 0.0)
        assert n_hat == 0.0

    def test_matches_lstsq_oracle(self):
        rng = np.random.default_rng(53)
        X_r = rng.gamma(2.0, 1.0, (5, 8))
        X_s = rng.gamma(2.0, 1.0, (12, 8))
        Y0, n_hat = ridge_estimate(X_r, X_s)
        want = oracle_ridge(X_r, X_s)
        np.testing.assert_allclose(Y0, want, rtol=1e-8, atol=1e-10)
        assert n_hat == pytest.approx(want.sum(), rel=1e-10)


class TestInitialSolution:
    def test_nearest_part_is_permutation(self):
        rng = np.random.default_rng(54)
        problem = make_problem(rng, n_cat=4, n_spots=4, n_genes=6)
        X_r = problem.ref.centroids
        perm = np.array([2, 0, 3, 1])
        spatial = type(problem.spatial)(X_r[perm], problem.spatial.coordinates,
                                        np.arange(6))
        clone = type(problem)(problem.ref, spatial, problem.pairs, problem.prior)
        np.testing.assert_array_equal(clone.nearest_category(), perm)

    def test_uniform_fill_when_prior_disabled(self):
        rng = np.random.default_rng(55)
        problem = make_problem(rng, n_cat=4, n_spots=5)
        start = initial_solution(problem, 1.0)
        # third component contributes 0.2 * 1/4 = 0.05 everywhere
        assert np.all(start.values >= 0.05 - 1e-12)

    def test_component_sum_oracle(self):
        rng = np.random.default_rng(56)
        problem = make_problem(rng, n_cat=3, n_spots=6, n_genes=5, prior=True)
        n = 4.0
        X_r, X_s = problem.ref.centroids, problem.spot_shared

        nearest = np.zeros((3, 6))
        for i in range(6):
            dists = [scalar_cosine_distance(X_s[i].tolist(), X_r[c].tolist()) for c in range(3)]
            nearest[int(np.argmin(dists)), i] = n

        ridge = oracle_ridge(X_r, X_s)
        sums = ridge.sum(axis=0)
        for i in range(6):
            if sums[i] == 0:
                ridge[:, i] = 1.0 / 3
            else:
                ridge[:, i] *= min(max(sums[i], 1.0), n) / sums[i]

        share = problem.prior.values / problem.prior.values.sum()
        fill = np.tile(share[:, None] * n, (1, 6))

        want = 0.4 * nearest + 0.4 * ridge + 0.2 * fill
        s = want.sum(axis=0)
        want *= np.clip(s, 1.0, n) / s
        got = initial_solution(problem, n)
        np.testing.assert_allclose(got.values, want, rtol=1e-7, atol=1e-9)

    def test_feasible(self):
        rng = np.random.default_rng(57)
        problem = make_problem(rng, n_cat=5, n_spots=9, prior=True)
        for n in (1.0, 3.0, 10.0):
            start = initial_solution(problem, n)
            sums = start.values.sum(axis=0)
            assert np.all(sums >= 1 - 1e-9) and np.all(sums <= n + 1e-9)


class TestAutoParameters:
    def test_reference_dimensions(self):
        prior = AbundancePrior(np.ones(10), enabled=True)
        params = auto_parameters(100, 10, 50, 80, prior, resolution="low", n_estimate=500.0)
        w = params.weights
        assert w.lambda_c == 10.0
        assert w.lambda_g == 2.0
        assert params.spot_bound == 5.0
        assert w.lambda_s == pytest.approx(100.0 / 400.0)
        assert w.lambda_a == pytest.approx(0.2)
        assert w.theta == 0.0
        assert params.prior.values.sum() == pytest.approx(500.0)

    def test_high_resolution_defaults(self):
        params = auto_parameters(100, 10, 50, 80, AbundancePrior.disabled(), resolution="high")
        assert params.spot_bound == 1.0
        assert params.weights.theta == 1.0
        assert params.weights.lambda_c == 10.0
        assert params.weights.lambda_g == 2.0
        assert params.weights.lambda_a == 0.0

    def test_high_resolution_prior_scaled_to_spot_count(self):
        prior = AbundancePrior(np.array([3.0, 1.0]), enabled=True)
        params = auto_parameters(100, 2, 50, 0, prior, resolution="high", n_estimate=731.0)
        assert params.weights.lambda_a == 1.0
        assert params.prior.values.sum() == pytest.approx(100.0)
        np.testing.assert_allclose(params.prior.values, [75.0, 25.0])

    def test_empty_pairs(self):
        params = auto_parameters(100, 10, 50, 0, AbundancePrior.disabled(), resolution="high")
        assert params.weights.lambda_s == 0.0

    def test_overrides_win(self):
        params = auto_parameters(
            100, 10, 50, 80, AbundancePrior.disabled(), resolution="high",
            overrides={"lambda_c": 3.5, "theta": 0.25, "n": 2.0},
        )
        assert params.weights.lambda_c == 3.5
        assert params.weights.theta == 0.25
        assert params.spot_bound == 2.0
        assert params.weights.lambda_s == pytest.approx(100.0 / (2.0 * 80))

    def test_ceil_rule(self):
        params = auto_parameters(100, 4, 20, 0, AbundancePrior.disabled(),
                                 resolution="low", n_estimate=101.0)
        assert params.spot_bound == 2.0

    def test_low_resolution_requires_estimate(self):
        with pytest.raises(ConfigurationError):
            auto_parameters(100, 4, 20, 0, AbundancePrior.disabled(), resolution="low")


class TestFrankWolfe:
    def test_stationary_start_returns_immediately(self):
        rng = np.random.default_rng(58)
        problem = make_problem(rng, n_cat=3, n_spots=5)
        weights = ObjectiveWeights(theta=1.0, sparsity_scale=1.0)
        grad = total_gradient(np.ones((3, 5)) / 3, problem, weights)  # constant in Y
        start = TransferMap(atom_solution(grad, np.ones(5)), np.ones(5))
        Y, report = frank_wolfe(problem, weights, 1.0, initial=start)
        assert report.iterations == 0
        assert len(report.objective_trajectory) == 1
        assert len(report.gap_trajectory) == 1
        assert report.gap_trajectory[0] == pytest.approx(0.0, abs=1e-12)
        assert report.stopped_by == "gap"

    def test_linear_objective_converges_to_nearest_centroid(self):
        rng = np.random.default_rng(59)
        problem = make_problem(rng, n_cat=4, n_spots=10)
        weights = ObjectiveWeights(theta=1.0, sparsity_scale=1.0)
        Y, report = frank_wolfe(problem, weights, 1.0,
                                SolverConfig(max_iterations=400, tolerance=1e-12))
        nearest = problem.nearest_category()
        np.testing.assert_array_equal(np.argmax(Y.values, axis=0), nearest)
        one_hot = np.zeros_like(Y.values)
        one_hot[nearest, np.arange(10)] = 1.0
        np.testing.assert_allclose(Y.values, one_hot, atol=1e-3)

    def test_feasibility_and_steps_along_the_way(self):
        rng = np.random.default_rng(60)
        problem = make_problem(rng, n_cat=4, n_spots=8, prior=True)
        n = 3.0
        weights = ObjectiveWeights(1.0, 1.0, 1.0, 1.0, theta=0.5, sparsity_scale=n)
        seen = []

        def watch(state):
            sums = state.iterate.sum(axis=0)
            assert np.all(sums >= 1 - 1e-9) and np.all(sums <= n + 1e-9)
            seen.append((state.iteration, state.step))

        config = SolverConfig(max_iterations=25, callback=watch)
        Y, report = frank_wolfe(problem, weights, n, config)
        assert [s[0] for s in seen] == list(range(len(seen)))
        for t, step in seen:
            assert step == 2.0 / (2.0 + t)
        sums = Y.values.sum(axis=0)
        assert np.all(sums >= 1 - 1e-9) and np.all(sums <= n + 1e-9)
        assert len(report.objective_trajectory) == report.iterations + 1
        assert len(report.gap_trajectory) == report.iterations + 1

    def test_gaps_stay_non_negative(self):
        rng = np.random.default_rng(61)
        problem = make_problem(rng, n_cat=3, n_spots=6, prior=True)
        weights = ObjectiveWeights(0.5, 0.5, 0.5, 0.5, theta=0.2, sparsity_scale=2.0)
        _, report = frank_wolfe(problem, weights, 2.0, SolverConfig(max_iterations=40))
        assert min(report.gap_trajectory) >= -1e-9

    def test_deterministic(self):
        rng = np.random.default_rng(62)
        problem = make_problem(rng, n_cat=4, n_spots=12, prior=True)
        weights = ObjectiveWeights(1.0, 0.5, 1.0, 0.5, theta=0.3, sparsity_scale=2.0)
        Y1, r1 = frank_wolfe(problem, weights, 2.0, SolverConfig(max_iterations=30))
        Y2, r2 = frank_wolfe(problem, weights, 2.0, SolverConfig(max_iterations=30))
        np.testing.assert_array_equal(Y1.values, Y2.values)
        assert r1.objective_trajectory == r2.objective_trajectory

    def test_objective_decreases_on_planted_instance(self):
        from dot import NoiseSpec, build_spatial_pairs, synth_planted
        from dot.types import TransferProblem

        ref, spatial, _ = synth_planted(4, 30, 100, separation=0.5,
                                        noise=NoiseSpec(0.25, seed=8), seed=8)
        pairs = build_spatial_pairs(spatial)
        params = auto_parameters(100, 4, 30, len(pairs), AbundancePrior.disabled(),
                                 resolution="high")
        problem = TransferProblem(ref, spatial, pairs, params.prior)
        Y, report = frank_wolfe(problem, params.weights, params.spot_bound,
                                SolverConfig(max_iterations=100))
        assert report.objective_trajectory[-1] <= report.objective_trajectory[0]
        gaps = np.array(report.gap_trajectory)
        assert gaps.min() <= gaps[0] / 10
