import numpy as np
import pytest

from kronrank import linalg
from kronrank.errors import (
    IncompleteGraphError,
    InvalidInputError,
    NotPositiveSemidefiniteError,
    ResourceLimitError,
    UnsupportedCombinationError,
)
from kronrank.graph import GraphDataset, build_label_matrix, centering_matrix, complete_dataset
from kronrank.kernels import PairwiseKind, pairwise_kernel_matrix
from kronrank.solvers import (
    Objective,
    SolverKind,
    TrainConfig,
    check_inversion_identity,
    solve_dense_reference,
    solve_iterative,
    solve_ranking_closed_form,
    solve_regression_closed_form,
    solve_with_label_transform,
    train_dual,
)


def random_pd_kernel(rng, p, ridge=0.5):
    b = rng.standard_normal((p, p))
    return b @ b.T + ridge * np.eye(p)


def dataset_from_label_matrix(y, rng=None, d=3):
    p = y.shape[0]
    rng = rng or np.random.default_rng(0)
    return complete_dataset([f"n{i}" for i in range(p)], rng.standard_normal((p, d)), y)


class TestRegressionClosedForm:
    def test_scalar_case(self):
        a = solve_regression_closed_form([[1.0]], [[3.0]], 1.0)
        assert np.allclose(a, [[1.5]])

    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((4, 4))
        a = solve_regression_closed_form(np.eye(4), y, 0.25)
        assert np.max(np.abs(a - y / 1.25)) < 1e-12

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(1)
        p = 6
        k = random_pd_kernel(rng, p)
        y = rng.standard_normal((p, p))
        lam = 0.7
        a = solve_regression_closed_form(k, y, lam)
        system = np.kron(k, k) + lam * np.eye(p * p)
        expected = linalg.dense_solve(system, linalg.vec(y))
        got = linalg.vec(a)
        assert np.linalg.norm(got - expected) < 1e-8 * np.linalg.norm(expected)
        assert np.linalg.norm(system @ got - linalg.vec(y)) < 1e-8 * np.linalg.norm(linalg.vec(y))

    def test_residual_invariant_many_sizes(self):
        rng = np.random.default_rng(2)
        for p in range(3, 13):
            k = random_pd_kernel(rng, p)
            y = rng.standard_normal((p, p))
            lam = float(rng.uniform(0.1, 2.0))
            a = solve_regression_closed_form(k, y, lam)
            resid = linalg.kron_matvec(k, k, linalg.vec(a)) + lam * linalg.vec(a) - linalg.vec(y)
            assert np.linalg.norm(resid) < 1e-8 * np.linalg.norm(linalg.vec(y))

    def test_rejects_asymmetric_kernel(self):
        with pytest.raises(InvalidInputError):
            solve_regression_closed_form([[1.0, 2.0], [0.0, 1.0]], np.eye(2), 1.0)

    def test_rejects_indefinite_kernel(self):
        k = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues -1 and 3
        with pytest.raises(NotPositiveSemidefiniteError):
            solve_regression_closed_form(k, np.eye(2), 1.0)

    def test_rejects_zero_lambda(self):
        with pytest.raises(InvalidInputError):
            solve_regression_closed_form(np.eye(2), np.eye(2), 0.0)


class TestRankingClosedForm:
    def test_matches_dense_solve(self):
        rng = np.random.default_rng(3)
        for p in (3, 5, 6):
            k = random_pd_kernel(rng, p)
            y = rng.standard_normal((p, p))
            lam = 0.9
            a = solve_ranking_closed_form(k, y, lam)
            c = centering_matrix(p)
            system = np.kron(k, k @ c) + lam * np.eye(p * p)
            rhs = linalg.vec(c @ y)
            expected = linalg.dense_solve(system, rhs)
            got = linalg.vec(a)
            assert np.linalg.norm(got - expected) < 1e-8 * np.linalg.norm(expected)
            assert np.linalg.norm(system @ got - rhs) < 1e-8 * max(np.linalg.norm(rhs), 1.0)

    def test_constant_labels_give_zero(self):
        rng = np.random.default_rng(4)
        k = random_pd_kernel(rng, 4)
        a = solve_ranking_closed_form(k, np.full((4, 4), 2.5), 0.3)
        assert np.max(np.abs(a)) < 1e-12

    def test_invariant_under_per_start_shift(self):
        # adding a constant to each start node's labels leaves scores alone
        rng = np.random.default_rng(5)
        p = 5
        k = random_pd_kernel(rng, p)
        y = rng.standard_normal((p, p))
        shifts = rng.standard_normal(p)
        y_shifted = y + shifts[None, :]  # column start gets shifts[start]
        a1 = solve_ranking_closed_form(k, y, 0.8)
        a2 = solve_ranking_closed_form(k, y_shifted, 0.8)
        k_test = rng.standard_normal((6, p))
        h1 = k_test @ a1 @ k_test.T
        h2 = k_test @ a2 @ k_test.T
        assert np.max(np.abs(h1 - h2)) < 1e-9

    def test_semidefinite_kernel_jitter_keeps_residual_reasonable(self):
        rng = np.random.default_rng(6)
        p = 5
        b = rng.standard_normal((p, 2))
        k = b @ b.T  # rank 2, Cholesky needs jitter
        y = rng.standard_normal((p, p))
        lam = 0.5
        a = solve_ranking_closed_form(k, y, lam)
        c = centering_matrix(p)
        rhs = linalg.vec(c @ y)
        resid = np.kron(k, k @ c) @ linalg.vec(a) + lam * linalg.vec(a) - rhs
        assert np.linalg.norm(resid) < 1e-5 * np.linalg.norm(rhs)

    def test_rejects_symmetric_and_reciprocal_kinds(self):
        k = np.eye(3)
        y = np.zeros((3, 3))
        for kind in (PairwiseKind.SYMMETRIC, PairwiseKind.RECIPROCAL):
            with pytest.raises(UnsupportedCombinationError):
                solve_ranking_closed_form(k, y, 1.0, pairwise=kind)


class TestLabelTransform:
    def test_symmetric_labels_match_plain_regression(self):
        rng = np.random.default_rng(7)
        k = random_pd_kernel(rng, 4)
        y = rng.standard_normal((4, 4))
        y = 0.5 * (y + y.T)
        a_plain = solve_regression_closed_form(k, y, 0.6)
        a_sym = solve_with_label_transform(k, y, 0.6, PairwiseKind.SYMMETRIC)
        assert np.max(np.abs(a_plain - a_sym)) < 1e-12

    def test_symmetric_labels_reciprocal_kind_gives_zero(self):
        rng = np.random.default_rng(8)
        k = random_pd_kernel(rng, 4)
        y = rng.standard_normal((4, 4))
        y = 0.5 * (y + y.T)
        a = solve_with_label_transform(k, y, 0.6, PairwiseKind.RECIPROCAL)
        assert np.max(np.abs(a)) < 1e-12

    def test_rejects_ordinary_kind(self):
        with pytest.raises(InvalidInputError):
            solve_with_label_transform(np.eye(2), np.eye(2), 1.0, PairwiseKind.ORDINARY)

    @pytest.mark.parametrize("kind", [PairwiseKind.SYMMETRIC, PairwiseKind.RECIPROCAL])
    def test_predictions_match_dense_modified_kernel_rls(self, kind):
        # dual trained on (skew-)symmetrized labels with the ordinary kernel
        # predicts like dense ridge regression with the modified edge kernel
        rng = np.random.default_rng(9 if kind is PairwiseKind.SYMMETRIC else 10)
        p, c = 5, 8
        train = rng.standard_normal((p, 3))
        test = rng.standard_normal((c, 3))
        k_train = train @ train.T + 0.4 * np.eye(p)
        y = rng.standard_normal((p, p))
        lam = 0.8

        a_fast = solve_with_label_transform(k_train, y, lam, kind)

        kbar_mod = pairwise_kernel_matrix(kind, k_train)
        a_dense = linalg.dense_solve(kbar_mod + lam * np.eye(p * p), linalg.vec(y))

        k_cross = train @ test.T  # train x test node kernel, same inner product
        cross_mod = pairwise_kernel_matrix(kind, k_cross)
        dense_scores = (cross_mod.T @ a_dense).reshape((c, c), order="F")

        k_test_train = test @ train.T
        raw = k_test_train @ a_fast @ k_test_train.T
        fast_scores = 0.5 * (raw + raw.T) if kind is PairwiseKind.SYMMETRIC else 0.5 * (raw - raw.T)
        # dense grid is indexed [end, start] like the fast grid
        assert np.max(np.abs(fast_scores - dense_scores)) < 1e-7


class TestInversionIdentity:
    def test_zero_matrix(self):
        # both sides reduce to (1/lam) I on every probe
        dev = check_inversion_identity(np.zeros((3, 3)), 0.7, n_probes=4, seed=1)
        assert dev < 1e-12

    def test_random_matrix(self):
        rng = np.random.default_rng(11)
        n = rng.standard_normal((4, 4))
        assert check_inversion_identity(n, 0.1, n_probes=6, seed=2) < 1e-9

    def test_many_random_instances(self):
        rng = np.random.default_rng(12)
        for trial in range(10):
            p = int(rng.integers(2, 7))
            n = rng.standard_normal((p, p))
            lam = float(rng.uniform(0.1, 2.0))
            assert check_inversion_identity(n, lam, n_probes=4, seed=trial) < 1e-9

    def test_size_limit(self):
        with pytest.raises(ResourceLimitError):
            check_inversion_identity(np.eye(9), 1.0)

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(InvalidInputError):
            check_inversion_identity(np.eye(2), 0.0)


class TestIterative:
    def test_regression_matches_closed_form_on_complete_graph(self):
        rng = np.random.default_rng(13)
        p = 8
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        k = random_pd_kernel(rng, p)
        cfg = TrainConfig(
            objective=Objective.REGRESSION,
            lam=0.5,
            solver=SolverKind.ITERATIVE,
            max_iter=200,
            residual_tol=1e-13,
        )
        a_iter = solve_iterative(k, ds, cfg)
        a_closed = solve_regression_closed_form(k, y, 0.5)
        assert np.linalg.norm(a_iter - a_closed) < 1e-6 * np.linalg.norm(a_closed)

    def test_ranking_matches_closed_form_predictions(self):
        rng = np.random.default_rng(14)
        p = 8
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        k = random_pd_kernel(rng, p)
        cfg = TrainConfig(
            objective=Objective.RANKING,
            lam=0.5,
            solver=SolverKind.ITERATIVE,
            max_iter=200,
            residual_tol=1e-13,
        )
        a_iter = solve_iterative(k, ds, cfg)
        a_closed = solve_ranking_closed_form(k, y, 0.5)
        probe = rng.standard_normal((6, p))
        h_iter = probe @ a_iter @ probe.T
        h_closed = probe @ a_closed @ probe.T
        assert np.linalg.norm(h_iter - h_closed) < 1e-6 * np.linalg.norm(h_closed)

    def test_zero_iterations_returns_zero(self):
        rng = np.random.default_rng(15)
        ds = dataset_from_label_matrix(rng.standard_normal((3, 3)), rng)
        cfg = TrainConfig(lam=0.0, solver=SolverKind.ITERATIVE, max_iter=0)
        a = solve_iterative(np.eye(3), ds, cfg)
        assert np.array_equal(a, np.zeros((3, 3)))

    def test_callback_sees_every_iteration(self):
        rng = np.random.default_rng(16)
        p = 5
        ds = dataset_from_label_matrix(rng.standard_normal((p, p)), rng)
        k = random_pd_kernel(rng, p)
        seen = []

        def cb(iteration, current):
            seen.append((iteration, current.shape))

        cfg = TrainConfig(
            lam=0.5, solver=SolverKind.ITERATIVE, max_iter=7, residual_tol=0.0, callback=cb
        )
        solve_iterative(k, ds, cfg)
        assert [it for it, _ in seen] == list(range(1, 8))
        assert all(shape == (p, p) for _, shape in seen)

    def test_returned_iterate_is_best_residual(self):
        rng = np.random.default_rng(17)
        p = 6
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        k = random_pd_kernel(rng, p, ridge=0.05)
        from kronrank.solvers import _reduced_system

        cfg = TrainConfig(
            objective=Objective.RANKING,
            lam=0.01,
            solver=SolverKind.ITERATIVE,
            max_iter=25,
            residual_tol=0.0,
        )
        op, rhs = _reduced_system(k, ds, cfg)
        history = []
        cfg.callback = lambda it, cur: history.append(
            np.linalg.norm(rhs - op(linalg.vec(cur)))
        )
        a = solve_iterative(k, ds, cfg)
        final = np.linalg.norm(rhs - op(linalg.vec(a)))
        # returned residual cannot exceed any iterate's true residual by more
        # than the drift between recurrence and true residuals
        assert final <= min(history) * (1.0 + 1e-6) + 1e-12

    def test_incomplete_graph_supported(self):
        rng = np.random.default_rng(18)
        p = 6
        ds = GraphDataset(
            node_ids=[f"n{i}" for i in range(p)],
            features=rng.standard_normal((p, 3)),
            starts=rng.integers(0, p, size=15),
            ends=rng.integers(0, p, size=15),
            labels=rng.standard_normal(15),
        )
        k = random_pd_kernel(rng, p)
        cfg = TrainConfig(lam=0.3, solver=SolverKind.ITERATIVE, max_iter=100, residual_tol=1e-12)
        a = solve_iterative(k, ds, cfg)
        assert a.shape == (p, p)
        assert np.all(np.isfinite(a))

    def test_kernel_order_must_match(self):
        rng = np.random.default_rng(19)
        ds = dataset_from_label_matrix(rng.standard_normal((3, 3)), rng)
        cfg = TrainConfig(solver=SolverKind.ITERATIVE)
        with pytest.raises(InvalidInputError):
            solve_iterative(np.eye(4), ds, cfg)


class TestDenseReference:
    def test_agrees_with_regression_closed_form(self):
        rng = np.random.default_rng(20)
        p = 6
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        k = random_pd_kernel(rng, p)
        cfg = TrainConfig(objective=Objective.REGRESSION, lam=0.4)
        a_ref = solve_dense_reference(k, ds, cfg)
        a_closed = solve_regression_closed_form(k, y, 0.4)
        assert np.linalg.norm(a_ref - a_closed) < 1e-8 * np.linalg.norm(a_closed)

    def test_agrees_with_ranking_closed_form(self):
        rng = np.random.default_rng(21)
        p = 5
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        k = random_pd_kernel(rng, p)
        cfg = TrainConfig(objective=Objective.RANKING, lam=0.4)
        a_ref = solve_dense_reference(k, ds, cfg)
        a_closed = solve_ranking_closed_form(k, y, 0.4)
        assert np.linalg.norm(a_ref - a_closed) < 1e-8 * np.linalg.norm(a_closed)

    @pytest.mark.parametrize("objective", [Objective.REGRESSION, Objective.RANKING])
    @pytest.mark.parametrize("kind", [PairwiseKind.ORDINARY, PairwiseKind.SYMMETRIC, PairwiseKind.RECIPROCAL])
    def test_agrees_with_iterative_on_sparse_graph(self, objective, kind):
        rng = np.random.default_rng(22)
        p, q = 10, 20
        ds = GraphDataset(
            node_ids=[f"n{i}" for i in range(p)],
            features=rng.standard_normal((p, 3)),
            starts=rng.integers(0, p, size=q),
            ends=rng.integers(0, p, size=q),
            labels=rng.standard_normal(q),
        )
        k = random_pd_kernel(rng, p)
        cfg = TrainConfig(
            objective=objective,
            pairwise=kind,
            lam=0.6,
            solver=SolverKind.ITERATIVE,
            max_iter=400,
            residual_tol=1e-13,
        )
        a_iter = solve_iterative(k, ds, cfg)
        a_ref = solve_dense_reference(k, ds, cfg)
        scale = max(np.linalg.norm(a_ref), 1e-12)
        assert np.linalg.norm(a_iter - a_ref) < 1e-6 * scale

    def test_huge_lambda_shrinks_solution(self):
        rng = np.random.default_rng(23)
        p = 4
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        k = random_pd_kernel(rng, p)
        lam = 1e6
        cfg = TrainConfig(objective=Objective.REGRESSION, lam=lam)
        a = solve_dense_reference(k, ds, cfg)
        assert np.linalg.norm(linalg.vec(a)) < 2.0 * np.linalg.norm(ds.labels) / lam

    def test_cap_enforced(self):
        rng = np.random.default_rng(24)
        p = 120  # p^4 > 1e8
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        with pytest.raises(ResourceLimitError):
            solve_dense_reference(np.eye(p), ds, TrainConfig(lam=1.0))


class TestRankingAsRegressionIdentity:
    def test_common_minimizer_on_centered_labels(self):
        # with block-centered labels, (L Kbar + lam I)^{-1} L y equals
        # (L Kbar L + lam I)^{-1} y
        rng = np.random.default_rng(25)
        for p in (3, 4, 5):
            k = random_pd_kernel(rng, p)
            kbar = np.kron(k, k)
            c = centering_matrix(p)
            l_mat = np.kron(np.eye(p), c)
            y = l_mat @ rng.standard_normal(p * p)  # block-centered
            lam = 0.7
            eye = np.eye(p * p)
            lhs = linalg.dense_solve(l_mat @ kbar + lam * eye, l_mat @ y)
            rhs = linalg.dense_solve(l_mat @ kbar @ l_mat + lam * eye, y)
            assert np.linalg.norm(lhs - rhs) < 1e-8 * np.linalg.norm(rhs)


class TestTrainDispatch:
    def test_closed_requires_positive_lambda(self):
        rng = np.random.default_rng(26)
        ds = dataset_from_label_matrix(rng.standard_normal((3, 3)), rng)
        with pytest.raises(InvalidInputError):
            train_dual(np.eye(3), ds, TrainConfig(lam=0.0, solver=SolverKind.CLOSED_FORM))

    def test_closed_rejects_incomplete_graph(self):
        rng = np.random.default_rng(27)
        ds = GraphDataset(
            node_ids=["a", "b"],
            features=np.eye(2),
            starts=[0],
            ends=[1],
            labels=[1.0],
        )
        with pytest.raises(IncompleteGraphError):
            train_dual(np.eye(2), ds, TrainConfig(lam=1.0))

    def test_closed_ranking_symmetric_fails_fast(self):
        rng = np.random.default_rng(28)
        ds = dataset_from_label_matrix(rng.standard_normal((3, 3)), rng)
        cfg = TrainConfig(
            objective=Objective.RANKING, pairwise=PairwiseKind.SYMMETRIC, lam=1.0
        )
        with pytest.raises(UnsupportedCombinationError):
            train_dual(np.eye(3), ds, cfg)

    def test_label_transform_path(self):
        rng = np.random.default_rng(29)
        p = 4
        y = rng.standard_normal((p, p))
        ds = dataset_from_label_matrix(y, rng)
        k = random_pd_kernel(rng, p)
        cfg = TrainConfig(pairwise=PairwiseKind.RECIPROCAL, lam=0.5)
        a = train_dual(k, ds, cfg)
        expected = solve_with_label_transform(k, y, 0.5, PairwiseKind.RECIPROCAL)
        assert np.array_equal(a, expected)

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            TrainConfig(lam=-1.0)
        with pytest.raises(InvalidInputError):
            TrainConfig(max_iter=-1)
        with pytest.raises(InvalidInputError):
            TrainConfig(residual_tol=-0.1)
