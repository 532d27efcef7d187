"""Factored solver: randomized eigendecomposition, operators, and queries."""

import numpy as np
import pytest

import hetsim
from hetsim.lowrank import (
    FactoredSimilarity,
    UpdateOperator,
    build_update_operator,
    factored_residual,
    randomized_eig,
    similarity_query,
    sweep_lowrank,
    top_k,
)


def planted_symmetric(n, eigenvalues, seed):
    """Dense symmetric matrix with a prescribed spectrum."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.zeros(n)
    lam[: len(eigenvalues)] = eigenvalues
    return (q * lam) @ q.T


class TestRandomizedEig:
    def test_exact_rank_one_recovery(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(30)
        v /= np.linalg.norm(v)
        u, d = randomized_eig(np.outer(v, v), rank=1, oversample=5, rng=rng)
        assert d[0] == pytest.approx(1.0, abs=1e-10)
        recon = (u * d) @ u.T
        assert np.abs(recon - np.outer(v, v)).max() <= 1e-10

    def test_zero_operator(self):
        rng = np.random.default_rng(1)
        _, d = randomized_eig(np.zeros((10, 10)), rank=2, oversample=3, rng=rng)
        np.testing.assert_allclose(d, 0.0, atol=1e-12)

    def test_tail_bound_against_exact_spectrum(self):
        lam = [5.0, 4.0, -3.0, 2.0, 1.5, 0.5, 0.2, 0.1]
        a = planted_symmetric(50, lam, seed=2)
        rng = np.random.default_rng(3)
        u, d = randomized_eig(a, rank=5, oversample=10, power=2, rng=rng)
        err = np.linalg.norm(a - (u * d) @ u.T, 2)
        assert err <= 2 * abs(lam[5])

    def test_negative_eigenvalues_kept(self):
        a = planted_symmetric(20, [3.0, -2.5, 0.1], seed=4)
        rng = np.random.default_rng(5)
        _, d = randomized_eig(a, rank=2, oversample=8, rng=rng)
        assert sorted(np.sign(d)) == [-1.0, 1.0]
        np.testing.assert_allclose(sorted(np.abs(d)), [2.5, 3.0], atol=1e-8)

    def test_rank_plus_oversample_bounded(self):
        with pytest.raises(ValueError):
            randomized_eig(np.eye(5), rank=3, oversample=4)

    def test_orthonormal_columns(self):
        a = planted_symmetric(40, [4, 3, 2, 1], seed=6)
        u, _ = randomized_eig(a, rank=4, oversample=6, rng=np.random.default_rng(7))
        np.testing.assert_allclose(u.T @ u, np.eye(4), atol=1e-8)

    def test_deterministic_given_seed(self):
        a = planted_symmetric(30, [2, 1.5, 1], seed=8)
        u1, d1 = randomized_eig(a, rank=3, rng=np.random.default_rng(9))
        u2, d2 = randomized_eig(a, rank=3, rng=np.random.default_rng(9))
        assert np.array_equal(u1, u2)
        assert np.array_equal(d1, d2)


class TestUpdateOperator:
    def _random_setup(self, seed):
        net = hetsim.random_network(hetsim.RandomNetworkSpec(k=3, n=20, seed=seed))
        weights = hetsim.default_weights(net)
        rng = np.random.default_rng(seed + 100)
        state = {}
        for t in net.types:
            k = min(4, t.size)
            u, _ = np.linalg.qr(rng.standard_normal((t.size, k)))
            state[t.name] = FactoredSimilarity(u, rng.standard_normal(k))
        return net, weights, state

    def test_self_adjoint_on_random_vectors(self):
        net, weights, state = self._random_setup(0)
        rng = np.random.default_rng(42)
        for t in net.types:
            op = build_update_operator(net, weights, state, t.name)
            n = op.shape[0]
            for _ in range(20):
                x, y = rng.standard_normal(n), rng.standard_normal(n)
                lhs = float(op.apply(x) @ y)
                rhs = float(x @ op.apply(y))
                bound = 1e-8 * np.linalg.norm(x) * np.linalg.norm(y)
                assert abs(lhs - rhs) <= bound

    def test_diagonal_matches_dense_materialization(self):
        net, weights, state = self._random_setup(1)
        for t in net.types:
            op = build_update_operator(net, weights, state, t.name)
            dense = op.apply(np.eye(t.size))
            np.testing.assert_allclose(op.diagonal(), np.diag(dense), atol=1e-12)

    def test_sparse_product_count_is_two_per_term(self):
        net, weights, state = self._random_setup(2)
        t = net.types[0]
        op = build_update_operator(net, weights, state, t.name)
        n_terms = len(op.terms)
        assert n_terms > 0
        op.apply(np.zeros(t.size))
        assert op.spmv_count == 2 * n_terms
        op.apply(np.zeros((t.size, 3)))
        assert op.spmv_count == 4 * n_terms


class TestSweepLowrank:
    def test_no_relations_keeps_identity(self):
        net = hetsim.build_network([("A", ["a1", "a2"])], [])
        state = {"A": FactoredSimilarity.identity(2)}
        new = sweep_lowrank(
            net, hetsim.default_weights(net), state, hetsim.SvdConfig(rank=1)
        )
        assert new["A"].rank == 0
        np.testing.assert_array_equal(new["A"].dense(), np.eye(2))

    def test_full_rank_matches_dense_sweep(self):
        for seed in range(5):
            net = hetsim.random_network(
                hetsim.RandomNetworkSpec(k=3, n=15, seed=seed)
            )
            weights = hetsim.default_weights(net)
            ranks = {t.name: t.size for t in net.types}
            cfg = hetsim.SvdConfig(rank=ranks, oversample=0, power=2, seed=0)
            fstate = {t.name: FactoredSimilarity.identity(t.size) for t in net.types}
            dstate = hetsim.SimilaritySet.identity(net)
            for _ in range(3):
                fstate = sweep_lowrank(net, weights, fstate, cfg)
                dstate = hetsim.dense.sweep(net, weights, dstate)
                for t in net.types:
                    diff = np.abs(fstate[t.name].dense() - dstate[t.name]).max()
                    assert diff <= 1e-6

    def test_diagonal_drift_reported_not_corrected(self):
        net = hetsim.random_network(hetsim.RandomNetworkSpec(k=3, n=20, seed=3))
        weights = hetsim.default_weights(net)
        state, _ = hetsim.solve_lowrank(
            net,
            weights,
            hetsim.SolverConfig(tol=1e-8, max_iter=60),
            hetsim.SvdConfig(rank=5, seed=0),
        )
        drifts = [f.diagonal_drift() for f in state.values()]
        assert all(d >= 0.0 for d in drifts)


class TestSolveLowrank:
    def test_full_rank_matches_dense_solution(self):
        for seed in range(5):
            net = hetsim.random_network(
                hetsim.RandomNetworkSpec(k=3, n=20, seed=seed)
            )
            weights = hetsim.default_weights(net)
            dstate, _ = hetsim.solve_dense(
                net, weights, hetsim.SolverConfig(tol=1e-11, max_iter=300)
            )
            ranks = {t.name: t.size for t in net.types}
            fstate, _ = hetsim.solve_lowrank(
                net,
                weights,
                hetsim.SolverConfig(tol=1e-11, max_iter=300),
                hetsim.SvdConfig(rank=ranks, oversample=0, power=2, seed=0),
            )
            for t in net.types:
                diff = np.abs(fstate[t.name].dense() - dstate[t.name]).max()
                assert diff <= 1e-6

    def test_factored_residual_matches_dense_residual(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            n, k1, k2 = 30, 4, 6
            u1, _ = np.linalg.qr(rng.standard_normal((n, k1)))
            u2, _ = np.linalg.qr(rng.standard_normal((n, k2)))
            f1 = FactoredSimilarity(u1, rng.standard_normal(k1))
            f2 = FactoredSimilarity(u2, rng.standard_normal(k2))
            dense = np.linalg.norm(f2.dense() - f1.dense())
            assert factored_residual(f1, f2) == pytest.approx(dense, abs=1e-8)

    def test_deterministic_across_runs(self):
        net = hetsim.random_network(hetsim.RandomNetworkSpec(k=3, n=25, seed=1))
        weights = hetsim.default_weights(net)
        cfg = hetsim.SolverConfig(tol=1e-9, max_iter=40)
        svd = hetsim.SvdConfig(rank=6, seed=123)
        s1, _ = hetsim.solve_lowrank(net, weights, cfg, svd)
        s2, _ = hetsim.solve_lowrank(net, weights, cfg, svd)
        for name in s1:
            assert np.array_equal(s1[name].U, s2[name].U)
            assert np.array_equal(s1[name].d, s2[name].d)


class TestQueries:
    def _state(self):
        rng = np.random.default_rng(10)
        u, _ = np.linalg.qr(rng.standard_normal((6, 2)))
        return FactoredSimilarity(u, np.array([0.8, -0.3]))

    def test_query_matches_dense_entry(self):
        f = self._state()
        dense = f.dense()
        for a in range(6):
            for b in range(6):
                assert similarity_query(f, a, b) == pytest.approx(
                    dense[a, b], abs=1e-12
                )

    def test_self_query_not_forced_to_one(self):
        f = self._state()
        assert similarity_query(f, 0, 0) != pytest.approx(1.0, abs=1e-6)

    def test_identity_state_queries(self):
        f = FactoredSimilarity.identity(4)
        assert similarity_query(f, 1, 1) == 1.0
        assert similarity_query(f, 1, 2) == 0.0
        results = top_k(f, 0, 3)
        assert results == [(1, 0.0), (2, 0.0), (3, 0.0)]

    def test_top_k_excludes_self_and_sorts(self):
        f = self._state()
        dense = f.dense()
        results = top_k(f, 2, 5)
        assert all(j != 2 for j, _ in results)
        scores = [s for _, s in results]
        assert scores == sorted(scores, reverse=True)
        # Scores come from the off-identity part of the factored form.
        expected = dense[2] - np.eye(6)[2]
        for j, s in results:
            assert s == pytest.approx(expected[j], abs=1e-12)

    def test_index_and_k_validation(self):
        f = self._state()
        with pytest.raises(IndexError):
            similarity_query(f, 0, 6)
        with pytest.raises(IndexError):
            top_k(f, -1, 2)
        with pytest.raises(ValueError):
            top_k(f, 0, 0)


class TestSvdConfig:
    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            hetsim.SvdConfig(rank=0)
        with pytest.raises(ValueError):
            hetsim.SvdConfig(rank=2, oversample=-1)
        with pytest.raises(ValueError):
            hetsim.SvdConfig(rank={"A": 0})

    def test_rank_clamped_to_size(self):
        cfg = hetsim.SvdConfig(rank=50)
        assert cfg.rank_for("A", 10) == 10
        cfg = hetsim.SvdConfig(rank={"A": 3})
        assert cfg.rank_for("A", 10) == 3
