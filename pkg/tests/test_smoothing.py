import itertools

import numpy as np
import pytest

from sceneparse.errors import InvalidInputError
from sceneparse.segmentation import SuperPixelMap
from sceneparse.smoothing import (
    MrfProblem,
    alpha_beta_swap,
    build_cooccurrence,
    build_problem,
    check_semi_metric,
    data_term,
    gradient_weights,
    label_cost_matrix,
    pairwise_term,
    write_energy_trace,
)

from conftest import grid_edges


def random_problem(rng, h, w, n_labels, lam=1.0):
    a, b = grid_edges(h, w)
    V = np.triu(rng.random((n_labels, n_labels)), 1)
    return MrfProblem(rng.random((h * w, n_labels)), a, b, rng.random(a.size), V + V.T, lam)


class TestCooccurrence:
    def test_single_label(self):
        P = build_cooccurrence([np.zeros((3, 3), dtype=np.uint8)], 2, eps=0).P
        assert P[0, 0] == 1.0

    def test_checkerboard(self):
        m = (np.indices((4, 4)).sum(axis=0) % 2).astype(np.uint8)
        P = build_cooccurrence([m], 2, eps=0).P
        assert P[0, 1] == 1.0 and P[1, 0] == 1.0

    def test_two_by_two(self):
        m = np.array([[0, 0], [0, 1]], dtype=np.uint8)
        P = build_cooccurrence([m], 2, eps=0).P
        assert P[0, 1] == 1.0
        assert P[0, 0] == pytest.approx(2 / 3)
        assert P[1, 0] == pytest.approx(1 / 3)

    def test_void_excluded_and_columns_normalised(self):
        rng = np.random.default_rng(0)
        m = rng.choice([0, 1, 2, 255], (10, 10)).astype(np.uint8)
        cooc = build_cooccurrence([m], 4)
        np.testing.assert_allclose(cooc.P.sum(axis=0), 1.0, atol=1e-12)
        assert cooc.counts[3].sum() == 0

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            build_cooccurrence([np.full((3, 3), 255, dtype=np.uint8)], 2)


class TestTerms:
    def test_data_term_examples(self):
        spmap = SuperPixelMap(np.zeros((5, 6), dtype=np.int32))
        D = data_term(np.array([[np.e ** 2, 1.0]]), spmap)
        assert D.shape == (30, 2)
        np.testing.assert_allclose(D, np.tile([-2.0, 0.0], (30, 1)))
        np.testing.assert_allclose(data_term(np.ones((1, 3)), spmap), 0.0)

    def test_data_term_floor(self):
        spmap = SuperPixelMap(np.zeros((1, 1), dtype=np.int32))
        D = data_term(np.array([[0.0, np.inf]]), spmap)
        assert np.isfinite(D).all()

    def test_pairwise_examples(self):
        P = np.array([[0.9, 0.1], [0.1, 0.9]])
        assert pairwise_term(0, 0, P, 0.5) == 0.0
        assert pairwise_term(0, 1, P, 0.5) == pytest.approx(0.5 * -np.log(0.1))
        assert pairwise_term(0, 1, P, 0.5) == pytest.approx(1.151, abs=5e-4)
        assert pairwise_term(0, 1, np.ones((2, 2)), 0.7) == 0.0

    def test_label_cost_semi_metric(self):
        rng = np.random.default_rng(1)
        P = rng.random((5, 5))
        P[0, 3] = P[3, 0] = 0.0
        V = label_cost_matrix(P / P.sum(axis=0))
        check_semi_metric(V)
        assert V[0, 3] == pytest.approx(-np.log(1e-6))

    def test_semi_metric_violation(self):
        with pytest.raises(InvalidInputError):
            check_semi_metric(np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(InvalidInputError):
            check_semi_metric(np.array([[1.0, 1.0], [1.0, 0.0]]))

    def test_gradient_weights_sum_to_one(self):
        rng = np.random.default_rng(2)
        _, _, xi = gradient_weights(rng.integers(0, 256, (7, 9, 3)))
        assert xi.sum() == pytest.approx(1.0) and (xi >= 0).all()
        _, _, flat = gradient_weights(np.zeros((4, 4, 3)))
        np.testing.assert_allclose(flat, 1.0 / 24)

    def test_build_problem(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (4, 5, 3))
        spmap = SuperPixelMap(np.repeat([[0, 0, 1, 1, 1]], 4, axis=0))
        cooc = build_cooccurrence([np.zeros((3, 3), dtype=np.uint8), np.ones((3, 3), dtype=np.uint8)], 2)
        pr = build_problem(img, rng.random((2, 2)) + 0.1, spmap, cooc)
        assert pr.unary.shape == (20, 2) and pr.edge_a.size == 31
        assert pr.lam == 16.0


class TestSwap:
    def test_lambda_zero_is_unary_argmin(self, backend):
        rng = np.random.default_rng(4)
        pr = random_problem(rng, 5, 5, 4, lam=0.0)
        res = alpha_beta_swap(pr, rng.integers(0, 4, 25))
        np.testing.assert_array_equal(res.labels, pr.unary.argmin(axis=1))

    def test_two_label_exact(self, backend):
        rng = np.random.default_rng(5)
        for _ in range(20):
            pr = random_problem(rng, 3, 3, 2, lam=float(rng.random() * 3))
            best = min(pr.energy(np.array(l)) for l in itertools.product(range(2), repeat=9))
            res = alpha_beta_swap(pr, pr.unary.argmin(axis=1))
            assert res.energy == pytest.approx(best, rel=1e-9, abs=1e-12)

    def test_energy_trace_monotone(self, backend, tmp_path):
        rng = np.random.default_rng(6)
        pr = random_problem(rng, 6, 6, 4, lam=3.0)
        res = alpha_beta_swap(pr, rng.integers(0, 4, 36))
        assert res.energy <= res.initial_energy
        assert res.trace
        for _, _, _, before, after in res.trace:
            assert after < before
        assert res.energy == pytest.approx(pr.energy(res.labels))
        path = tmp_path / "trace.csv"
        write_energy_trace(path, res)
        assert len(path.read_text().splitlines()) == len(res.trace) + 1

    def test_result_is_swap_local_optimum(self, backend):
        rng = np.random.default_rng(7)
        pr = random_problem(rng, 5, 5, 3, lam=2.0)
        res = alpha_beta_swap(pr, pr.unary.argmin(axis=1), max_sweeps=50)
        again = alpha_beta_swap(pr, res.labels)
        assert again.energy == pytest.approx(res.energy) and not again.trace

    def test_backends_give_same_energy(self):
        from sceneparse import kernels

        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(8)
        pr = random_problem(rng, 8, 8, 4, lam=4.0)
        start = pr.unary.argmin(axis=1)
        energies = []
        for name in ("python", "cython"):
            impl = kernels.get_backend(name)
            orig = kernels.maxflow
            kernels.maxflow = impl.maxflow
            try:
                energies.append(alpha_beta_swap(pr, start).energy)
            finally:
                kernels.maxflow = orig
        assert energies[0] == pytest.approx(energies[1], rel=1e-12)

    def test_bad_initial(self):
        rng = np.random.default_rng(9)
        pr = random_problem(rng, 2, 2, 2)
        with pytest.raises(InvalidInputError):
            alpha_beta_swap(pr, [0, 1, 2, 0])
        with pytest.raises(InvalidInputError):
            alpha_beta_swap(pr, [0, 1])

    def test_problem_validation(self):
        a, b = grid_edges(2, 2)
        with pytest.raises(InvalidInputError):
            MrfProblem(np.full((4, 2), np.inf), a, b, np.ones(a.size), np.zeros((2, 2)))
        with pytest.raises(InvalidInputError):
            MrfProblem(np.zeros((4, 2)), a, b, -np.ones(a.size), np.zeros((2, 2)))
