import numpy as np
import pytest

from sceneparse.errors import DegenerateRetrievalError, InvalidInputError
from sceneparse.retrieval import (
    TrainingIndex,
    build_retrieval_set,
    knn_batch,
    knn_superpixels,
    retrieval_cutoff,
    write_retrieval_csv,
)

from oracles import knn_bruteforce, retrieval_oracle


def three_image_fixture():
    """Image A holds exact copies of the four queries; B and C lie far away."""
    Q = np.array([[0.0], [1.0], [2.0], [3.0]])
    T = np.array([[0.0], [1.0], [2.0], [3.0], [10.0], [11.0], [20.0], [21.0], [22.0]])
    image_of = np.array([0, 0, 0, 0, 1, 1, 2, 2, 2])
    index = TrainingIndex(T, image_of, np.zeros(9, dtype=np.int64), 3, 1, ("A", "B", "C"))
    return Q, index


def random_index(rng, n_images=6, per=(3, 9), d=3, n_labels=4):
    counts = rng.integers(per[0], per[1], n_images)
    image_of = np.repeat(np.arange(n_images), counts)
    T = rng.normal(size=(image_of.size, d))
    labels = rng.integers(0, n_labels, image_of.size)
    return TrainingIndex(T, image_of, labels, n_images, n_labels)


class TestKnn:
    def test_self_query_first(self):
        rng = np.random.default_rng(0)
        T = rng.normal(size=(30, 4))
        idx, dist = knn_superpixels(T[7], T, 5)
        assert idx[0] == 7 and dist[0] == 0.0

    def test_k_larger_than_index(self):
        T = np.arange(12.0).reshape(6, 2)
        idx, _ = knn_superpixels(np.zeros(2), T, 50)
        np.testing.assert_array_equal(idx, np.arange(6))

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(1)
        T = rng.normal(size=(50, 3))
        for q in rng.normal(size=(20, 3)):
            got = knn_superpixels(q, T, 5)
            exp = knn_bruteforce(q, T, 5)
            np.testing.assert_array_equal(got[0], exp[0])
            np.testing.assert_array_equal(got[1], exp[1])

    def test_ties_by_index(self):
        T = np.array([[1.0], [-1.0], [1.0], [-1.0], [5.0]])
        idx, dist = knn_superpixels(np.zeros(1), T, 3)
        np.testing.assert_array_equal(idx, [0, 1, 2])
        np.testing.assert_array_equal(dist, [1.0, 1.0, 1.0])

    def test_candidates(self):
        T = np.arange(10.0)[:, None]
        idx, _ = knn_superpixels(np.zeros(1), T, 2, candidates=np.array([9, 4, 6]))
        np.testing.assert_array_equal(idx, [4, 6])

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            knn_superpixels(np.zeros(1), np.zeros((0, 1)), 3)
        with pytest.raises(InvalidInputError):
            knn_superpixels(np.zeros(1), np.zeros((2, 1)), 0)

    def test_distance_order_scale_invariant(self):
        rng = np.random.default_rng(2)
        T = rng.normal(size=(40, 3))
        q = rng.normal(size=3)
        a, _ = knn_superpixels(q, T, 40)
        b, _ = knn_superpixels(3.5 * q, 3.5 * T, 40)
        np.testing.assert_array_equal(a, b)

    def test_batch_padding(self):
        T = np.arange(3.0)[:, None]
        eta, delta = knn_batch(np.zeros((2, 1)), T, 5)
        assert eta.shape == (2, 3) and np.isfinite(delta).all()


class TestRetrievalSet:
    def test_single_image(self, backend):
        idx = TrainingIndex(np.eye(3), np.zeros(3, dtype=np.int64), np.zeros(3, dtype=np.int64), 1, 1)
        for tau in (0.1, 0.5, 1.0):
            rs = build_retrieval_set(np.ones((2, 3)), idx, 10, tau)
            assert rs.k_r == 1 and list(rs.retrieved) == [0]

    def test_copy_image_ranked_first(self, backend):
        Q, index = three_image_fixture()
        rs = build_retrieval_set(Q, index, 9, 0.3)
        assert list(rs.images) == [0, 1, 2]
        np.testing.assert_allclose(rs.scores, [1e9, 0.1, 0.05], rtol=1e-15)
        assert rs.k_r == 1
        assert build_retrieval_set(Q, index, 9, 1.0).k_r == 3

    def test_matches_oracle_on_random_indices(self, backend):
        rng = np.random.default_rng(3)
        for _ in range(25):
            index = random_index(rng)
            Q = rng.normal(size=(int(rng.integers(1, 12)), 3))
            k_m = int(rng.integers(1, 30))
            tau = float(rng.uniform(0.05, 1.0))
            rs = build_retrieval_set(Q, index, k_m, tau)
            ranking, scores, k_r = retrieval_oracle(Q, index.features, index.image_of, index.n_images, k_m, tau)
            assert list(rs.images) == ranking
            np.testing.assert_array_equal(rs.scores, scores)
            assert rs.k_r == k_r

    def test_uniqueness_of_votes(self, backend):
        # identical queries: each training super-pixel can be claimed once
        T = np.array([[0.0], [0.5]])
        index = TrainingIndex(T, np.array([0, 0]), np.array([0, 0]), 1, 1)
        rs = build_retrieval_set(np.zeros((3, 1)), index, 2, 0.3)
        # votes 1e9 (exact copy) + 2 (0.5 away), third query finds nothing
        assert rs.raw_votes[0] == pytest.approx(1e9 + 2.0)

    def test_invariants(self, backend):
        rng = np.random.default_rng(4)
        for _ in range(20):
            index = random_index(rng)
            Q = rng.normal(size=(6, 3))
            tau = float(rng.uniform(0.05, 1.0))
            rs = build_retrieval_set(Q, index, 20, tau)
            assert np.all(np.diff(rs.scores) <= 0)
            assert 1 <= rs.k_r <= rs.images.size
            share = np.cumsum(rs.scores) / rs.scores.sum()
            assert share[rs.k_r - 1] >= tau - 1e-12
            if rs.k_r > 1:
                assert share[rs.k_r - 2] < tau - 1e-12

    def test_exclude_image(self, backend):
        Q, index = three_image_fixture()
        rs = build_retrieval_set(Q, index, 9, 0.3, exclude_image=0)
        assert 0 not in rs.images and list(rs.images) == [1, 2]

    def test_query_order_changes_nothing_for_exact_copies(self, backend):
        Q, index = three_image_fixture()
        rs = build_retrieval_set(Q, index, 9, 0.3, query_order=[3, 1, 0, 2])
        assert list(rs.images)[0] == 0

    def test_degenerate(self):
        with pytest.raises(DegenerateRetrievalError):
            retrieval_cutoff(np.zeros(3), 0.3)

    def test_bad_tau(self):
        Q, index = three_image_fixture()
        with pytest.raises(InvalidInputError):
            build_retrieval_set(Q, index, 9, 0.0)

    def test_csv(self, tmp_path):
        Q, index = three_image_fixture()
        rs = build_retrieval_set(Q, index, 9, 0.3)
        path = tmp_path / "r.csv"
        write_retrieval_csv(path, rs, index.image_names)
        lines = path.read_text().splitlines()
        assert lines[0] == "rank,image,name,score,in_set"
        assert lines[1].startswith("1,0,A,") and lines[1].endswith(",1")
        assert len(lines) == 4


class TestTrainingIndex:
    def test_counts(self):
        index = TrainingIndex(np.zeros((5, 2)), [0, 0, 1, 2, 2], [1, 0, 1, 1, 2], 3, 3)
        np.testing.assert_array_equal(index.per_image_counts, [2, 1, 2])
        np.testing.assert_array_equal(index.label_counts, [1, 3, 1])
        assert index.per_image_counts.sum() == index.size

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            TrainingIndex(np.zeros((2, 2)), [0, 3], [0, 0], 2, 1)
        with pytest.raises(InvalidInputError):
            TrainingIndex(np.zeros((2, 2)), [0, 1], [0, 5], 2, 2)
