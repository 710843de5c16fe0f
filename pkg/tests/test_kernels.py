"""Kernel backends against each other and against simple oracles."""
from collections import deque

import numpy as np
import pytest

from sceneparse import kernels

from conftest import grid_edges


def edmonds_karp(n, source_cap, sink_cap, eu, ev, cap_uv, cap_vu):
    """Max-flow value by shortest augmenting paths on a dense matrix."""
    s, t = n, n + 1
    C = np.zeros((n + 2, n + 2))
    C[s, :n] += source_cap
    C[:n, t] += sink_cap
    for u, v, a, b in zip(eu, ev, cap_uv, cap_vu):
        C[u, v] += a
        C[v, u] += b
    flow = 0.0
    while True:
        prev = [-1] * (n + 2)
        prev[s] = s
        q = deque([s])
        while q and prev[t] < 0:
            u = q.popleft()
            for v in np.flatnonzero(C[u] > 1e-12):
                if prev[v] < 0:
                    prev[v] = u
                    q.append(v)
        if prev[t] < 0:
            return flow
        path, v = [], t
        while v != s:
            path.append((prev[v], v))
            v = prev[v]
        push = min(C[u, v] for u, v in path)
        for u, v in path:
            C[u, v] -= push
            C[v, u] += push
        flow += push


def random_graph(rng, n, density=0.3):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < density]
    eu = np.array([p[0] for p in pairs], dtype=np.int64)
    ev = np.array([p[1] for p in pairs], dtype=np.int64)
    m = eu.size
    return (
        rng.random(n) * (rng.random(n) < 0.6),
        rng.random(n) * (rng.random(n) < 0.6),
        eu,
        ev,
        rng.random(m),
        rng.random(m),
    )


def cut_value(side, source_cap, sink_cap, eu, ev, cap_uv, cap_vu):
    side = side.astype(bool)
    total = source_cap[~side].sum() + sink_cap[side].sum()
    total += cap_uv[side[eu] & ~side[ev]].sum() + cap_vu[side[ev] & ~side[eu]].sum()
    return total


class TestMaxflow:
    def test_matches_augmenting_path_oracle(self, backend):
        rng = np.random.default_rng(3)
        for _ in range(60):
            n = int(rng.integers(1, 21))
            g = random_graph(rng, n)
            flow, side = kernels.maxflow(n, *g)
            assert flow == pytest.approx(edmonds_karp(n, *g), rel=1e-9, abs=1e-12)
            # the returned partition is a minimum cut
            assert cut_value(side, *g) == pytest.approx(flow, rel=1e-9, abs=1e-12)

    def test_no_edges(self, backend):
        src = np.array([1.0, 0.0, 2.0])
        snk = np.array([0.5, 3.0, 2.0])
        e = np.zeros(0, dtype=np.int64)
        flow, side = kernels.maxflow(3, src, snk, e, e, np.zeros(0), np.zeros(0))
        assert flow == pytest.approx(0.5 + 0.0 + 2.0)
        assert side[1] == 0

    def test_backends_agree(self):
        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
        rng = np.random.default_rng(11)
        for _ in range(40):
            n = int(rng.integers(2, 40))
            g = random_graph(rng, n)
            f1, s1 = py.maxflow(n, *g)
            f2, s2 = cy.maxflow(n, *g)
            assert f1 == pytest.approx(f2, rel=1e-12, abs=1e-12)
            assert cut_value(s1, *g) == pytest.approx(cut_value(s2, *g), rel=1e-12, abs=1e-12)


class TestSegmentGraph:
    def test_backends_identical(self):
        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(5)
        h, w = 30, 40
        a, b = grid_edges(h, w)
        wts = rng.random(a.size) * 50
        order = np.argsort(wts, kind="stable")
        args = (h * w, a[order].astype(np.int64), b[order].astype(np.int64), wts[order], 60.0, 12)
        r1 = kernels.get_backend("python").segment_graph(*args)
        r2 = kernels.get_backend("cython").segment_graph(*args)
        np.testing.assert_array_equal(r1, r2)

    def test_components_respect_min_size(self, backend):
        rng = np.random.default_rng(8)
        h, w = 12, 12
        a, b = grid_edges(h, w)
        wts = rng.random(a.size)
        order = np.argsort(wts, kind="stable")
        roots = kernels.segment_graph(h * w, a[order], b[order], wts[order], 0.5, 10)
        assert np.bincount(np.unique(roots, return_inverse=True)[1]).min() >= 10


class TestGreedyMatch:
    def test_backends_identical(self):
        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(9)
        n_q, k, n_t, n_img = 25, 15, 60, 7
        eta = np.stack([rng.permutation(n_t)[:k] for _ in range(n_q)]).astype(np.int64)
        eta[3, 10:] = -1
        delta = np.sort(rng.random((n_q, k)), axis=1)
        delta[0, 0] = 0.0
        image_of = rng.integers(0, n_img, n_t).astype(np.int64)
        v1 = kernels.get_backend("python").greedy_match(eta, delta, image_of, n_img, 1e-9)
        v2 = kernels.get_backend("cython").greedy_match(eta, delta, image_of, n_img, 1e-9)
        np.testing.assert_array_equal(v1, v2)

    def test_each_training_superpixel_votes_once(self, backend):
        # two identical queries: the second may not reuse the first match
        eta = np.array([[0, 1], [0, 1]], dtype=np.int64)
        delta = np.array([[1.0, 2.0], [1.0, 2.0]])
        votes = kernels.greedy_match(eta, delta, np.array([0, 0], dtype=np.int64), 1, 1e-9)
        assert votes[0] == pytest.approx(1.0 + 0.5)
