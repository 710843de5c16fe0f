# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a line-for-line twin in ``_kernels_py.py``; the two
must stay behaviourally identical (the test-suite runs both).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

ctypedef cnp.int64_t i64


cdef inline i64 _find(i64[::1] parent, i64 x) noexcept nogil:
    cdef i64 root = x
    cdef i64 nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


cdef inline i64 _join(i64[::1] parent, int[::1] rank, i64[::1] size,
                      i64 x, i64 y) noexcept nogil:
    if rank[x] > rank[y]:
        parent[y] = x
        size[x] += size[y]
        return x
    parent[x] = y
    size[y] += size[x]
    if rank[x] == rank[y]:
        rank[y] += 1
    return y


def segment_graph(Py_ssize_t n_vertices, const i64[::1] a, const i64[::1] b,
                  const double[::1] w, double scale, Py_ssize_t min_size):
    """Graph-based merge over edges already sorted by weight.

    Returns the representative vertex of each vertex's component.
    """
    cdef Py_ssize_t n_edges = a.shape[0]
    cdef i64[::1] parent = np.arange(n_vertices, dtype=np.int64)
    cdef int[::1] rank = np.zeros(n_vertices, dtype=np.intc)
    cdef i64[::1] size = np.ones(n_vertices, dtype=np.int64)
    cdef double[::1] thresh = np.full(n_vertices, scale, dtype=np.float64)
    cdef i64[::1] out = np.empty(n_vertices, dtype=np.int64)
    cdef Py_ssize_t i
    cdef i64 x, y, r

    with nogil:
        for i in range(n_edges):
            x = _find(parent, a[i])
            y = _find(parent, b[i])
            if x != y and w[i] <= thresh[x] and w[i] <= thresh[y]:
                r = _join(parent, rank, size, x, y)
                thresh[r] = w[i] + scale / size[r]
        for i in range(n_edges):
            x = _find(parent, a[i])
            y = _find(parent, b[i])
            if x != y and (size[x] < min_size or size[y] < min_size):
                _join(parent, rank, size, x, y)
        for i in range(n_vertices):
            out[i] = _find(parent, i)
    return np.asarray(out)


def greedy_match(const i64[:, ::1] eta, const double[:, ::1] delta,
                 const i64[::1] image_of, Py_ssize_t n_images,
                 double min_delta):
    """Accumulate reciprocal-distance votes under the unique-match rule.

    ``eta`` rows hold neighbour indices in ascending distance order, padded
    with -1. Returns the raw (unnormalised) vote per training image.
    """
    cdef Py_ssize_t n_query = eta.shape[0]
    cdef Py_ssize_t k = eta.shape[1]
    cdef Py_ssize_t n_sp = image_of.shape[0]
    cdef cnp.uint8_t[::1] matched = np.zeros(n_sp, dtype=np.uint8)
    cdef double[::1] best = np.full(n_images, INFINITY, dtype=np.float64)
    cdef i64[::1] best_idx = np.full(n_images, -1, dtype=np.int64)
    cdef i64[::1] touched = np.empty(max(k, 1), dtype=np.int64)
    cdef double[::1] votes = np.zeros(n_images, dtype=np.float64)
    cdef Py_ssize_t i, j, nt, t
    cdef i64 s, img
    cdef double d

    with nogil:
        for i in range(n_query):
            nt = 0
            for j in range(k):
                s = eta[i, j]
                if s < 0:
                    break
                if matched[s]:
                    continue
                img = image_of[s]
                if best_idx[img] < 0:
                    touched[nt] = img
                    nt += 1
                    best[img] = delta[i, j]
                    best_idx[img] = s
                elif delta[i, j] < best[img]:
                    best[img] = delta[i, j]
                    best_idx[img] = s
            for t in range(nt):
                img = touched[t]
                d = best[img]
                if d < min_delta:
                    d = min_delta
                votes[img] += 1.0 / d
                matched[best_idx[img]] = 1
                best_idx[img] = -1
                best[img] = INFINITY
    return np.asarray(votes)


def maxflow(Py_ssize_t n, const double[::1] source_cap,
            const double[::1] sink_cap, const i64[::1] eu, const i64[::1] ev,
            const double[::1] cap_uv, const double[::1] cap_vu):
    """Dinic max-flow on ``n`` nodes plus implicit source and sink.

    Returns ``(flow, source_side)`` where ``source_side[p]`` is 1 for nodes
    reachable from the source in the final residual graph.
    """
    cdef Py_ssize_t n_edges = eu.shape[0]
    cdef Py_ssize_t s = n
    cdef Py_ssize_t t = n + 1
    cdef Py_ssize_t n_nodes = n + 2
    cdef Py_ssize_t m = 2 * (n_edges + 2 * n)
    cdef i64[::1] head = np.empty(m, dtype=np.int64)
    cdef i64[::1] nxt = np.empty(m, dtype=np.int64)
    cdef double[::1] res = np.empty(m, dtype=np.float64)
    cdef i64[::1] first = np.full(n_nodes, -1, dtype=np.int64)
    cdef i64[::1] it = np.empty(n_nodes, dtype=np.int64)
    cdef i64[::1] level = np.empty(n_nodes, dtype=np.int64)
    cdef i64[::1] queue = np.empty(n_nodes, dtype=np.int64)
    cdef i64[::1] path = np.empty(n_nodes, dtype=np.int64)
    cdef Py_ssize_t n_arcs = 0
    cdef Py_ssize_t i, qh, qt, depth
    cdef i64 u, v, arc
    cdef double eps, bottleneck, flow = 0.0, cmax = 0.0

    with nogil:
        for i in range(n):
            if source_cap[i] > cmax:
                cmax = source_cap[i]
            if sink_cap[i] > cmax:
                cmax = sink_cap[i]
        for i in range(n_edges):
            if cap_uv[i] > cmax:
                cmax = cap_uv[i]
            if cap_vu[i] > cmax:
                cmax = cap_vu[i]
        eps = 1e-12 * (1.0 + cmax)

        # paired arcs: arc ^ 1 is the reverse of arc
        for i in range(n_edges):
            if cap_uv[i] <= 0.0 and cap_vu[i] <= 0.0:
                continue
            u = eu[i]
            v = ev[i]
            head[n_arcs] = v
            res[n_arcs] = cap_uv[i]
            nxt[n_arcs] = first[u]
            first[u] = n_arcs
            head[n_arcs + 1] = u
            res[n_arcs + 1] = cap_vu[i]
            nxt[n_arcs + 1] = first[v]
            first[v] = n_arcs + 1
            n_arcs += 2
        for i in range(n):
            if source_cap[i] > 0.0:
                head[n_arcs] = i
                res[n_arcs] = source_cap[i]
                nxt[n_arcs] = first[s]
                first[s] = n_arcs
                head[n_arcs + 1] = s
                res[n_arcs + 1] = 0.0
                nxt[n_arcs + 1] = first[i]
                first[i] = n_arcs + 1
                n_arcs += 2
            if sink_cap[i] > 0.0:
                head[n_arcs] = t
                res[n_arcs] = sink_cap[i]
                nxt[n_arcs] = first[i]
                first[i] = n_arcs
                head[n_arcs + 1] = i
                res[n_arcs + 1] = 0.0
                nxt[n_arcs + 1] = first[t]
                first[t] = n_arcs + 1
                n_arcs += 2

        while True:
            # BFS levels from the source
            for i in range(n_nodes):
                level[i] = -1
            level[s] = 0
            queue[0] = s
            qh = 0
            qt = 1
            while qh < qt:
                u = queue[qh]
                qh += 1
                arc = first[u]
                while arc != -1:
                    v = head[arc]
                    if level[v] < 0 and res[arc] > eps:
                        level[v] = level[u] + 1
                        queue[qt] = v
                        qt += 1
                    arc = nxt[arc]
            if level[t] < 0:
                break

            for i in range(n_nodes):
                it[i] = first[i]
            depth = 0
            u = s
            while True:
                if u == t:
                    bottleneck = INFINITY
                    for i in range(depth):
                        if res[path[i]] < bottleneck:
                            bottleneck = res[path[i]]
                    for i in range(depth):
                        res[path[i]] -= bottleneck
                        res[path[i] ^ 1] += bottleneck
                    flow += bottleneck
                    for i in range(depth):
                        if res[path[i]] <= eps:
                            depth = i
                            break
                    if depth == 0:
                        u = s
                    else:
                        u = head[path[depth - 1]]
                    continue
                arc = it[u]
                while arc != -1:
                    v = head[arc]
                    if res[arc] > eps and level[v] == level[u] + 1:
                        break
                    arc = nxt[arc]
                it[u] = arc
                if arc != -1:
                    path[depth] = arc
                    depth += 1
                    u = head[arc]
                else:
                    level[u] = -1
                    if depth == 0:
                        break
                    depth -= 1
                    u = head[path[depth] ^ 1]

    side = np.asarray(level)[:n] >= 0
    return flow, side.astype(np.uint8)
