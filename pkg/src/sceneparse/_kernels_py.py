"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``."""
import math
from collections import deque

import numpy as np


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def _join(parent, rank, size, x, y):
    if rank[x] > rank[y]:
        parent[y] = x
        size[x] += size[y]
        return x
    parent[x] = y
    size[y] += size[x]
    if rank[x] == rank[y]:
        rank[y] += 1
    return y


def segment_graph(n_vertices, a, b, w, scale, min_size):
    parent = list(range(n_vertices))
    rank = [0] * n_vertices
    size = [1] * n_vertices
    thresh = [float(scale)] * n_vertices
    a = a.tolist()
    b = b.tolist()
    w = w.tolist()

    for ai, bi, wi in zip(a, b, w):
        x = _find(parent, ai)
        y = _find(parent, bi)
        if x != y and wi <= thresh[x] and wi <= thresh[y]:
            r = _join(parent, rank, size, x, y)
            thresh[r] = wi + scale / size[r]
    for ai, bi in zip(a, b):
        x = _find(parent, ai)
        y = _find(parent, bi)
        if x != y and (size[x] < min_size or size[y] < min_size):
            _join(parent, rank, size, x, y)
    return np.array([_find(parent, i) for i in range(n_vertices)], dtype=np.int64)


def greedy_match(eta, delta, image_of, n_images, min_delta):
    image_of = image_of.tolist()
    matched = set()
    votes = [0.0] * n_images
    for row_idx, row_dist in zip(eta.tolist(), delta.tolist()):
        nearest = {}
        for s, d in zip(row_idx, row_dist):
            if s < 0:
                break
            if s in matched:
                continue
            img = image_of[s]
            if img not in nearest or d < nearest[img][0]:
                nearest[img] = (d, s)
        for img, (d, s) in nearest.items():
            votes[img] += 1.0 / max(d, min_delta)
            matched.add(s)
    return np.array(votes, dtype=np.float64)


def maxflow(n, source_cap, sink_cap, eu, ev, cap_uv, cap_vu):
    s, t = n, n + 1
    head, res, adj = [], [], [[] for _ in range(n + 2)]

    def add(u, v, c_uv, c_vu):
        adj[u].append(len(head))
        head.append(v)
        res.append(c_uv)
        adj[v].append(len(head))
        head.append(u)
        res.append(c_vu)

    cmax = 0.0
    for arr in (source_cap, sink_cap, cap_uv, cap_vu):
        if len(arr):
            cmax = max(cmax, float(np.max(arr)))
    eps = 1e-12 * (1.0 + cmax)

    for u, v, c1, c2 in zip(eu.tolist(), ev.tolist(), cap_uv.tolist(), cap_vu.tolist()):
        if c1 > 0.0 or c2 > 0.0:
            add(u, v, c1, c2)
    for p, (cs, ct) in enumerate(zip(source_cap.tolist(), sink_cap.tolist())):
        if cs > 0.0:
            add(s, p, cs, 0.0)
        if ct > 0.0:
            add(p, t, ct, 0.0)

    flow = 0.0
    while True:
        level = [-1] * (n + 2)
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for arc in adj[u]:
                v = head[arc]
                if level[v] < 0 and res[arc] > eps:
                    level[v] = level[u] + 1
                    queue.append(v)
        if level[t] < 0:
            break

        it = [0] * (n + 2)
        path = []
        u = s
        while True:
            if u == t:
                bottleneck = min(res[a] for a in path)
                for a in path:
                    res[a] -= bottleneck
                    res[a ^ 1] += bottleneck
                flow += bottleneck
                cut = next(i for i, a in enumerate(path) if res[a] <= eps)
                del path[cut:]
                u = head[path[-1]] if path else s
                continue
            arcs = adj[u]
            i = it[u]
            while i < len(arcs):
                arc = arcs[i]
                if res[arc] > eps and level[head[arc]] == level[u] + 1:
                    break
                i += 1
            it[u] = i
            if i < len(arcs):
                path.append(arcs[i])
                u = head[arcs[i]]
            else:
                level[u] = -1
                if not path:
                    break
                u = head[path.pop() ^ 1]

    side = np.array([lv >= 0 for lv in level[:n]], dtype=np.uint8)
    return (flow if math.isfinite(flow) else float("inf")), side
