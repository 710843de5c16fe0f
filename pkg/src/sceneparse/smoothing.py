"""Pixel-level MRF smoothing solved with alpha-beta swap moves.

The energy of a labelling ``l`` is

    E(l) = sum_p D[p, l_p] + lam * sum_{(p, q)} xi_pq * V[l_p, l_q]

with ``D`` the negative log likelihood ratio of the pixel's super-pixel,
``xi`` the squared luminance difference normalised to sum to one over all
4-neighbour edges, and ``V[a, b] = -log((P(a|b) + P(b|a)) / 2)`` for
``a != b`` (zero on the diagonal) from training-set label co-occurrence.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from sceneparse import kernels
from sceneparse.errors import InvalidInputError
from sceneparse.imageio import VOID

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-6
LIKELIHOOD_FLOOR = 1e-12
DEFAULT_LAMBDA = 16.0
MAX_SWEEPS = 10


@dataclass
class CooccurrenceTable:
    """``P[a, b]``: probability a pixel has label ``a`` given a 4-neighbour has ``b``."""

    P: np.ndarray
    counts: np.ndarray


def _neighbor_pairs(mask):
    m = np.asarray(mask)
    return [(m[:, :-1], m[:, 1:]), (m[:-1, :], m[1:, :])]


def build_cooccurrence(masks, n_labels, eps=1.0):
    """Estimate label co-occurrence from 4-adjacent ground-truth pixels.

    Both directions of every edge are counted; edges touching a void pixel
    are skipped. ``eps`` is added to every count before normalising each
    column; columns with no support stay zero when ``eps == 0``.
    """
    counts = np.zeros((n_labels, n_labels), dtype=np.float64)
    for mask in masks:
        for x, y in _neighbor_pairs(mask):
            ok = (x != VOID) & (y != VOID)
            x, y = x[ok].astype(np.int64), y[ok].astype(np.int64)
            if x.size and max(x.max(), y.max()) >= n_labels:
                raise InvalidInputError("mask label id out of range")
            np.add.at(counts, (x, y), 1)
            np.add.at(counts, (y, x), 1)
    if counts.sum() == 0:
        raise InvalidInputError("no labelled 4-adjacent pixel pairs in the masks")
    smoothed = counts + eps
    col = smoothed.sum(axis=0, keepdims=True)
    P = np.divide(smoothed, col, out=np.zeros_like(smoothed), where=col > 0)
    return CooccurrenceTable(P, counts)


def label_cost_matrix(P, floor=PROB_FLOOR):
    """``V[a, b] = -log(max((P[a|b] + P[b|a]) / 2, floor))``, zero diagonal."""
    P = np.asarray(P, dtype=np.float64)
    sym = np.maximum(0.5 * (P + P.T), floor)
    V = -np.log(np.minimum(sym, 1.0))
    np.fill_diagonal(V, 0.0)
    return V


def pairwise_term(l_i, l_j, P, xi, floor=PROB_FLOOR):
    if l_i == l_j:
        return 0.0
    p = max((P[l_i, l_j] + P[l_j, l_i]) / 2.0, floor)
    return float(xi * -np.log(min(p, 1.0)))


def gradient_weights(image):
    """4-neighbour edges and their normalised squared luminance differences.

    Returns ``(a, b, xi)`` with flat pixel indices ``a < b``. A flat image
    gets uniform weights so that ``xi`` still sums to one.
    """
    rgb = np.asarray(image, dtype=np.float64)
    h, w = rgb.shape[:2]
    gray = rgb @ np.array([0.299, 0.587, 0.114]) if rgb.ndim == 3 else rgb
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    g = gray.ravel()
    grad = (g[a] - g[b]) ** 2
    total = grad.sum()
    if a.size == 0:
        return a, b, grad
    xi = grad / total if total > 0 else np.full(a.size, 1.0 / a.size)
    return a, b, xi


def data_term(likelihood, spmap, floor=LIKELIHOOD_FLOOR):
    """Per-pixel costs ``-log L`` of the pixel's super-pixel.

    ``likelihood`` is ``(n_segments, n_labels)``; values are clipped to
    ``[floor, 1/floor]`` so every cost is finite.
    """
    L = np.clip(np.asarray(likelihood, dtype=np.float64), floor, 1.0 / floor)
    return -np.log(L)[spmap.segment_id.ravel()]


@dataclass
class MrfProblem:
    unary: np.ndarray  # (n_pixels, n_labels)
    edge_a: np.ndarray
    edge_b: np.ndarray
    edge_weight: np.ndarray  # xi per edge, before lam
    label_cost: np.ndarray  # V, (n_labels, n_labels)
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        self.unary = np.ascontiguousarray(self.unary, dtype=np.float64)
        self.edge_a = np.asarray(self.edge_a, dtype=np.int64)
        self.edge_b = np.asarray(self.edge_b, dtype=np.int64)
        self.edge_weight = np.asarray(self.edge_weight, dtype=np.float64)
        self.label_cost = np.asarray(self.label_cost, dtype=np.float64)
        if not np.isfinite(self.unary).all():
            raise InvalidInputError("data costs must be finite")
        if (self.edge_weight < 0).any():
            raise InvalidInputError("edge weights must be non-negative")
        if self.lam < 0:
            raise InvalidInputError("lambda must be non-negative")
        check_semi_metric(self.label_cost)

    @property
    def n_labels(self):
        return self.unary.shape[1]

    def energy(self, labels):
        labels = np.asarray(labels, dtype=np.int64).ravel()
        e = self.unary[np.arange(labels.size), labels].sum()
        if self.edge_a.size:
            e += self.lam * (self.edge_weight * self.label_cost[labels[self.edge_a], labels[self.edge_b]]).sum()
        return float(e)


def check_semi_metric(V, tol=1e-12):
    V = np.asarray(V)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise InvalidInputError("label cost matrix must be square")
    if np.abs(np.diag(V)).max(initial=0) > tol:
        raise InvalidInputError("pairwise cost must vanish for equal labels")
    if np.abs(V - V.T).max(initial=0) > tol or (V < -tol).any():
        raise InvalidInputError("pairwise cost must be symmetric and non-negative")


def build_problem(image, likelihood, spmap, cooc, lam=DEFAULT_LAMBDA, floor=PROB_FLOOR):
    a, b, xi = gradient_weights(image)
    V = label_cost_matrix(cooc.P if isinstance(cooc, CooccurrenceTable) else cooc, floor)
    return MrfProblem(data_term(likelihood, spmap), a, b, xi, V, lam)


@dataclass
class SwapResult:
    labels: np.ndarray
    energy: float
    initial_energy: float
    sweeps: int
    trace: list = field(default_factory=list)  # (sweep, alpha, beta, before, after)


def _swap_move(problem, labels, alpha, beta, w):
    """Optimal relabelling of the alpha/beta pixels; returns new labels or None."""
    active = (labels == alpha) | (labels == beta)
    nodes = np.flatnonzero(active)
    if nodes.size == 0:
        return None
    local = np.full(labels.size, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)

    cost_a = problem.unary[nodes, alpha].copy()
    cost_b = problem.unary[nodes, beta].copy()
    V = problem.label_cost
    ea, eb = problem.edge_a, problem.edge_b
    in_a, in_b = active[ea], active[eb]

    # edges to fixed pixels fold into the terminal costs
    for src, dst, mask in ((ea, eb, in_a & ~in_b), (eb, ea, in_b & ~in_a)):
        p = local[src[mask]]
        lq = labels[dst[mask]]
        np.add.at(cost_a, p, w[mask] * V[alpha, lq])
        np.add.at(cost_b, p, w[mask] * V[beta, lq])

    both = in_a & in_b
    cap = w[both] * V[alpha, beta]
    u, v = local[ea[both]], local[eb[both]]

    base = np.minimum(cost_a, cost_b)
    # source side takes alpha: cutting p->sink pays cost_a
    flow, side = kernels.maxflow(
        int(nodes.size),
        np.ascontiguousarray(cost_b - base),
        np.ascontiguousarray(cost_a - base),
        np.ascontiguousarray(u),
        np.ascontiguousarray(v),
        np.ascontiguousarray(cap),
        np.ascontiguousarray(cap),
    )
    new = labels.copy()
    new[nodes] = np.where(side.astype(bool), alpha, beta)
    return new


def alpha_beta_swap(problem, initial, max_sweeps=MAX_SWEEPS, labels_order=None, tol=1e-10):
    """Minimise the MRF energy with alpha-beta swap moves.

    Label pairs are visited in lexicographic order; a move is kept only if
    it lowers the energy. Stops after a sweep without an accepted move or
    after ``max_sweeps`` sweeps.

    Returns
    -------
    SwapResult
        ``trace`` holds one ``(sweep, alpha, beta, before, after)`` row per
        accepted move.
    """
    labels = np.asarray(initial, dtype=np.int64).ravel().copy()
    if labels.size != problem.unary.shape[0]:
        raise InvalidInputError("initial labelling has the wrong size")
    if labels.size and (labels.min() < 0 or labels.max() >= problem.n_labels):
        raise InvalidInputError("initial labelling uses unknown labels")
    energy = e0 = problem.energy(labels)
    trace = []
    n_l = problem.n_labels
    order = range(n_l) if labels_order is None else labels_order
    pairs = [(a, b) for a in order for b in order if a < b]
    w = problem.lam * problem.edge_weight
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        improved = False
        for alpha, beta in pairs:
            new = _swap_move(problem, labels, alpha, beta, w)
            if new is None:
                continue
            e_new = problem.energy(new)
            if e_new < energy - tol * max(1.0, abs(energy)):
                trace.append((sweeps, alpha, beta, energy, e_new))
                labels, energy = new, e_new
                improved = True
        if not improved:
            break
    return SwapResult(labels, energy, e0, sweeps, trace)


def write_energy_trace(path, result):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("move,sweep,alpha,beta,energy_before,energy_after\n")
        for i, (sweep, a, b, before, after) in enumerate(result.trace, start=1):
            fh.write(f"{i},{sweep},{a},{b},{before:.17g},{after:.17g}\n")
