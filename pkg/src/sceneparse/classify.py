"""Adaptive k-nearest-neighbour super-pixel labelling.

A super-pixel's score for label ``l`` is the likelihood ratio

    ((n(l, NN) + eps) / (n(l, D) + eps)) / ((n(~l, NN) + eps) / (n(~l, D) + eps))

where ``NN`` are its ``k`` nearest retrieval-set super-pixels, ``D`` the
whole training set and ``~l`` every other label. The neighbourhood size
``k`` of a query image is the one that maximises the summed leave-one-out
accuracy of its retrieved training images.
"""
import logging
from dataclasses import dataclass

import numpy as np

from sceneparse.errors import InvalidInputError, NoNeighborsError
from sceneparse.retrieval import build_retrieval_set, knn_batch

logger = logging.getLogger(__name__)

K_MAX = 50
FALLBACK_K = 20
DEFAULT_EPS = 1.0


@dataclass
class AccuracyTable:
    """``acc[t, k-1]``: per-pixel accuracy of training image ``t`` at ``k``.

    ``correct`` and ``total`` keep the raw pixel counts; rows whose
    ``valid`` flag is False (no labelled pixels, or not evaluated) are
    ignored by :func:`select_adaptive_k`.
    """

    correct: np.ndarray
    total: np.ndarray
    valid: np.ndarray

    @property
    def acc(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            a = self.correct / self.total[:, None]
        a[~self.valid] = np.nan
        return a

    @property
    def k_max(self):
        return self.correct.shape[1]

    @classmethod
    def from_accuracy(cls, acc, valid=None):
        acc = np.asarray(acc, dtype=np.float64)
        if valid is None:
            valid = np.isfinite(acc).all(axis=1)
        total = np.where(valid, 1.0, 0.0)
        correct = np.where(valid[:, None], np.nan_to_num(acc), 0.0)
        return cls(correct, total, np.asarray(valid, dtype=bool))


def likelihood_ratios(nn_counts, global_counts, eps=DEFAULT_EPS):
    """Likelihood ratio of every label given neighbour and global counts.

    Parameters
    ----------
    nn_counts : array (..., n_labels)
        Label histogram of the ``k`` nearest neighbours.
    global_counts : array (n_labels,)
        Label histogram of the whole training set.
    eps : float
        Additive smoothing on all four counts. With ``eps = 0`` a label held
        by every neighbour scores ``inf`` and a label absent from the
        training set scores 0.
    """
    nn = np.asarray(nn_counts, dtype=np.float64)
    D = np.asarray(global_counts, dtype=np.float64)
    k = nn.sum(axis=-1, keepdims=True)
    nn_rest = k - nn
    D_rest = D.sum() - D
    with np.errstate(divide="ignore", invalid="ignore"):
        num = (nn + eps) / (D + eps)
        den = (nn_rest + eps) / (D_rest + eps)
        L = num / den
    # 0/0 only arises with eps = 0 for labels absent from the neighbourhood
    return np.where(np.isnan(L), 0.0, L)


def likelihood_ratio(label, neighbor_labels, global_counts, eps=DEFAULT_EPS):
    global_counts = np.asarray(global_counts)
    n_labels = global_counts.size
    if not 0 <= label < n_labels:
        raise InvalidInputError(f"label {label} out of range")
    nn = np.bincount(np.asarray(neighbor_labels, dtype=np.int64), minlength=n_labels)
    return float(likelihood_ratios(nn, global_counts, eps)[label])


def _argmax_with_ties(L, nn_counts, allowed):
    """Argmax over the last axis; ties -> larger count, then smaller id."""
    L = np.where(allowed, L, -np.inf)
    best = L.max(axis=-1, keepdims=True)
    tied = L == best
    cnt = np.where(tied, nn_counts, -1)
    return np.argmax(cnt, axis=-1)


def classify_superpixel(neighbor_labels, global_counts, k=None, eps=DEFAULT_EPS):
    """Label maximising the likelihood ratio over the first ``k`` neighbours.

    ``neighbor_labels`` are in ascending distance order. Labels with no
    training super-pixels are never returned.
    """
    labels = np.asarray(neighbor_labels, dtype=np.int64)
    if k is not None:
        labels = labels[:k]
    if labels.size == 0:
        raise NoNeighborsError("no neighbours to vote from")
    global_counts = np.asarray(global_counts)
    nn = np.bincount(labels, minlength=global_counts.size)
    L = likelihood_ratios(nn, global_counts, eps)
    return int(_argmax_with_ties(L, nn, global_counts > 0))


def cumulative_counts(neighbor_labels, n_labels, k_max):
    """``out[i, k-1, l]``: count of label ``l`` among the first ``k`` neighbours.

    ``neighbor_labels`` is ``(n, K)`` padded with -1; counts stop growing
    past the last real neighbour.
    """
    nl = np.asarray(neighbor_labels, dtype=np.int64)
    n, K = nl.shape
    kk = min(K, k_max)
    onehot = np.zeros((n, k_max, n_labels), dtype=np.int64)
    rows, cols = np.nonzero(nl[:, :kk] >= 0)
    onehot[rows, cols, nl[rows, cols]] = 1
    return np.cumsum(onehot, axis=1)


def label_all_k(neighbor_labels, global_counts, k_max=K_MAX, eps=DEFAULT_EPS):
    """Initial labels for every super-pixel at every ``k`` in ``1..k_max``.

    Returns an ``(n, k_max)`` array of label ids.
    """
    global_counts = np.asarray(global_counts)
    cum = cumulative_counts(neighbor_labels, global_counts.size, k_max)
    L = likelihood_ratios(cum, global_counts, eps)
    return _argmax_with_ties(L, cum, global_counts > 0)


def likelihoods_at_k(neighbor_labels, global_counts, k, eps=DEFAULT_EPS):
    """Likelihood ratios and initial labels of all super-pixels at one ``k``.

    Returns ``(L, labels)`` with ``L`` of shape ``(n, n_labels)``.
    """
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    global_counts = np.asarray(global_counts)
    nl = np.asarray(neighbor_labels, dtype=np.int64)[:, :k]
    if not (nl >= 0).any(axis=1).all():
        raise NoNeighborsError("a super-pixel has no neighbours to vote from")
    counts = cumulative_counts(nl, global_counts.size, k)[:, -1]
    L = likelihood_ratios(counts, global_counts, eps)
    return L, _argmax_with_ties(L, counts, global_counts > 0)


def select_adaptive_k(retrieved, table, fallback_k=FALLBACK_K):
    """k maximising the summed accuracy of the retrieved training images.

    Parameters
    ----------
    retrieved : sequence of int or RetrievalSet
        The top ``k_r`` training images.
    table : AccuracyTable

    Ties resolve to the smallest k.
    """
    images = np.asarray(getattr(retrieved, "retrieved", retrieved), dtype=np.int64)
    if images.size == 0:
        raise InvalidInputError("empty retrieval set")
    images = images[table.valid[images]]
    if images.size == 0:
        logger.warning("no retrieved image has a valid accuracy row; using k=%d", fallback_k)
        return int(fallback_k)
    total = table.acc[images].sum(axis=0)
    return int(np.argmax(total)) + 1


def pixel_accuracy_per_k(spmap, k_labels, gt_mask, void=255):
    """Correct-pixel counts for every ``k`` and the labelled pixel total.

    ``k_labels`` is the ``(n_segments, k_max)`` output of
    :func:`label_all_k`.
    """
    seg = spmap.segment_id.ravel()
    gt = np.asarray(gt_mask).ravel()
    valid = gt != void
    seg, gt = seg[valid], gt[valid]
    n_seg = spmap.n_segments
    # pixel counts of each (segment, gt label) pair
    joint = np.bincount(seg.astype(np.int64) * 256 + gt, minlength=n_seg * 256).reshape(n_seg, 256)
    correct = joint[np.arange(n_seg)[:, None], k_labels].sum(axis=0)
    return correct.astype(np.float64), float(valid.sum())


def retrieval_neighbors(Q, index, retrieved, k_max=K_MAX):
    """Labels of the ``k_max`` nearest super-pixels within the retrieved images.

    Returns ``(n_q, k)`` label ids padded with -1 when the retrieval set
    holds fewer than ``k_max`` super-pixels.
    """
    rows = index.rows_of_images(retrieved)
    if rows.size == 0:
        raise NoNeighborsError("the retrieval set holds no labelled super-pixels")
    eta, _ = knn_batch(Q, index.features, k_max, rows)
    out = np.full((eta.shape[0], k_max), -1, dtype=np.int64)
    out[:, : eta.shape[1]] = np.where(eta >= 0, index.labels[np.maximum(eta, 0)], -1)
    return out


def loo_image_curve(image_id, Q, spmap, gt_mask, index, k_m, tau, k_max=K_MAX, eps=DEFAULT_EPS):
    """Leave-one-out retrieval and labelling of one training image.

    Returns ``(retrieval_set, correct_per_k, labelled_pixels)``.
    """
    rset = build_retrieval_set(Q, index, k_m, tau, exclude_image=image_id)
    nl = retrieval_neighbors(Q, index, rset.retrieved, k_max)
    k_labels = label_all_k(nl, index.label_counts, k_max, eps)
    correct, total = pixel_accuracy_per_k(spmap, k_labels, gt_mask)
    return rset, correct, total


def build_accuracy_table(training_images, index, k_m, tau, k_max=K_MAX, eps=DEFAULT_EPS,
                         subset=None, progress=None, map_fn=map):
    """Leave-one-out accuracy of each training image at every ``k``.

    Parameters
    ----------
    training_images : sequence
        Items with ``reduced`` (descriptors of *all* its super-pixels),
        ``spmap`` and ``mask`` attributes, indexed like ``index`` images.
    subset : sequence of int, optional
        Only evaluate these images; the other rows are flagged invalid.
    map_fn : callable
        ``map``-like executor hook for parallel evaluation.
    """
    n = len(training_images)
    correct = np.zeros((n, k_max))
    total = np.zeros(n)
    valid = np.zeros(n, dtype=bool)
    todo = list(range(n)) if subset is None else sorted(int(t) for t in subset)

    def run(t):
        im = training_images[t]
        if not (np.asarray(im.mask) != 255).any():
            return t, None
        _, c, tot = loo_image_curve(t, im.reduced, im.spmap, im.mask, index, k_m, tau, k_max, eps)
        return t, (c, tot)

    for done, (t, res) in enumerate(map_fn(run, todo), start=1):
        if res is not None:
            correct[t], total[t] = res
            valid[t] = res[1] > 0
        if progress:
            progress(done, len(todo))
    return AccuracyTable(correct, total, valid)
