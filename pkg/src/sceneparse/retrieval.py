"""Locality-aware retrieval by greedy unique super-pixel matching.

Each query super-pixel, in turn, looks up its ``k_m`` nearest training
super-pixels, drops the ones an earlier query already claimed, keeps only
the nearest survivor per training image and adds ``1 / distance`` to that
image's score. Scores are then divided by ``min(n_query, n_train_image)``
and the smallest prefix of the ranking holding a ``tau`` share of the total
score forms the retrieval set.
"""
from dataclasses import dataclass

import numpy as np

from sceneparse import kernels
from sceneparse.errors import DegenerateRetrievalError, InvalidInputError

MIN_DISTANCE = 1e-9
DEFAULT_KM = 1000
DEFAULT_TAU = 0.3


@dataclass
class TrainingIndex:
    """Reduced descriptors of all labelled training super-pixels.

    ``features`` holds one row per super-pixel (the transpose of a
    column-per-super-pixel layout). ``image_of`` maps each row to its
    training image, and ``labels`` gives its label id.
    """

    features: np.ndarray
    image_of: np.ndarray
    labels: np.ndarray
    n_images: int
    n_labels: int
    image_names: tuple = ()

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.image_of = np.ascontiguousarray(self.image_of, dtype=np.int64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        n = self.features.shape[0]
        if self.image_of.shape != (n,) or self.labels.shape != (n,):
            raise InvalidInputError("features, image_of and labels must have one entry per super-pixel")
        if n and (self.image_of.min() < 0 or self.image_of.max() >= self.n_images):
            raise InvalidInputError("image index out of range")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.n_labels):
            raise InvalidInputError("label id out of range")

    @property
    def size(self):
        return self.features.shape[0]

    @property
    def per_image_counts(self):
        return np.bincount(self.image_of, minlength=self.n_images)

    @property
    def label_counts(self):
        """Global count of super-pixels per label."""
        return np.bincount(self.labels, minlength=self.n_labels)

    def rows_of_images(self, images):
        return np.flatnonzero(np.isin(self.image_of, np.asarray(images)))


@dataclass
class RetrievalSet:
    """All training images ranked by normalised matching score.

    ``images[:k_r]`` is the retrieval set proper.
    """

    images: np.ndarray
    scores: np.ndarray
    k_r: int
    tau: float
    k_m: int
    raw_votes: np.ndarray = None

    @property
    def retrieved(self):
        return self.images[: self.k_r]


def knn_superpixels(q, T, k_m, candidates=None):
    """Exact Euclidean k nearest rows of ``T``.

    Parameters
    ----------
    q : ndarray, shape (d,)
    T : ndarray, shape (N, d)
    k_m : int
    candidates : ndarray of int, optional
        Restrict the search to these row indices of ``T``.

    Returns
    -------
    (indices, distances)
        ``min(k_m, N)`` pairs in ascending distance; equal distances are
        ordered by row index.
    """
    if k_m < 1:
        raise InvalidInputError("k_m must be at least 1")
    T = np.asarray(T, dtype=np.float64)
    rows = np.arange(T.shape[0]) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if rows.size == 0:
        raise InvalidInputError("empty index")
    diff = T[rows] - np.asarray(q, dtype=np.float64)
    dist = np.sqrt((diff * diff).sum(axis=1))
    k = min(k_m, rows.size)
    if k < rows.size:
        # partition, then widen to include every row tied with the k-th
        part = np.argpartition(dist, k - 1)[:k]
        kth = dist[part].max()
        part = np.flatnonzero(dist <= kth)
    else:
        part = np.arange(rows.size)
    order = np.lexsort((rows[part], dist[part]))[:k]
    sel = part[order]
    return rows[sel], dist[sel]


def knn_batch(Q, T, k_m, candidates=None):
    """:func:`knn_superpixels` for every row of ``Q``, padded with -1 / inf."""
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    n_cand = T.shape[0] if candidates is None else len(candidates)
    k = min(k_m, n_cand)
    eta = np.full((Q.shape[0], k), -1, dtype=np.int64)
    delta = np.full((Q.shape[0], k), np.inf)
    for i, q in enumerate(Q):
        idx, dist = knn_superpixels(q, T, k_m, candidates)
        eta[i, : idx.size] = idx
        delta[i, : dist.size] = dist
    return eta, delta


def retrieval_cutoff(scores, tau):
    """Smallest ``u`` whose top-``u`` share of the total score reaches ``tau``."""
    total = scores.sum()
    if total <= 0:
        raise DegenerateRetrievalError("no training image received a vote")
    share = np.cumsum(scores) / total
    hits = np.flatnonzero(share >= tau - 1e-12)
    return int(hits[0]) + 1 if hits.size else scores.size


def build_retrieval_set(Q, index, k_m=DEFAULT_KM, tau=DEFAULT_TAU, *, exclude_image=None,
                        query_order=None):
    """Rank training images by greedy unique super-pixel matching.

    Parameters
    ----------
    Q : ndarray, shape (n_q, d)
        Reduced descriptors of the query super-pixels in segment-id order.
    index : TrainingIndex
    k_m : int
        Neighbours fetched per query super-pixel.
    tau : float in (0, 1]
        Score share the retrieval set must cover.
    exclude_image : int, optional
        Leave this training image out (leave-one-out evaluation).
    query_order : ndarray of int, optional
        Order in which query super-pixels claim matches; defaults to
        segment-id order.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    n_q = Q.shape[0]
    if n_q < 1:
        raise InvalidInputError("the query image has no super-pixels")
    if not 0 < tau <= 1:
        raise InvalidInputError("tau must lie in (0, 1]")
    if index.size == 0:
        raise InvalidInputError("empty training index")
    candidates = None
    if exclude_image is not None:
        candidates = np.flatnonzero(index.image_of != exclude_image)
    if query_order is not None:
        Q = Q[np.asarray(query_order)]
    eta, delta = knn_batch(Q, index.features, k_m, candidates)
    votes = kernels.greedy_match(eta, delta, index.image_of, index.n_images, MIN_DISTANCE)

    counts = index.per_image_counts
    norm = np.minimum(counts, n_q).astype(np.float64)
    scores = np.divide(votes, norm, out=np.zeros_like(votes), where=norm > 0)
    ranked = np.arange(index.n_images)
    if exclude_image is not None:
        ranked = ranked[ranked != exclude_image]
    ranked = ranked[np.argsort(-scores[ranked], kind="stable")]
    k_r = retrieval_cutoff(scores[ranked], tau)
    return RetrievalSet(ranked, scores[ranked], k_r, float(tau), int(k_m), votes)


def write_retrieval_csv(path, rset, image_names=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,image,name,score,in_set\n")
        for rank, (img, score) in enumerate(zip(rset.images, rset.scores), start=1):
            name = image_names[img] if image_names else ""
            fh.write(f"{rank},{img},{name},{score:.17g},{int(rank <= rset.k_r)}\n")
