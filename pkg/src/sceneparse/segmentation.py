"""Graph-based oversegmentation into super-pixels.

Pixels are joined along 4-neighbour edges in order of increasing colour
difference; two regions merge when the connecting edge is no heavier than
either region's internal variation plus ``scale / size``. A final pass
absorbs regions smaller than ``min_size`` into a neighbour.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from sceneparse import kernels
from sceneparse.errors import InvalidInputError
from sceneparse.imageio import check_image


@dataclass(frozen=True)
class SegmentParams:
    scale: float = 100.0
    sigma: float = 0.8
    min_size: int = 50

    def __post_init__(self):
        if self.scale <= 0:
            raise InvalidInputError("scale must be positive")
        if self.sigma < 0:
            raise InvalidInputError("sigma must be non-negative")
        if self.min_size < 1:
            raise InvalidInputError("min_size must be a positive integer")


@dataclass(frozen=True)
class Segment:
    id: int
    pixels: np.ndarray  # flat (row-major) pixel indices
    bbox: tuple  # (row0, col0, row1, col1), inclusive
    area: int


@dataclass(eq=False)
class SuperPixelMap:
    """Per-pixel segment ids with ids contiguous in ``0..n_segments-1``."""

    segment_id: np.ndarray

    @property
    def shape(self):
        return self.segment_id.shape

    @property
    def n_segments(self):
        return int(self.segment_id.max()) + 1

    @cached_property
    def areas(self):
        return np.bincount(self.segment_id.ravel(), minlength=self.n_segments)

    @cached_property
    def segments(self):
        flat = self.segment_id.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.concatenate([[0], np.cumsum(self.areas)])
        width = self.shape[1]
        out = []
        for sid in range(self.n_segments):
            pix = order[bounds[sid]:bounds[sid + 1]]
            rows, cols = np.divmod(pix, width)
            bbox = (int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))
            out.append(Segment(sid, pix, bbox, int(pix.size)))
        return out


def relabel_in_raster_order(labels):
    """Map arbitrary ids to 0..n-1 in order of first appearance."""
    flat = np.asarray(labels).ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse].reshape(np.shape(labels)).astype(np.int32)


def _grid_edges(h, w):
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    # right and down neighbours interleaved by source pixel
    a_r, b_r = idx[:, :-1], idx[:, 1:]
    a_d, b_d = idx[:-1, :], idx[1:, :]
    a = np.concatenate([a_r.ravel(), a_d.ravel()])
    b = np.concatenate([b_r.ravel(), b_d.ravel()])
    order = np.lexsort((np.concatenate([np.zeros(a_r.size), np.ones(a_d.size)]), a))
    return a[order], b[order]


def oversegment(image, params=None, *, scale=None, sigma=None, min_size=None):
    """Oversegment an RGB image into 4-connected super-pixels.

    Parameters
    ----------
    image : ndarray, shape (H, W, 3)
        8-bit RGB values.
    params : SegmentParams, optional
        Keyword overrides take precedence over ``params``.

    Returns
    -------
    SuperPixelMap
    """
    image = np.asarray(image)
    if image.size == 0:
        raise InvalidInputError("empty image")
    check_image(image)
    params = params or SegmentParams()
    params = SegmentParams(
        scale=params.scale if scale is None else scale,
        sigma=params.sigma if sigma is None else sigma,
        min_size=params.min_size if min_size is None else min_size,
    )
    h, w = image.shape[:2]
    if params.min_size > h * w:
        raise InvalidInputError("min_size exceeds the number of pixels")

    smooth = image.astype(np.float64)
    if params.sigma > 0:
        smooth = ndimage.gaussian_filter(
            smooth, sigma=(params.sigma, params.sigma, 0), mode="nearest", truncate=4.0
        )
    a, b = _grid_edges(h, w)
    flat = smooth.reshape(-1, 3)
    weights = np.sqrt(((flat[a] - flat[b]) ** 2).sum(axis=1))
    order = np.argsort(weights, kind="stable")
    roots = kernels.segment_graph(
        h * w,
        np.ascontiguousarray(a[order]),
        np.ascontiguousarray(b[order]),
        np.ascontiguousarray(weights[order]),
        float(params.scale),
        int(params.min_size),
    )
    return SuperPixelMap(relabel_in_raster_order(roots.reshape(h, w)))


def adjacency(spmap):
    """Unordered pairs ``(a, b)``, ``a < b``, of 4-adjacent super-pixels."""
    seg = spmap.segment_id if isinstance(spmap, SuperPixelMap) else np.asarray(spmap)
    pairs = [
        np.stack([seg[:, :-1].ravel(), seg[:, 1:].ravel()], axis=1),
        np.stack([seg[:-1, :].ravel(), seg[1:, :].ravel()], axis=1),
    ]
    pairs = np.concatenate(pairs)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if pairs.size == 0:
        return []
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    return [(int(x), int(y)) for x, y in pairs]


def render_segments(spmap):
    """Debug rendering: each super-pixel painted a distinct colour."""
    from sceneparse.imageio import colorize

    return colorize(spmap.segment_id, spmap.n_segments)
