"""Per-super-pixel descriptors and training-label assignment.

The channel catalogue mirrors a standard 20-channel super-pixel descriptor
(shape, position, colour, texture and context families, 1708 dimensions in
total). Texture channels quantise oriented gradients into a fixed
100-word vocabulary, so the texton and SIFT channels need no trained
codebook: "texton" uses a fine smoothing scale and "sift" a coarser one.
GIST is a simplified 4x4-grid, 5-scale x 4-orientation gradient-energy
descriptor of the whole image.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from sceneparse.errors import InvalidInputError
from sceneparse.imageio import VOID

CATALOG = (
    "centered_mask",
    "bounding_box",
    "area",
    "absolute_mask",
    "top_height",
    "texton_hist",
    "dilated_texton_hist",
    "sift_hist",
    "dilated_sift_hist",
    "sift_hist_bottom",
    "sift_hist_top",
    "sift_hist_right",
    "sift_hist_left",
    "mean_color",
    "color_std",
    "color_hist",
    "dilated_color_hist",
    "color_thumbnail",
    "masked_color_thumbnail",
    "gist",
)

DEFAULT_CHANNELS = (
    "centered_mask",
    "bounding_box",
    "area",
    "top_height",
    "mean_color",
    "color_std",
    "color_hist",
    "texton_hist",
    "color_thumbnail",
)

HISTOGRAM_CHANNELS = frozenset(
    name for name in CATALOG if name.endswith("_hist") or "_hist_" in name
)

_ORIENT_BINS = 10
_MAG_BINS = 10
# gradient magnitude bin edges for luminance in [0, 1]
_MAG_EDGES = np.geomspace(0.004, 0.4, _MAG_BINS - 1)
_GIST_SCALES = (1.0, 2.0, 4.0, 8.0, 16.0)
_GIST_ORIENT = 4
_GIST_GRID = 4


@dataclass(frozen=True)
class FeatureRegistry:
    """Enabled channels and their extraction parameters."""

    channels: tuple = DEFAULT_CHANNELS
    hist_bins: int = 11
    mask_size: int = 8
    thumb_size: int = 8
    dilation_radius: int = 10
    texton_sigma: float = 1.0
    sift_sigma: float = 2.0

    def __post_init__(self):
        if not self.channels:
            raise InvalidInputError("at least one feature channel must be enabled")
        unknown = [c for c in self.channels if c not in CATALOG]
        if unknown:
            raise InvalidInputError(f"unknown feature channels: {unknown}")
        if len(set(self.channels)) != len(self.channels):
            raise InvalidInputError("duplicate feature channels")

    @classmethod
    def full(cls, **kwargs):
        return cls(channels=CATALOG, **kwargs)

    def channel_length(self, name):
        m2 = self.mask_size ** 2
        t3 = 3 * self.thumb_size ** 2
        return {
            "centered_mask": m2,
            "absolute_mask": m2,
            "bounding_box": 2,
            "area": 1,
            "top_height": 1,
            "mean_color": 3,
            "color_std": 3,
            "color_hist": 3 * self.hist_bins,
            "dilated_color_hist": 3 * self.hist_bins,
            "color_thumbnail": t3,
            "masked_color_thumbnail": t3,
            "gist": len(_GIST_SCALES) * _GIST_ORIENT * _GIST_GRID ** 2,
        }.get(name, _ORIENT_BINS * _MAG_BINS)

    @property
    def layout(self):
        """Ordered ``(name, offset, length)`` triples."""
        out, offset = [], 0
        for name in self.channels:
            n = self.channel_length(name)
            out.append((name, offset, n))
            offset += n
        return out

    @property
    def dimension(self):
        return sum(n for _, _, n in self.layout)

    def slice(self, name):
        for ch, offset, n in self.layout:
            if ch == name:
                return slice(offset, offset + n)
        raise KeyError(name)

    def to_dict(self):
        return {
            "channels": list(self.channels),
            "hist_bins": self.hist_bins,
            "mask_size": self.mask_size,
            "thumb_size": self.thumb_size,
            "dilation_radius": self.dilation_radius,
            "texton_sigma": self.texton_sigma,
            "sift_sigma": self.sift_sigma,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["channels"] = tuple(d.get("channels", DEFAULT_CHANNELS))
        return cls(**d)


def _box_resize(a, out_h, out_w):
    """Area-average resize of the first two axes."""
    a = np.asarray(a, dtype=np.float64)
    h, w = a.shape[:2]
    if h < out_h:
        a = np.repeat(a, -(-out_h // h), axis=0)
    if w < out_w:
        a = np.repeat(a, -(-out_w // w), axis=1)
    h, w = a.shape[:2]
    rows = (np.arange(h) * out_h) // h
    cols = (np.arange(w) * out_w) // w
    cell = (rows[:, None] * out_w + cols[None, :]).ravel()
    counts = np.bincount(cell, minlength=out_h * out_w).astype(np.float64)
    flat = a.reshape(h * w, -1)
    sums = np.stack(
        [np.bincount(cell, weights=flat[:, c], minlength=out_h * out_w) for c in range(flat.shape[1])],
        axis=1,
    )
    out = sums / counts[:, None]
    return out.reshape((out_h, out_w) + a.shape[2:])


def _normalized_hist(codes, n_bins):
    hist = np.bincount(codes, minlength=n_bins).astype(np.float64)
    total = hist.sum()
    return hist / total if total > 0 else hist


def _disk(radius):
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius ** 2


def _luminance(rgb):
    return rgb @ np.array([0.299, 0.587, 0.114])


def _gradient_words(gray, sigma):
    """Per-pixel word id in ``[0, 100)`` from orientation x magnitude."""
    g = ndimage.gaussian_filter(gray, sigma, mode="nearest")
    gy = ndimage.sobel(g, axis=0, mode="nearest") / 8.0
    gx = ndimage.sobel(g, axis=1, mode="nearest") / 8.0
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    o_bin = np.minimum((theta / np.pi * _ORIENT_BINS).astype(np.int64), _ORIENT_BINS - 1)
    m_bin = np.searchsorted(_MAG_EDGES, mag)
    return (o_bin * _MAG_BINS + m_bin).astype(np.int64)


def _gist(gray):
    h, w = gray.shape
    rows = np.minimum((np.arange(h) * _GIST_GRID) // h, _GIST_GRID - 1)
    cols = np.minimum((np.arange(w) * _GIST_GRID) // w, _GIST_GRID - 1)
    cell = (rows[:, None] * _GIST_GRID + cols[None, :]).ravel()
    counts = np.bincount(cell, minlength=_GIST_GRID ** 2)
    out = []
    for s in _GIST_SCALES:
        g = ndimage.gaussian_filter(gray, s, mode="nearest")
        gy = np.gradient(g, axis=0)
        gx = np.gradient(g, axis=1)
        for k in range(_GIST_ORIENT):
            phi = np.pi * k / _GIST_ORIENT
            energy = np.abs(gx * np.cos(phi) + gy * np.sin(phi)).ravel()
            out.append(np.bincount(cell, weights=energy, minlength=_GIST_GRID ** 2) / counts)
    return np.concatenate(out)


class _ImageContext:
    """Per-image quantities shared by all super-pixels."""

    def __init__(self, image, registry):
        self.rgb = np.asarray(image, dtype=np.float64) / 255.0
        self.h, self.w = self.rgb.shape[:2]
        self.registry = registry
        ch = set(registry.channels)
        bins = registry.hist_bins
        self.color_codes = None
        if ch & {"color_hist", "dilated_color_hist"}:
            q = np.minimum((self.rgb * bins).astype(np.int64), bins - 1)
            self.color_codes = q + np.arange(3) * bins
        gray = _luminance(self.rgb)
        self.texton = None
        self.sift = None
        self.gist = None
        if ch & {"texton_hist", "dilated_texton_hist"}:
            self.texton = _gradient_words(gray, registry.texton_sigma)
        if any(c.startswith(("sift", "dilated_sift")) for c in ch):
            self.sift = _gradient_words(gray, registry.sift_sigma)
        if "gist" in ch:
            self.gist = _gist(gray)


def _segment_features(ctx, seg_mask_crop, bbox, crop_origin, full_mask, area):
    reg = ctx.registry
    r0, c0, r1, c1 = bbox
    oy, ox = crop_origin
    h, w = ctx.h, ctx.w
    # crop window around the bbox padded for dilation
    ch_, cw_ = seg_mask_crop.shape
    win = (slice(oy, oy + ch_), slice(ox, ox + cw_))
    mask = seg_mask_crop
    rgb_win = ctx.rgb[win]
    pix = rgb_win[mask]

    dil = None
    needs_dilation = any(
        c.startswith("dilated") or c in ("sift_hist_top", "sift_hist_bottom", "sift_hist_left", "sift_hist_right")
        for c in reg.channels
    )
    if needs_dilation:
        dil = ndimage.binary_dilation(mask, structure=_disk(reg.dilation_radius))
    ring = dil & ~mask if dil is not None else None
    rows = np.arange(oy, oy + ch_)[:, None]
    cols = np.arange(ox, ox + cw_)[None, :]

    bbox_sl = (slice(r0 - oy, r1 - oy + 1), slice(c0 - ox, c1 - ox + 1))
    vals = []
    for name in reg.channels:
        if name == "centered_mask":
            v = _box_resize(mask[bbox_sl], reg.mask_size, reg.mask_size).ravel()
        elif name == "absolute_mask":
            v = _box_resize(full_mask, reg.mask_size, reg.mask_size).ravel()
        elif name == "bounding_box":
            v = np.array([(c1 - c0 + 1) / w, (r1 - r0 + 1) / h])
        elif name == "area":
            v = np.array([area / (h * w)])
        elif name == "top_height":
            v = np.array([1.0 - r0 / h])
        elif name == "mean_color":
            v = pix.mean(axis=0)
        elif name == "color_std":
            v = pix.std(axis=0)
        elif name == "color_hist":
            v = _normalized_hist(ctx.color_codes[win][mask].ravel(), 3 * reg.hist_bins)
        elif name == "dilated_color_hist":
            v = _normalized_hist(ctx.color_codes[win][dil].ravel(), 3 * reg.hist_bins)
        elif name == "color_thumbnail":
            v = _box_resize(rgb_win[bbox_sl], reg.thumb_size, reg.thumb_size).ravel()
        elif name == "masked_color_thumbnail":
            masked = rgb_win[bbox_sl] * mask[bbox_sl][..., None]
            v = _box_resize(masked, reg.thumb_size, reg.thumb_size).ravel()
        elif name == "gist":
            v = ctx.gist
        else:
            words = ctx.texton if "texton" in name else ctx.sift
            words = words[win]
            if name.startswith("dilated"):
                region = dil
            elif name.endswith("_top"):
                region = ring & (rows < r0)
            elif name.endswith("_bottom"):
                region = ring & (rows > r1)
            elif name.endswith("_left"):
                region = ring & (cols < c0)
            elif name.endswith("_right"):
                region = ring & (cols > c1)
            else:
                region = mask
            v = _normalized_hist(words[region], _ORIENT_BINS * _MAG_BINS)
        vals.append(np.asarray(v, dtype=np.float64))
    return np.concatenate(vals)


def extract(image, spmap, registry=None):
    """Describe every super-pixel of ``spmap``.

    Returns an ``(n_segments, registry.dimension)`` float array whose rows
    follow segment-id order and ``registry.layout``.
    """
    registry = registry or FeatureRegistry()
    image = np.asarray(image)
    if image.shape[:2] != spmap.shape:
        raise InvalidInputError("super-pixel map does not match the image")
    ctx = _ImageContext(image, registry)
    pad = registry.dilation_radius
    h, w = spmap.shape
    seg = spmap.segment_id
    out = np.empty((spmap.n_segments, registry.dimension))
    need_full = "absolute_mask" in registry.channels
    for s in spmap.segments:
        if s.area == 0:
            raise RuntimeError(f"segment {s.id} has no pixels")
        r0, c0, r1, c1 = s.bbox
        oy, ox = max(r0 - pad, 0), max(c0 - pad, 0)
        ey, ex = min(r1 + pad + 1, h), min(c1 + pad + 1, w)
        crop = seg[oy:ey, ox:ex] == s.id
        full = (seg == s.id) if need_full else None
        out[s.id] = _segment_features(ctx, crop, s.bbox, (oy, ox), full, s.area)
    return out


def overlap_counts(segment_pixels, mask_flat):
    return np.bincount(mask_flat[segment_pixels], minlength=VOID + 1)


def assign_training_label(segment, ground_truth_mask):
    """Label covering at least half of the segment, or ``None``.

    ``segment`` is a :class:`~sceneparse.segmentation.Segment` or an array of
    flat pixel indices. Void pixels count towards the segment area but never
    win. An exact half/half tie goes to the smaller label id.
    """
    pixels = getattr(segment, "pixels", segment)
    mask_flat = np.asarray(ground_truth_mask).ravel()
    pixels = np.asarray(pixels)
    counts = overlap_counts(pixels, mask_flat)
    counts[VOID] = 0
    winners = np.flatnonzero(counts * 2 >= pixels.size)
    return int(winners[0]) if winners.size else None


def assign_training_labels(spmap, ground_truth_mask):
    """Vectorised :func:`assign_training_label` over all segments; -1 = none."""
    mask = np.asarray(ground_truth_mask)
    if mask.shape != spmap.shape:
        raise InvalidInputError("mask dimensions do not match the image")
    n = spmap.n_segments
    joint = np.bincount(
        spmap.segment_id.ravel().astype(np.int64) * (VOID + 1) + mask.ravel(),
        minlength=n * (VOID + 1),
    ).reshape(n, VOID + 1)
    joint[:, VOID] = 0
    frac_ok = joint * 2 >= spmap.areas[:, None]
    has = frac_ok.any(axis=1)
    return np.where(has, np.argmax(frac_ok, axis=1), -1)
