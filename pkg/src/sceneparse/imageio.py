"""Reading and writing images, label masks and label dictionaries.

Images are 8-bit RGB (PNG or portable pixmap). Masks are 8-bit
single-channel PNGs whose pixel value is the label id, with 255 marking
void (unlabelled) pixels. A label dictionary is a UTF-8 text file holding
one label name per line; the line number is the id.
"""
from pathlib import Path

import numpy as np
from PIL import Image

from sceneparse.errors import InvalidInputError

VOID = 255


def read_image(path):
    """Load an image as an ``(H, W, 3)`` uint8 array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot decode image {path}: {exc}") from exc
    check_image(rgb)
    return rgb


def check_image(rgb):
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidInputError(f"expected an (H, W, 3) image, got shape {rgb.shape}")
    if rgb.shape[0] < 1 or rgb.shape[1] < 1:
        raise InvalidInputError("empty image")


def write_image(path, rgb):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def read_mask(path):
    """Load a label mask as an ``(H, W)`` uint8 array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "P"):
                raise InvalidInputError(f"mask {path} must be single-channel, got mode {im.mode}")
            mask = np.asarray(im, dtype=np.uint8)
    except OSError as exc:
        raise InvalidInputError(f"cannot decode mask {path}: {exc}") from exc
    return mask


def write_mask(path, mask):
    mask = np.asarray(mask)
    if mask.min(initial=0) < 0 or mask.max(initial=0) > VOID:
        raise InvalidInputError("mask values must lie in [0, 255]")
    Image.fromarray(mask.astype(np.uint8), mode="L").save(path)


def read_label_dictionary(path):
    text = Path(path).read_text(encoding="utf-8")
    labels = [line.strip() for line in text.splitlines()]
    while labels and not labels[-1]:
        labels.pop()
    if not labels:
        raise InvalidInputError(f"label dictionary {path} is empty")
    if len(labels) >= VOID:
        raise InvalidInputError("at most 255 labels fit in an 8-bit mask")
    return labels


def write_label_dictionary(path, labels):
    Path(path).write_text("".join(f"{name}\n" for name in labels), encoding="utf-8")


def palette(n):
    """Distinct, deterministic RGB colours for ``n`` ids."""
    ids = np.arange(n, dtype=np.int64)
    # golden-ratio hue walk keeps neighbouring ids apart
    hue = (ids * 0.618033988749895) % 1.0
    sat = 0.55 + 0.35 * ((ids * 7) % 3) / 2
    val = 0.95 - 0.25 * ((ids * 5) % 2)
    h6 = hue * 6.0
    c = val * sat
    x = c * (1 - np.abs(h6 % 2 - 1))
    zero = np.zeros_like(c)
    sector = np.floor(h6).astype(int) % 6
    rgb = np.select(
        [sector[:, None] == k for k in range(6)],
        [
            np.stack([c, x, zero], 1),
            np.stack([x, c, zero], 1),
            np.stack([zero, c, x], 1),
            np.stack([zero, x, c], 1),
            np.stack([x, zero, c], 1),
            np.stack([c, zero, x], 1),
        ],
    )
    rgb += (val - c)[:, None]
    return np.round(rgb * 255).astype(np.uint8)


def colorize(label_map, n_colors=None):
    """Render an id map as RGB; void (255) in a label mask stays black."""
    label_map = np.asarray(label_map)
    n = int(label_map.max()) + 1 if n_colors is None else n_colors
    colors = palette(max(n, 1))
    out = np.zeros(label_map.shape + (3,), dtype=np.uint8)
    valid = label_map < n
    out[valid] = colors[label_map[valid]]
    return out
