"""Synthetic street and countryside scenes with exact label masks.

Each image has a sky gradient over a textured ground plane and one to
three objects (trees or cars). File names carry the scene class before the
first underscore, e.g. ``street_0003.png``, so retrieval can be scored.
"""
import json
import os

import numpy as np
from scipy import ndimage

from sceneparse.errors import InvalidInputError
from sceneparse.imageio import write_image, write_label_dictionary, write_mask

LABELS = ("sky", "ground", "tree", "car")
SKY, GROUND, TREE, CAR = range(4)
SCENES = ("countryside", "street", "park")

_CAR_COLORS = np.array([[200, 30, 30], [30, 60, 190], [230, 200, 40], [240, 240, 240]], dtype=np.float64)


def _noise(rng, shape, sigma, smooth=0.0):
    n = rng.normal(0.0, 1.0, shape)
    if smooth > 0:
        n = ndimage.gaussian_filter(n, smooth, mode="wrap")
        n /= n.std() + 1e-12
    return sigma * n


def _sky(rng, h, w):
    top = np.array([40, 90, 200]) + rng.uniform(-15, 15, 3)
    bottom = np.array([160, 195, 240]) + rng.uniform(-15, 15, 3)
    t = np.linspace(0.0, 1.0, h)[:, None, None]
    img = (1 - t) * top + t * bottom
    return np.broadcast_to(img, (h, w, 3)) + _noise(rng, (h, w, 1), 2.0)


def _ground(rng, h, w, scene):
    if scene == "street":
        base = np.array([105, 105, 110]) + rng.uniform(-10, 10, 3)
        tex = _noise(rng, (h, w, 1), 12.0)
    else:
        base = np.array([120, 150, 70]) + rng.uniform(-10, 10, 3)
        tex = _noise(rng, (h, w, 1), 14.0, smooth=1.0) + _noise(rng, (h, w, 3), 6.0)
    return base + tex


def _ellipse(h, w, cy, cx, ry, rx):
    yy, xx = np.mgrid[:h, :w]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def _place_tree(rng, img, mask, horizon):
    h, w = mask.shape
    ry = rng.uniform(0.16, 0.26) * h
    rx = rng.uniform(0.1, 0.16) * w
    cx = rng.uniform(rx, w - rx)
    cy = horizon - rng.uniform(0.2, 0.6) * ry
    crown = _ellipse(h, w, cy, cx, ry, rx)
    yy, xx = np.mgrid[:h, :w]
    trunk = (np.abs(xx - cx) <= max(1.5, 0.15 * rx)) & (yy >= cy) & (yy <= min(h - 1, cy + 1.6 * ry))
    shape = crown | trunk
    leaves = np.array([35, 85, 40]) + rng.uniform(-8, 8, 3)
    tex = _noise(rng, (h, w, 1), 18.0, smooth=0.7)
    img[crown] = (leaves + tex)[crown]
    img[trunk & ~crown] = np.array([80, 55, 35]) + _noise(rng, (int((trunk & ~crown).sum()), 3), 4.0)
    mask[shape] = TREE


def _place_car(rng, img, mask, horizon):
    h, w = mask.shape
    ch = int(rng.uniform(0.14, 0.2) * h)
    cw = int(rng.uniform(0.28, 0.4) * w)
    r1 = int(np.clip(horizon + rng.uniform(0.25, 0.8) * (h - horizon), ch + 1, h - 1))
    c0 = int(rng.integers(0, max(1, w - cw)))
    r0 = r1 - ch
    body = np.zeros_like(mask, dtype=bool)
    body[r0:r1, c0:c0 + cw] = True
    cabin = np.zeros_like(body)
    cr0 = max(0, r0 - ch // 2)
    cabin[cr0:r0, c0 + cw // 5:c0 + cw - cw // 5] = True
    color = _CAR_COLORS[rng.integers(len(_CAR_COLORS))]
    img[body] = color + _noise(rng, (int(body.sum()), 1), 4.0)
    img[cabin] = 0.35 * color + np.array([30, 35, 45])
    # dark wheels along the bottom edge
    for wc in (c0 + cw // 5, c0 + cw - cw // 5):
        wheel = _ellipse(h, w, r1 - 1, wc, max(1.5, ch / 3), max(1.5, ch / 3)) & body
        img[wheel] = 25.0
    mask[body | cabin] = CAR


def make_scene(rng, scene, size=(80, 96), void_border=True):
    """One synthetic image and its label mask.

    Parameters
    ----------
    rng : numpy.random.Generator
    scene : {'countryside', 'street', 'park'}
    size : (height, width)
    void_border : bool
        Mark the one-pixel outline of every object as void (255).
    """
    h, w = size
    horizon = int(rng.uniform(0.35, 0.55) * h)
    img = np.empty((h, w, 3))
    mask = np.empty((h, w), dtype=np.uint8)
    img[:horizon] = _sky(rng, horizon, w)
    img[horizon:] = _ground(rng, h - horizon, w, scene)
    mask[:horizon] = SKY
    mask[horizon:] = GROUND

    n_obj = int(rng.integers(1, 4))
    if scene == "countryside":
        kinds = [TREE] * n_obj
    elif scene == "street":
        kinds = [CAR] * n_obj
    else:
        kinds = [TREE, CAR] + [int(rng.choice([TREE, CAR]))] * max(0, n_obj - 2)
        kinds = kinds[:max(2, n_obj)]
    for kind in kinds:
        before = mask.copy()
        (_place_tree if kind == TREE else _place_car)(rng, img, mask, horizon)
        if void_border:
            changed = mask != before
            mask[changed & ~ndimage.binary_erosion(changed, border_value=1)] = 255
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), mask


def gen_synth(seed, n_images, out_dir, test_count=None, size=(80, 96), void_border=True):
    """Write a synthetic dataset with a ``manifest.json``.

    Scenes cycle through countryside, street and park. The last
    ``test_count`` images (default ``n_images // 6``, at least one) form the
    test split. Output is byte-identical for a given seed and arguments.

    Returns the manifest path.
    """
    if n_images < 4:
        raise InvalidInputError("need at least 4 images")
    if test_count is None:
        test_count = max(1, n_images // 6)
    if not 0 <= test_count < n_images:
        raise InvalidInputError("test_count must leave at least one training image")
    rng = np.random.default_rng(seed)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "masks"), exist_ok=True)
    write_label_dictionary(os.path.join(out_dir, "labels.txt"), LABELS)
    pairs = []
    for i in range(n_images):
        scene = SCENES[i % len(SCENES)]
        img, mask = make_scene(rng, scene, size, void_border)
        name = f"{scene}_{i:04d}.png"
        write_image(os.path.join(out_dir, "images", name), img)
        write_mask(os.path.join(out_dir, "masks", name), mask)
        split = "test" if i >= n_images - test_count else "train"
        pairs.append({"image": f"images/{name}", "mask": f"masks/{name}", "split": split})
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"label_dictionary": "labels.txt", "pairs": pairs}, fh, indent=1)
        fh.write("\n")
    return path
