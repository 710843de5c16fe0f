"""Dataset ingestion, training, parsing, evaluation and grid search."""
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sceneparse import lda as lda_mod
from sceneparse.bundle import ModelBundle
from sceneparse.classify import (
    AccuracyTable,
    build_accuracy_table,
    label_all_k,
    likelihoods_at_k,
    pixel_accuracy_per_k,
    retrieval_neighbors,
    select_adaptive_k,
)
from sceneparse.config import Config, worker_count
from sceneparse.errors import InvalidInputError, UndefinedMetricError
from sceneparse.evaluation import make_report, ndcg, retrieval_relevance
from sceneparse.features import assign_training_labels, extract
from sceneparse.imageio import VOID, read_image, read_label_dictionary, read_mask
from sceneparse.retrieval import TrainingIndex, build_retrieval_set
from sceneparse.segmentation import oversegment
from sceneparse.smoothing import (
    MrfProblem,
    alpha_beta_swap,
    build_cooccurrence,
    data_term,
    gradient_weights,
    label_cost_matrix,
)

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".tif", ".tiff"}


# ---------------------------------------------------------------- datasets

@dataclass
class Pair:
    image: str
    mask: str
    split: str

    @property
    def name(self):
        return os.path.basename(self.image)


@dataclass
class DatasetManifest:
    """Image/mask pairs with split tags and a label dictionary.

    Paths are stored absolute; ``root`` is the directory they were
    resolved against.
    """

    root: str
    label_dictionary: str
    pairs: list

    def __post_init__(self):
        missing = [p for p in [self.label_dictionary] + [f for pr in self.pairs for f in (pr.image, pr.mask) if f]
                   if not os.path.isfile(p)]
        if missing:
            raise InvalidInputError(f"missing dataset files: {missing[:5]}")

    @property
    def labels(self):
        return read_label_dictionary(self.label_dictionary)

    def split(self, name):
        return [p for p in self.pairs if p.split == name]


def _discover(root):
    """Manifest from ``images/<split>/`` and ``masks/<split>/`` folders."""
    pairs = []
    for split in ("train", "test"):
        img_dir = root / "images" / split
        if not img_dir.is_dir():
            continue
        for img in sorted(img_dir.iterdir()):
            if img.suffix.lower() not in _IMAGE_SUFFIXES:
                continue
            mask = root / "masks" / split / (img.stem + ".png")
            pairs.append(Pair(str(img), str(mask), split))
    if not pairs:
        raise InvalidInputError(f"{root} has neither {MANIFEST} nor images/train, images/test folders")
    return DatasetManifest(str(root), str(root / "labels.txt"), pairs)


def load_manifest(path):
    """Read a dataset manifest.

    ``path`` is a manifest JSON file or a directory containing
    ``manifest.json``. A directory without one is scanned for the
    ``images/{train,test}``, ``masks/{train,test}`` and ``labels.txt``
    layout instead.
    """
    path = Path(path)
    if path.is_dir():
        if not (path / MANIFEST).is_file():
            return _discover(path)
        path = path / MANIFEST
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read manifest {path}: {exc}") from exc
    root = path.parent
    pairs = []
    for entry in d.get("pairs", []):
        split = entry.get("split", "train")
        if split not in ("train", "test"):
            raise InvalidInputError(f"unknown split {split!r} in {path}")
        mask = entry.get("mask")
        pairs.append(Pair(str(root / entry["image"]), str(root / mask) if mask else None, split))
    return DatasetManifest(str(root), str(root / d.get("label_dictionary", "labels.txt")), pairs)


def read_pair(pair, n_labels):
    """Image and mask of a pair, checked for matching size and label range."""
    rgb = read_image(pair.image)
    mask = read_mask(pair.mask) if pair.mask else None
    if mask is not None:
        if mask.shape != rgb.shape[:2]:
            raise InvalidInputError(f"{pair.mask}: mask size {mask.shape} differs from image {rgb.shape[:2]}")
        bad = (mask != VOID) & (mask >= n_labels)
        if bad.any():
            raise InvalidInputError(f"{pair.mask}: label id {int(mask[bad].max())} not in the dictionary")
    return rgb, mask


# ---------------------------------------------------------------- helpers

@contextmanager
def _mapper(workers=None):
    n = worker_count() if workers is None else max(1, int(workers))
    if n == 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool.map


@dataclass
class TrainingImage:
    name: str
    spmap: object
    raw: np.ndarray
    mask: np.ndarray
    seg_labels: np.ndarray
    reduced: np.ndarray = None


def describe(rgb, config):
    """Super-pixels and raw descriptors of an image."""
    spmap = oversegment(rgb, config.segmentation)
    return spmap, extract(rgb, spmap, config.features)


def _load_training(manifest, config, n_labels, map_fn):
    pairs = manifest.split("train")
    if not pairs:
        raise InvalidInputError("the manifest has no training pairs")
    for p in pairs:
        if p.mask is None:
            raise InvalidInputError(f"training image {p.image} has no mask")

    def run(pair):
        rgb, mask = read_pair(pair, n_labels)
        spmap, raw = describe(rgb, config)
        name = os.path.relpath(pair.image, manifest.root)
        return TrainingImage(name, spmap, raw, mask, assign_training_labels(spmap, mask))

    return list(map_fn(run, pairs))


@dataclass
class TrainingState:
    records: list
    lda: object
    index: TrainingIndex
    labels: list


def build_training_state(manifest, config, map_fn=map):
    """Segment, describe and label all training images, fit LDA, index."""
    labels = manifest.labels
    n_labels = len(labels)
    records = _load_training(manifest, config, n_labels, map_fn)
    present = set()
    for r in records:
        present.update(np.unique(r.mask[r.mask != VOID]).tolist())
    if len(present) < 2:
        raise InvalidInputError("invalid dataset: fewer than 2 labels occur in the training masks")
    X = np.concatenate([r.raw[r.seg_labels >= 0] for r in records])
    y = np.concatenate([r.seg_labels[r.seg_labels >= 0] for r in records])
    if np.unique(y).size < 2:
        raise InvalidInputError("invalid dataset: fewer than 2 labels reach the 50% super-pixel overlap")
    model = lda_mod.fit(X, y)
    for r in records:
        r.reduced = model.project(r.raw)
    image_of = np.concatenate([np.full(int((r.seg_labels >= 0).sum()), t) for t, r in enumerate(records)])
    index = TrainingIndex(
        features=np.concatenate([r.reduced[r.seg_labels >= 0] for r in records]),
        image_of=image_of.astype(np.int64),
        labels=y,
        n_images=len(records),
        n_labels=n_labels,
        image_names=tuple(r.name for r in records),
    )
    return TrainingState(records, model, index, labels)


def loo_subset(n_images, config):
    """Training images evaluated leave-one-out, honouring ``loo_max_images``."""
    cap = config.loo_max_images
    if cap is None or cap >= n_images:
        return np.arange(n_images)
    rng = np.random.default_rng(config.loo_seed)
    return np.sort(rng.choice(n_images, size=int(cap), replace=False))


# ---------------------------------------------------------------- train

def train(manifest, config=None, workers=None, progress=None):
    """Fit a :class:`ModelBundle` on the training split of ``manifest``.

    Raises
    ------
    InvalidInputError
        Unreadable files (message names the path) or fewer than two labels.
    """
    config = config or Config()
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    with _mapper(workers) as map_fn:
        state = build_training_state(manifest, config, map_fn)
        logger.info("indexed %d super-pixels from %d images", state.index.size, len(state.records))
        table = build_accuracy_table(
            state.records, state.index, config.k_m, config.tau, config.k_max, config.likelihood_eps,
            subset=loo_subset(len(state.records), config), progress=progress, map_fn=map_fn,
        )
    cooc = build_cooccurrence([r.mask for r in state.records], len(state.labels), config.cooccurrence_eps)
    return ModelBundle(config, state.labels, state.lda, state.index, table, cooc)


# ---------------------------------------------------------------- parse

@dataclass
class PreparedImage:
    """Everything about a query image that does not depend on ``k`` or ``lam``."""

    rgb: np.ndarray
    spmap: object
    reduced: np.ndarray
    retrieval: object
    neighbors: np.ndarray
    edges: tuple


@dataclass
class ParseResult:
    labels: np.ndarray
    initial: np.ndarray
    k: int
    adaptive: bool
    retrieval: object
    likelihood: np.ndarray
    segment_labels: np.ndarray
    swap: object = None


class Parser:
    """Label images with a trained bundle.

    Parameters
    ----------
    bundle : ModelBundle
    k_max : int, optional
        Neighbours kept per super-pixel; defaults to the configured
        ``k_max``. Fixed ``k`` values above it are rejected.
    """

    def __init__(self, bundle, k_max=None):
        self.bundle = bundle
        self.config = bundle.config
        self.k_max = int(k_max or self.config.k_max)
        counts = bundle.index.label_counts
        self.global_counts = counts
        self.active = np.flatnonzero(counts > 0)
        self._V = label_cost_matrix(bundle.cooccurrence.P, self.config.prob_floor)[np.ix_(self.active, self.active)]

    def prepare(self, rgb):
        cfg = self.config
        spmap, raw = describe(rgb, cfg)
        Q = self.bundle.lda.project(raw)
        order = None
        if cfg.shuffle_queries:
            order = np.random.default_rng(cfg.shuffle_seed).permutation(Q.shape[0])
        rset = build_retrieval_set(Q, self.bundle.index, cfg.k_m, cfg.tau, query_order=order)
        nb = retrieval_neighbors(Q, self.bundle.index, rset.retrieved, self.k_max)
        return PreparedImage(rgb, spmap, Q, rset, nb, gradient_weights(rgb))

    def label(self, prep, fixed_k=None, lam=None):
        """Initial and smoothed labels of a prepared image."""
        cfg = self.config
        if fixed_k is not None:
            k = int(fixed_k)
            if not 1 <= k <= self.k_max:
                raise InvalidInputError(f"fixed k must lie in [1, {self.k_max}]")
        else:
            k = select_adaptive_k(prep.retrieval, self.bundle.accuracy, cfg.fallback_k)
        L, seg_labels = likelihoods_at_k(prep.neighbors, self.global_counts, k, cfg.likelihood_eps)
        h, w = prep.spmap.shape
        initial = seg_labels[prep.spmap.segment_id].astype(np.uint8)

        lam = cfg.lam if lam is None else float(lam)
        a, b, xi = prep.edges
        unary = data_term(L[:, self.active], prep.spmap)
        problem = MrfProblem(unary, a, b, xi, self._V, lam)
        start = np.searchsorted(self.active, initial.ravel())
        swap = alpha_beta_swap(problem, start, cfg.max_sweeps)
        final = self.active[swap.labels].reshape(h, w).astype(np.uint8)
        return ParseResult(final, initial, k, fixed_k is None, prep.retrieval, L, seg_labels, swap)

    def parse(self, rgb, fixed_k=None, lam=None):
        if fixed_k is not None and fixed_k > self.k_max:
            return Parser(self.bundle, k_max=fixed_k).parse(rgb, fixed_k, lam)
        return self.label(self.prepare(rgb), fixed_k, lam)


# ---------------------------------------------------------------- evaluate

@dataclass
class EvaluationResult:
    report: object
    results: dict = field(default_factory=dict)


def evaluate(manifest, bundle, split="test", fixed_k=None, lam=None, workers=None):
    """Parse every pair of a split and score it against its mask.

    Unreadable pairs are skipped with a warning.

    Raises
    ------
    UndefinedMetricError
        The split is empty or has no labelled pixels.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    pairs = [p for p in manifest.split(split) if p.mask]
    if not pairs:
        raise UndefinedMetricError(f"the {split} split is empty")
    parser = Parser(bundle, k_max=max(bundle.config.k_max, fixed_k or 0))
    sep = bundle.config.scene_separator
    names = bundle.index.image_names

    def run(pair):
        try:
            rgb, mask = read_pair(pair, bundle.n_labels)
        except InvalidInputError as exc:
            logger.warning("skipping %s: %s", pair.image, exc)
            return pair, None, None
        return pair, mask, parser.parse(rgb, fixed_k, lam)

    with _mapper(workers) as map_fn:
        done = [r for r in map_fn(run, pairs) if r[1] is not None]
    if not done:
        raise UndefinedMetricError("no readable pairs in the split")

    preds, initial, gts, rows, ndcgs, ks = [], [], [], [], [], []
    results = {}
    for pair, mask, res in done:
        valid = mask != VOID
        n = int(valid.sum())
        rel = retrieval_relevance(pair.name, [names[i] for i in res.retrieval.images], sep) if names else None
        score = ndcg(rel, res.retrieval.k_r) if rel else None
        rows.append({
            "image": os.path.relpath(pair.image, manifest.root),
            "per_pixel": None if n == 0 else float((res.labels[valid] == mask[valid]).mean()),
            "initial_per_pixel": None if n == 0 else float((res.initial[valid] == mask[valid]).mean()),
            "k": res.k,
            "k_r": res.retrieval.k_r,
            "ndcg": score,
        })
        preds.append(res.labels)
        initial.append(res.initial)
        gts.append(mask)
        ks.append(res.k)
        if score is not None:
            ndcgs.append(score)
        results[pair.image] = res
    report = make_report(bundle.labels, preds, gts, initial, rows, ndcgs, ks)
    return EvaluationResult(report, results)


# ---------------------------------------------------------------- grid search

DEFAULT_TAU_GRID = (0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_KM_GRID = (500, 1000, 1500, 2000, 2500)


@dataclass
class GridResult:
    """Leave-one-out per-pixel accuracy of every ``(tau, k_m)`` point."""

    points: list  # dicts with tau, k_m, score
    best_tau: float
    best_km: int
    best_score: float

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())

    def to_csv(self):
        lines = ["tau,k_m,score"]
        lines += [f"{p['tau']:g},{p['k_m']},{p['score']:.6f}" for p in self.points]
        return "\n".join(lines) + "\n"


def pick_best(points):
    """Highest score; ties go to the smaller ``k_m``, then the smaller ``tau``."""
    if not points:
        raise InvalidInputError("empty grid")
    return min(points, key=lambda p: (-p["score"], p["k_m"], p["tau"]))


def loo_score(state, tau, k_m, config, subset, map_fn=map):
    """Per-pixel accuracy of adaptive-k leave-one-out labelling.

    Each image in ``subset`` is labelled from the other training images;
    its ``k`` is chosen from the accuracy curves of its retrieved images.
    """
    records, index = state.records, state.index
    n = len(records)
    k_max = config.k_max

    def run(t):
        r = records[t]
        if not (r.mask != VOID).any():
            return t, None
        rset = build_retrieval_set(r.reduced, index, k_m, tau, exclude_image=t)
        nl = retrieval_neighbors(r.reduced, index, rset.retrieved, k_max)
        k_labels = label_all_k(nl, index.label_counts, k_max, config.likelihood_eps)
        correct, total = pixel_accuracy_per_k(r.spmap, k_labels, r.mask)
        return t, (rset, correct, total)

    out = dict(map_fn(run, list(subset)))
    correct = np.zeros((n, k_max))
    total = np.zeros(n)
    valid = np.zeros(n, dtype=bool)
    for t, res in out.items():
        if res is not None:
            correct[t], total[t] = res[1], res[2]
            valid[t] = res[2] > 0
    table = AccuracyTable(correct, total, valid)
    hit = tot = 0.0
    for t, res in out.items():
        if res is None or not valid[t]:
            continue
        k = select_adaptive_k(res[0], table, config.fallback_k)
        hit += correct[t, k - 1]
        tot += total[t]
    if tot == 0:
        raise UndefinedMetricError("no labelled pixels among the leave-one-out images")
    return hit / tot


def grid_search(manifest, tau_grid=DEFAULT_TAU_GRID, km_grid=DEFAULT_KM_GRID, config=None,
                workers=None, progress=None):
    """Choose ``(tau, k_m)`` by leave-one-out accuracy on the training split."""
    config = config or Config()
    tau_grid, km_grid = list(tau_grid), list(km_grid)
    if not tau_grid or not km_grid:
        raise InvalidInputError("tau and k_m grids must be non-empty")
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    points = []
    with _mapper(workers) as map_fn:
        state = build_training_state(manifest, config, map_fn)
        subset = loo_subset(len(state.records), config)
        grid = [(float(t), int(k)) for k in km_grid for t in tau_grid]
        for i, (tau, k_m) in enumerate(grid, start=1):
            score = loo_score(state, tau, k_m, config, subset, map_fn)
            points.append({"tau": tau, "k_m": k_m, "score": float(score)})
            if progress:
                progress(i, len(grid))
    best = pick_best(points)
    return GridResult(points, best["tau"], best["k_m"], best["score"])
