"""Parsing metrics: per-pixel rate, per-category rate and retrieval NDCG."""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from sceneparse.errors import InvalidInputError, UndefinedMetricError
from sceneparse.imageio import VOID


def confusion_matrix(pred, gt, n_labels):
    """``C[g, p]`` pixel counts over all non-void pixels of all image pairs.

    ``pred`` and ``gt`` are a single mask each or equal-length sequences.
    """
    if isinstance(pred, np.ndarray) and pred.ndim == 2:
        pred, gt = [pred], [gt]
    if len(pred) != len(gt):
        raise InvalidInputError("prediction and ground-truth counts differ")
    C = np.zeros((n_labels, n_labels), dtype=np.int64)
    for p, g in zip(pred, gt):
        p, g = np.asarray(p), np.asarray(g)
        if p.shape != g.shape:
            raise InvalidInputError(f"mask shapes differ: {p.shape} vs {g.shape}")
        ok = g != VOID
        gv = g[ok].astype(np.int64)
        pv = p[ok].astype(np.int64)
        if gv.size and (gv.max() >= n_labels or pv.max() >= n_labels):
            raise InvalidInputError("label id out of range")
        C += np.bincount(gv * n_labels + pv, minlength=n_labels * n_labels).reshape(n_labels, n_labels)
    return C


def _n_labels(pred, gt):
    masks = list(pred) + list(gt) if not isinstance(pred, np.ndarray) else [pred, gt]
    top = 0
    for m in masks:
        m = np.asarray(m)
        valid = m[m != VOID]
        if valid.size:
            top = max(top, int(valid.max()))
    return top + 1


def per_pixel_rate(pred, gt, n_labels=None):
    """Correct over all non-void ground-truth pixels."""
    C = confusion_matrix(pred, gt, n_labels or _n_labels(pred, gt))
    total = C.sum()
    if total == 0:
        raise UndefinedMetricError("no non-void pixels")
    return float(np.trace(C) / total)


def per_category_rates(C):
    """Per-label recall; NaN for labels absent from the ground truth."""
    support = C.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(C) / support, np.nan)


def per_category_rate(pred, gt, n_labels=None):
    """Mean per-label recall over labels present in the ground truth."""
    C = confusion_matrix(pred, gt, n_labels or _n_labels(pred, gt))
    if C.sum() == 0:
        raise UndefinedMetricError("no non-void pixels")
    return float(np.nanmean(per_category_rates(C)))


def dcg(relevance, k_r):
    rel = np.asarray(relevance, dtype=np.float64)[:k_r]
    ranks = np.arange(1, rel.size + 1)
    return float(((2.0 ** rel - 1.0) / np.log(ranks + 1.0)).sum())


def ndcg(relevance, k_r):
    """Normalised discounted cumulative gain of a ranked relevance list.

    The normaliser is the DCG of the ideal reordering of the whole list,
    so the value ignores the order of items below ``k_r``. Lists with no
    relevant item score 0.
    """
    if k_r < 1:
        raise InvalidInputError("k_r must be at least 1")
    rel = np.asarray(relevance, dtype=np.float64)
    if k_r > rel.size:
        raise InvalidInputError("k_r exceeds the list length")
    z = dcg(np.sort(rel)[::-1], k_r)
    if z == 0:
        return 0.0
    return dcg(rel, k_r) / z


def scene_of(name, separator="_"):
    """Scene class from a file name prefix, e.g. ``coast_arnat59.jpg`` -> ``coast``."""
    stem = str(name).rsplit("/", 1)[-1]
    return stem.split(separator, 1)[0] if separator in stem else stem.rsplit(".", 1)[0]


def retrieval_relevance(query_name, ranked_names, separator="_"):
    q = scene_of(query_name, separator)
    return [int(scene_of(n, separator) == q) for n in ranked_names]


@dataclass
class ParseReport:
    labels: list
    confusion: list
    per_pixel: float
    per_category: float
    void_pixels: int
    n_images: int
    initial_per_pixel: float = None
    initial_per_category: float = None
    mean_ndcg: float = None
    mean_k: float = None
    per_image: list = field(default_factory=list)

    @property
    def category_rates(self):
        return per_category_rates(np.asarray(self.confusion))

    def to_json(self, path=None):
        d = asdict(self)
        d["category_rates"] = {
            name: (None if math.isnan(r) else float(r))
            for name, r in zip(self.labels, self.category_rates)
        }
        text = json.dumps(d, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    def to_text(self):
        lines = [
            f"images            {self.n_images}",
            f"per-pixel         {self.per_pixel:8.4f}",
            f"per-category      {self.per_category:8.4f}",
        ]
        if self.initial_per_pixel is not None:
            lines.append(f"initial per-pixel {self.initial_per_pixel:8.4f}")
            lines.append(f"initial per-cat.  {self.initial_per_category:8.4f}")
        if self.mean_ndcg is not None:
            lines.append(f"retrieval NDCG    {self.mean_ndcg:8.4f}")
        if self.mean_k is not None:
            lines.append(f"mean k*           {self.mean_k:8.2f}")
        lines.append(f"void pixels       {self.void_pixels}")
        lines.append("")
        width = max(len(n) for n in self.labels)
        support = np.asarray(self.confusion).sum(axis=1)
        for name, rate, n in zip(self.labels, self.category_rates, support):
            shown = "     --" if math.isnan(rate) else f"{rate:7.4f}"
            lines.append(f"{name:<{width}}  {shown}  {int(n):>9d} px")
        return "\n".join(lines)

    def write_category_csv(self, path):
        C = np.asarray(self.confusion)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("label_id,label,gt_pixels,correct_pixels,rate\n")
            for i, name in enumerate(self.labels):
                n = int(C[i].sum())
                rate = "" if n == 0 else f"{C[i, i] / n:.6f}"
                fh.write(f"{i},{name},{n},{int(C[i, i])},{rate}\n")

    def write_image_csv(self, path):
        keys = ["image", "per_pixel", "initial_per_pixel", "k", "k_r", "ndcg"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(keys) + "\n")
            for row in self.per_image:
                fh.write(",".join("" if row.get(k) is None else str(row.get(k)) for k in keys) + "\n")


def make_report(labels, preds, gts, initial_preds=None, per_image=None, ndcgs=None, ks=None):
    n = len(labels)
    C = confusion_matrix(preds, gts, n)
    if C.sum() == 0:
        raise UndefinedMetricError("no non-void pixels in the evaluation set")
    rates = per_category_rates(C)
    void = int(sum(int((np.asarray(g) == VOID).sum()) for g in gts))
    report = ParseReport(
        labels=list(labels),
        confusion=C.tolist(),
        per_pixel=float(np.trace(C) / C.sum()),
        per_category=float(np.nanmean(rates)),
        void_pixels=void,
        n_images=len(preds),
        per_image=per_image or [],
    )
    if initial_preds is not None:
        C0 = confusion_matrix(initial_preds, gts, n)
        report.initial_per_pixel = float(np.trace(C0) / C0.sum())
        report.initial_per_category = float(np.nanmean(per_category_rates(C0)))
    if ndcgs:
        report.mean_ndcg = float(np.mean(ndcgs))
    if ks:
        report.mean_k = float(np.mean(ks))
    return report
